"""Discrete-time WBAN/UAV edge-computing simulator with an MDP interface."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..tensorcore import ContractError
from . import formulas as fm
from .config import ALPHA_HIGH, ALPHA_LOW, EnvConfig


class EpisodeFinished(RuntimeError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    phi: float
    rho: float
    alpha: float
    D: float
    C: float

    @property
    def I(self) -> float:
        return fm.criticality_index(self.phi, self.rho, self.alpha)


@dataclass
class CriticalityChain:
    """Two-state (low/high) urgency chain; state 0 = low, 1 = high."""

    transition: np.ndarray = field(default_factory=lambda: np.array([[0.7, 0.3], [0.3, 0.7]]))

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        if self.transition.shape != (2, 2) or np.any(np.abs(self.transition.sum(1) - 1) > 1e-12):
            raise ContractError("transition must be a 2x2 row-stochastic matrix")

    def stationary(self) -> np.ndarray:
        p01, p10 = self.transition[0, 1], self.transition[1, 0]
        if p01 + p10 == 0:
            return np.array([0.5, 0.5])
        return np.array([p10, p01]) / (p01 + p10)


def step_criticality(chain: CriticalityChain, alpha_prev, rng: np.random.Generator):
    """Advance urgency levels (``0.5``/``1.0`` values, any shape) by one slot."""
    alpha_prev = np.asarray(alpha_prev, dtype=float)
    high = alpha_prev == ALPHA_HIGH
    if not np.all(high | (alpha_prev == ALPHA_LOW)):
        raise ContractError("alpha must be 0.5 (low) or 1.0 (high)")
    p_high = np.where(high, chain.transition[1, 1], chain.transition[0, 1])
    nxt = rng.random(alpha_prev.shape) < p_high
    out = np.where(nxt, ALPHA_HIGH, ALPHA_LOW)
    return float(out) if out.ndim == 0 else out


@dataclass
class Action:
    v: float
    sigma: float
    z: np.ndarray  # (U, N) offload flags in {0, 1}


@dataclass
class EnvState:
    t: int
    user_pos: np.ndarray  # (U, 2)
    uav_pos: np.ndarray  # (2,)
    E_remain: float
    phi: np.ndarray  # (U,)
    rho: np.ndarray  # (U, N)
    alpha: np.ndarray  # (U, N)
    D: np.ndarray
    C: np.ndarray

    @property
    def I(self) -> np.ndarray:
        return (self.phi[:, None] + self.rho + self.alpha) / 3.0

    def task(self, u: int, n: int) -> TaskSpec:
        return TaskSpec(float(self.phi[u]), float(self.rho[u, n]), float(self.alpha[u, n]),
                        float(self.D[u, n]), float(self.C[u, n]))


@dataclass
class StepOutcome:
    T_loc: np.ndarray
    T_trans: np.ndarray
    T_comp: np.ndarray
    T_total: np.ndarray
    E_comp: np.ndarray
    E_fly: float
    Psi: np.ndarray
    reward: float
    omega_uav: int
    omega_time: int
    R: np.ndarray
    f_loc: np.ndarray
    f_uav: np.ndarray
    gain: np.ndarray
    uav_pos: np.ndarray
    done: bool

    @property
    def weighted_completion(self) -> float:
        return float(self.Psi.sum())

    @property
    def energy(self) -> float:
        return self.E_fly + float(self.E_comp.sum())

    @property
    def violated(self) -> bool:
        return not (self.omega_uav and self.omega_time)


def slot_outcome(cfg: EnvConfig, state: EnvState, action: Action, arena=None) -> StepOutcome:
    """Evaluate one slot without mutating anything."""
    z = np.asarray(action.z).astype(int)
    if z.shape != state.D.shape or not np.all((z == 0) | (z == 1)):
        raise ContractError(f"offload flags must be a binary {state.D.shape} array")
    new_uav, E_fly = fm.fly_and_energy(state.uav_pos, action.v, action.sigma, cfg, arena)
    _, _, gain = fm.channel_model(state.user_pos, new_uav, cfg)
    I = state.I
    f_loc, T_loc = fm.local_compute(I, state.C, z, cfg)
    R, T_trans = fm.transmission(I, state.D, z, gain, cfg)
    f_uav, T_comp, E_comp = fm.uav_compute(I, state.C, z, cfg)
    T_total = fm.total_latency(z, T_loc, T_trans, T_comp)
    Psi = fm.weighted_times(I, T_total)
    omega_uav = int(state.E_remain - (E_fly + E_comp.sum()) >= 0.0)
    omega_time = int(np.all(T_total <= cfg.tau_c))
    reward = float(np.sum(I * (cfg.tau_c - T_total))) if omega_uav and omega_time else 0.0
    return StepOutcome(T_loc, T_trans, T_comp, T_total, E_comp, E_fly, Psi, reward,
                       omega_uav, omega_time, R, f_loc, f_uav, gain, new_uav, False)


def arena_from_traces(traces: np.ndarray, cfg: EnvConfig) -> np.ndarray:
    pts = traces.reshape(-1, 2)
    lo, hi = pts.min(0), pts.max(0)
    center = (lo + hi) / 2
    half = np.maximum((hi - lo) / 2 * (1 + cfg.arena_pad), cfg.arena_min_half_extent)
    return np.concatenate([center - half, center + half])


class WBANEnv:
    """Single-UAV environment driven by per-user position traces.

    ``traces`` is ``(U, L, 2)`` with 1 s point spacing; slot ``t`` of an
    episode reads trace index ``start + (t - 1) * points_per_slot``.
    """

    def __init__(self, cfg: EnvConfig, traces, phi, rho, seed: int = 0):
        self.cfg = cfg
        self.traces = np.asarray(traces, dtype=float)
        if self.traces.ndim != 3 or self.traces.shape[0] != cfg.U or self.traces.shape[2] != 2:
            raise ContractError(f"traces must be ({cfg.U}, L, 2), got {self.traces.shape}")
        self.phi = np.asarray(phi, dtype=float)
        self.rho = np.asarray(rho, dtype=float)
        fm.criticality_index(self.phi[:, None], self.rho, ALPHA_LOW)  # validates levels
        self.chain = CriticalityChain(np.array(cfg.transition))
        self.arena = arena_from_traces(self.traces, cfg)
        self.extent = self.arena[2:] - self.arena[:2]
        self.rng = np.random.default_rng(seed)
        self.state: EnvState | None = None
        self.start = 0
        self._history: list[np.ndarray] = []
        self._finished = True

    # ------------------------------------------------------------------
    @property
    def span(self) -> int:
        return (self.cfg.T - 1) * self.cfg.points_per_slot + 1

    def _positions(self, t: int) -> np.ndarray:
        k = min(self.start + (t - 1) * self.cfg.points_per_slot, self.traces.shape[1] - 1)
        return self.traces[:, k, :].copy()

    def _sample_tasks(self, shape):
        lo, hi = self.cfg.data_bits
        D = self.rng.uniform(lo, hi, size=shape)
        lo, hi = self.cfg.cycles
        C = self.rng.uniform(lo, hi, size=shape)
        return D, C

    def reset(self, seed: int | None = None, start: int | None = None) -> EnvState:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        max_start = self.traces.shape[1] - self.span
        if max_start < 0:
            raise ContractError("traces are shorter than one episode")
        self.start = int(self.rng.integers(0, max_start + 1)) if start is None else int(start)
        shape = (self.cfg.U, self.cfg.N)
        stationary = self.chain.stationary()
        alpha = np.where(self.rng.random(shape) < stationary[1], ALPHA_HIGH, ALPHA_LOW)
        D, C = self._sample_tasks(shape)
        users = self._positions(1)
        uav = np.clip(users.mean(axis=0), self.arena[:2], self.arena[2:])
        self.state = EnvState(1, users, uav, self.cfg.E_uav, self.phi.copy(), self.rho.copy(),
                              alpha, D, C)
        self._history = [users]
        self._finished = False
        return self.state

    def step(self, action: Action) -> tuple[EnvState, StepOutcome]:
        if self._finished or self.state is None:
            raise EpisodeFinished("episode finished; call reset()")
        s = self.state
        out = slot_outcome(self.cfg, s, action, self.arena)
        done = s.t >= self.cfg.T
        out.done = done
        alpha = step_criticality(self.chain, s.alpha, self.rng)
        D, C = self._sample_tasks(s.D.shape)
        users = self._positions(s.t + 1)
        self.state = replace(s, t=s.t + 1, user_pos=users, uav_pos=out.uav_pos,
                             E_remain=s.E_remain - out.energy, alpha=alpha, D=D, C=C)
        if not done:
            self._history.append(users)
        self._finished = done
        return self.state, out

    # ------------------------------------------------------------------
    def observed_history(self, T_h: int) -> np.ndarray:
        """Last ``T_h`` observed positions per user, left-padded with the first."""
        hist = np.stack(self._history[-T_h:], axis=1)  # (U, k, 2)
        if hist.shape[1] < T_h:
            pad = np.repeat(hist[:, :1], T_h - hist.shape[1], axis=1)
            hist = np.concatenate([pad, hist], axis=1)
        return hist

    def normalize_positions(self, xy: np.ndarray) -> np.ndarray:
        return (np.asarray(xy) - self.arena[:2]) / self.extent

    def state_vector(self, state: EnvState | None = None) -> np.ndarray:
        s = state or self.state
        return state_vector(s, self.arena, self.cfg)

    @property
    def state_dim(self) -> int:
        return self.cfg.U * self.cfg.N + 2 * self.cfg.U + 3

    @property
    def action_dim(self) -> int:
        return self.cfg.U * self.cfg.N + 2


def state_vector(state: EnvState, arena: np.ndarray, cfg: EnvConfig) -> np.ndarray:
    extent = arena[2:] - arena[:2]
    users = (state.user_pos - arena[:2]) / extent
    uav = (state.uav_pos - arena[:2]) / extent
    return np.concatenate([state.I.ravel(), users.ravel(), uav, [state.E_remain / cfg.E_uav]])


def decode_action(raw, U: int, N: int, V_max: float) -> Action:
    """Map a unit-cube vector to (speed, heading, offload flags)."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (U * N + 2,):
        raise ContractError(f"raw action must have length {U * N + 2}")
    if np.any(raw < 0) or np.any(raw > 1):
        raise ContractError("raw action must lie in [0, 1]")
    z = (raw[2:] >= 0.5).astype(int).reshape(U, N)
    return Action(float(raw[0] * V_max), float(raw[1] * 2 * math.pi), z)
