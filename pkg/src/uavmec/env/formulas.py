"""Closed-form task, channel, latency and energy models.

Array conventions: task quantities are ``(U, N)`` arrays, per-user quantities
``(U,)``.  Quantities that do not exist for a task (edge terms of a local
task, local terms of an offloaded one) are ``NaN`` rather than zero.
"""
from __future__ import annotations

import math

import numpy as np

from ..tensorcore import ContractError
from .config import ALPHA_LEVELS, PHI_LEVELS, RHO_LEVELS, EnvConfig


def criticality_index(phi, rho, alpha, check: bool = True):
    """Arithmetic mean of user, sensor and urgency criticality."""
    phi, rho, alpha = np.asarray(phi, float), np.asarray(rho, float), np.asarray(alpha, float)
    if check:
        for arr, levels, name in ((phi, PHI_LEVELS, "phi"), (rho, RHO_LEVELS, "rho"),
                                  (alpha, ALPHA_LEVELS, "alpha")):
            if not np.all(np.isin(arr, levels)):
                raise ContractError(f"{name} must take values in {levels}")
    out = (phi + rho + alpha) / 3.0
    return float(out) if out.ndim == 0 else out


def elevation_deg(user_pos, uav_pos, H: float):
    """Elevation angle in degrees; 90 when the UAV is straight overhead."""
    horiz = np.linalg.norm(np.asarray(user_pos, float) - np.asarray(uav_pos, float), axis=-1)
    return np.degrees(np.arctan2(H, horiz))


def los_probability(beta_deg, a: float, b: float):
    return 1.0 / (1.0 + a * np.exp(-b * (np.asarray(beta_deg, float) - a)))


def channel_model(user_pos, uav_pos, cfg: EnvConfig):
    """Return ``(beta_deg, p_los, gain)`` for each user against one UAV position."""
    if cfg.H <= 0:
        raise ContractError("altitude must be positive")
    user_pos = np.asarray(user_pos, float)
    horiz2 = np.sum((user_pos - np.asarray(uav_pos, float)) ** 2, axis=-1)
    beta = elevation_deg(user_pos, uav_pos, cfg.H)
    p_los = los_probability(beta, cfg.a, cfg.b)
    d = np.sqrt(cfg.H ** 2 + horiz2)
    gain = (p_los * cfg.g0 + (1.0 - p_los) * cfg.kappa * cfg.g0) / d ** cfg.varsigma
    return beta, p_los, gain


def transmission(I, D, z, gain, cfg: EnvConfig):
    """Criticality-proportional bandwidth/power split and uplink time per task."""
    I, D = np.asarray(I, float), np.asarray(D, float)
    z = np.asarray(z).astype(bool)
    load = np.sum(np.where(z, I, 0.0), axis=-1, keepdims=True)
    if np.any(z & (load <= 0)):
        raise ContractError("offloaded task with zero total offloaded criticality")
    share = np.divide(I, load, out=np.zeros_like(I), where=load > 0)
    snr = share * cfg.P_u * np.asarray(gain, float)[..., None] / cfg.N0
    rate = share * cfg.W_u * np.log2(1.0 + snr)
    R = np.where(z, rate, np.nan)
    return R, D / R


def local_compute(I, C, z, cfg: EnvConfig):
    I, C = np.asarray(I, float), np.asarray(C, float)
    local = ~np.asarray(z).astype(bool)
    load = np.sum(np.where(local, I, 0.0), axis=-1, keepdims=True)
    if np.any(local & (load <= 0)):
        raise ContractError("local task with zero total local criticality")
    f = np.where(local, np.divide(I * cfg.V_u, load, out=np.zeros_like(I), where=load > 0), np.nan)
    return f, C / f


def uav_compute(I, C, z, cfg: EnvConfig):
    I, C = np.asarray(I, float), np.asarray(C, float)
    z = np.asarray(z).astype(bool)
    load = float(np.sum(np.where(z, I, 0.0)))
    if not np.any(z):
        nan = np.full(I.shape, np.nan)
        return nan, nan, np.zeros(I.shape)
    if load <= 0:
        raise ContractError("offloaded tasks with zero total criticality")
    f = np.where(z, I * cfg.F_v / load, np.nan)
    T_comp = C / f
    E_comp = np.where(z, cfg.eta * np.where(z, f, 0.0) ** 2 * C, 0.0)
    return f, T_comp, E_comp


def propulsion_energy(v: float, cfg: EnvConfig) -> float:
    v_eff = max(v, cfg.v_hover)
    return (cfg.gamma1 * v ** 3 + cfg.gamma2 / v_eff) * cfg.t_fly


def fly_and_energy(uav_pos, v: float, sigma: float, cfg: EnvConfig, arena=None):
    """Move the UAV for ``t_fly`` seconds and return ``(new_pos, E_fly)``.

    ``arena`` is ``(xmin, ymin, xmax, ymax)``; the new position is clamped to it.
    """
    if not 0.0 <= v <= cfg.V_max:
        raise ContractError(f"speed {v} outside [0, {cfg.V_max}]")
    if not 0.0 <= sigma <= 2 * math.pi:
        raise ContractError(f"heading {sigma} outside [0, 2pi]")
    x, y = uav_pos
    new = np.array([x + v * cfg.t_fly * math.cos(sigma), y + v * cfg.t_fly * math.sin(sigma)])
    if arena is not None:
        new = np.clip(new, arena[:2], arena[2:])
    return new, propulsion_energy(v, cfg)


def total_latency(z, T_loc, T_trans, T_comp):
    z = np.asarray(z).astype(bool)
    return np.where(z, T_trans + T_comp, T_loc)


def weighted_times(I, T_total):
    """Criticality-weighted completion time of every task in one slot."""
    I = np.asarray(I, float)
    return I / I.sum() * T_total
