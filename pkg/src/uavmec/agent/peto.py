"""Prediction-enhanced PPO: rollouts, training loop and deterministic evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..env import Action, WBANEnv, decode_action
from ..predictor import TrajectoryModel, predict_users
from ..tensorcore import Adam, ContractError
from .policy import BetaActor, Critic
from .ppo import AgentConfig, RolloutBuffer, UpdateStats, ppo_update


def augment_state(state_vec: np.ndarray, predictions, arena: np.ndarray, U: int, T_p: int) -> np.ndarray:
    """Append arena-normalised predicted positions ``(U, T_p, 2)`` to the base state."""
    if T_p == 0:
        return np.asarray(state_vec, float)
    if predictions is None:
        raise ContractError("prediction-enhanced state needs per-user predictions")
    pred = np.asarray(predictions, float)
    if pred.shape != (U, T_p, 2):
        raise ContractError(f"predictions must be ({U}, {T_p}, 2), got {pred.shape}")
    extent = arena[2:] - arena[:2]
    return np.concatenate([state_vec, ((pred - arena[:2]) / extent).ravel()])


class PetoAgent:
    """Actor, critic and (optionally) a frozen trajectory predictor."""

    def __init__(self, env_dims: tuple[int, int], cfg: AgentConfig,
                 predictor: TrajectoryModel | None = None, seed: int = 0):
        U, N = env_dims
        if cfg.T_p > 0:
            if predictor is None:
                raise ContractError("T_p > 0 needs a trajectory predictor")
            if predictor.T_p < cfg.T_p:
                raise ContractError(f"predictor horizon {predictor.T_p} < agent T_p {cfg.T_p}")
        self.U, self.N, self.cfg = U, N, cfg
        self.predictor = predictor if cfg.T_p > 0 else None
        self.state_dim = U * N + 2 * U + 3 + 2 * U * cfg.T_p
        self.action_dim = U * N + 2
        rng = np.random.default_rng(seed)
        self.actor = BetaActor(self.state_dim, self.action_dim, cfg.hidden, rng)
        self.critic = Critic(self.state_dim, cfg.hidden, rng)

    def named_parameters(self):
        return self.actor.named() + self.critic.named()

    def observe(self, env: WBANEnv) -> np.ndarray:
        base = env.state_vector()
        if self.predictor is None:
            return base
        hist = env.observed_history(self.predictor.T_h)
        pred = predict_users(self.predictor, hist)[:, :self.cfg.T_p]
        return augment_state(base, pred, env.arena, self.U, self.cfg.T_p)

    def act(self, obs: np.ndarray, V_max: float) -> Action:
        """Deterministic action from the Beta means."""
        return decode_action(self.actor.mean_action(obs), self.U, self.N, V_max)


@dataclass
class EpisodeMetrics:
    episode: int
    weighted_avg_completion: float
    remaining_energy: float
    violations: int
    reward: float = 0.0


@dataclass
class TrainLog:
    episodes: list = field(default_factory=list)
    updates: list = field(default_factory=list)


def train_peto(env: WBANEnv, agent: PetoAgent, episodes: int | None = None, seed: int = 0,
               on_episode=None) -> TrainLog:
    """Collect episodes and run a PPO update each time the rollout buffer fills."""
    cfg = agent.cfg
    episodes = cfg.total_episodes if episodes is None else episodes
    rng = np.random.default_rng(seed)
    actor_opt = Adam(agent.actor.params, lr=cfg.lr)
    critic_opt = Adam(agent.critic.params, lr=cfg.lr)
    buffer = RolloutBuffer(cfg.rollout_length)
    log = TrainLog()
    V_max = env.cfg.V_max
    for ep in range(1, episodes + 1):
        env.reset()
        obs = agent.observe(env)
        psi, violations, total_r = [], 0, 0.0
        done = False
        while not done:
            raw, logp = agent.actor.sample(obs, rng)
            value = float(agent.critic.forward_np(obs))
            _, out = env.step(decode_action(raw, agent.U, agent.N, V_max))
            done = out.done
            next_obs = agent.observe(env) if not done else obs
            next_value = 0.0 if done else float(agent.critic.forward_np(next_obs))
            buffer.add(obs, raw, logp, out.reward, value, next_value, done)
            psi.append(out.weighted_completion)
            violations += int(out.violated)
            total_r += out.reward
            obs = next_obs
            if buffer.full:
                log.updates.append(ppo_update(buffer, agent.actor, agent.critic, cfg,
                                              actor_opt, critic_opt, rng))
        m = EpisodeMetrics(ep, float(np.mean(psi)), float(env.state.E_remain), violations, total_r)
        log.episodes.append(m)
        if on_episode is not None:
            on_episode(m)
    return log


@dataclass
class EvalSummary:
    objective_mean: float
    objective_std: float
    violation_rate: float
    energy_used: float
    reward_mean: float
    per_episode: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"objective_mean": self.objective_mean, "objective_std": self.objective_std,
                "violation_rate": self.violation_rate, "energy_used": self.energy_used,
                "reward_mean": self.reward_mean}


def run_episode(env: WBANEnv, policy, seed: int) -> tuple[float, int, float, float, int]:
    """Roll one episode with ``policy(env) -> Action``; returns summary numbers."""
    env.reset(seed=seed)
    psi, violations, reward = [], 0, 0.0
    done = False
    while not done:
        _, out = env.step(policy(env))
        psi.append(out.weighted_completion)
        violations += int(out.violated)
        reward += out.reward
        done = out.done
    return float(np.mean(psi)), violations, env.cfg.E_uav - env.state.E_remain, reward, len(psi)


def evaluate_policy(env: WBANEnv, policy, seeds) -> EvalSummary:
    """Evaluate ``policy`` on one episode per seed (same seeds -> paired comparison)."""
    rows = [run_episode(env, policy, int(s)) for s in seeds]
    if not rows:
        raise ContractError("need at least one evaluation seed")
    obj = np.array([r[0] for r in rows])
    slots = sum(r[4] for r in rows)
    return EvalSummary(float(obj.mean()), float(obj.std()), sum(r[1] for r in rows) / slots,
                       float(np.mean([r[2] for r in rows])), float(np.mean([r[3] for r in rows])),
                       [float(x) for x in obj])


def agent_policy(agent: PetoAgent):
    return lambda env: agent.act(agent.observe(env), env.cfg.V_max)
