from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tensorcore import ad
from ..tensorcore import Adam, ContractError, Tensor, backward
from .policy import BetaActor, Critic, beta_log_prob


@dataclass
class AgentConfig:
    gamma: float = 0.98
    lambda_gae: float = 0.95
    epsilon_clip: float = 0.2
    lr: float = 1e-3
    hidden: int = 128
    epochs_per_update: int = 10
    minibatch_size: int = 64
    rollout_length: int = 2048
    total_episodes: int = 500
    T_p: int = 10  # predicted steps per user entering the state; 0 disables prediction

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ContractError("gamma must lie in (0, 1]")
        if not 0 <= self.lambda_gae <= 1:
            raise ContractError("lambda_gae must lie in [0, 1]")
        if self.epsilon_clip <= 0 or self.lr <= 0:
            raise ContractError("epsilon_clip and lr must be positive")
        for name in ("hidden", "epochs_per_update", "minibatch_size", "rollout_length", "total_episodes"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        if self.T_p < 0:
            raise ContractError("T_p must be >= 0")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        return cls(**d)


@dataclass
class RolloutBuffer:
    capacity: int
    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    next_values: list = field(default_factory=list)
    terminals: list = field(default_factory=list)

    def add(self, state, action, log_prob, reward, value, next_value, terminal) -> None:
        if self.full:
            raise ContractError("rollout buffer is full")
        self.states.append(state)
        self.actions.append(action)
        self.log_probs.append(log_prob)
        self.rewards.append(reward)
        self.values.append(value)
        self.next_values.append(next_value)
        self.terminals.append(terminal)

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def full(self) -> bool:
        return len(self) >= self.capacity

    def clear(self) -> None:
        for name in ("states", "actions", "log_probs", "rewards", "values", "next_values", "terminals"):
            getattr(self, name).clear()


def compute_gae(rewards, values, terminals, gamma: float, lam: float, next_values=None):
    """Generalised advantages and one-step value targets.

    ``values`` is either length ``n`` together with ``next_values`` (the value
    of each successor state), or length ``n + 1`` where the last entry is the
    bootstrap value after the final step.  A terminal step uses 0 for its
    successor and cuts the advantage recursion.
    """
    r = np.asarray(rewards, float)
    v = np.asarray(values, float)
    done = np.asarray(terminals, bool)
    n = len(r)
    if done.shape != (n,):
        raise ContractError("rewards and terminals differ in length")
    if next_values is None:
        if v.shape != (n + 1,):
            raise ContractError("values must have one bootstrap entry beyond the rewards")
        v, nv = v[:n], v[1:]
    else:
        nv = np.asarray(next_values, float)
        if v.shape != (n,) or nv.shape != (n,):
            raise ContractError("values, next_values and rewards differ in length")
    nv = np.where(done, 0.0, nv)
    targets = r + gamma * nv
    delta = targets - v
    adv = np.zeros(n)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        acc = delta[t] + (0.0 if done[t] else gamma * lam * acc)
        adv[t] = acc
    return adv, targets


def clipped_objective(ratio, adv, eps: float):
    """Per-sample ``min(ratio * A, clip(ratio) * A)`` on tensors or arrays."""
    if isinstance(ratio, Tensor):
        return ad.minimum(ratio * adv, ad.clip(ratio, 1 - eps, 1 + eps) * adv)
    return np.minimum(ratio * adv, np.clip(ratio, 1 - eps, 1 + eps) * adv)


@dataclass
class UpdateStats:
    actor_loss: float
    critic_loss: float
    clip_fraction: float


def ppo_update(buffer: RolloutBuffer, actor: BetaActor, critic: Critic, cfg: AgentConfig,
               actor_opt: Adam, critic_opt: Adam, rng: np.random.Generator) -> UpdateStats:
    if len(buffer) == 0:
        raise ContractError("cannot update from an empty buffer")
    S = np.asarray(buffer.states, float)
    X = np.asarray(buffer.actions, float)
    old_lp = np.asarray(buffer.log_probs, float)
    adv, targets = compute_gae(buffer.rewards, buffer.values, buffer.terminals, cfg.gamma,
                               cfg.lambda_gae, next_values=buffer.next_values)
    std = adv.std()
    adv = (adv - adv.mean()) / (std if std > 1e-8 else 1.0)
    n = len(S)
    a_losses, c_losses, clipped = [], [], []
    for _ in range(cfg.epochs_per_update):
        order = rng.permutation(n)
        for i in range(0, n, cfg.minibatch_size):
            idx = order[i:i + cfg.minibatch_size]
            a, b = actor.forward(Tensor(S[idx]))
            ratio = ad.exp(beta_log_prob(X[idx], a, b) - old_lp[idx])
            loss = -ad.mean(clipped_objective(ratio, adv[idx], cfg.epsilon_clip))
            actor_opt.zero_grad()
            backward(loss)
            actor_opt.step()
            a_losses.append(loss.item())
            clipped.append(float(np.mean(np.abs(ratio.data - 1) > cfg.epsilon_clip)))

            diff = critic.forward(Tensor(S[idx])) - targets[idx]
            closs = 0.5 * ad.mean(diff * diff)
            critic_opt.zero_grad()
            backward(closs)
            critic_opt.step()
            c_losses.append(closs.item())
    buffer.clear()
    return UpdateStats(float(np.mean(a_losses)), float(np.mean(c_losses)), float(np.mean(clipped)))
