"""Beta-distribution actor and scalar critic.

Both networks are two tanh hidden layers.  A graph-free numpy forward pass is
kept alongside the autodiff one for cheap rollouts; the two are tested for
equality.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from ..tensorcore import ad
from ..tensorcore import Tensor, init_uniform

LOGPROB_CLAMP = 1e-10


def init_mlp(rng: np.random.Generator, sizes: list[int]) -> list[Tensor]:
    params = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        params += [init_uniform(rng, (a, b), a), init_uniform(rng, (b,), a)]
    return params


def mlp_forward(params: list[Tensor], x) -> Tensor:
    h = ad.as_tensor(x)
    n = len(params) // 2
    for k in range(n):
        h = ad.matmul(h, params[2 * k]) + params[2 * k + 1]
        if k < n - 1:
            h = ad.tanh(h)
    return h


def mlp_forward_np(params: list[Tensor], x: np.ndarray) -> np.ndarray:
    h = x
    n = len(params) // 2
    for k in range(n):
        h = h @ params[2 * k].data + params[2 * k + 1].data
        if k < n - 1:
            h = np.tanh(h)
    return h


class BetaActor:
    """Maps a state batch to per-dimension Beta parameters ``(alpha0, beta0) > 1``."""

    def __init__(self, state_dim: int, action_dim: int, hidden: int, rng: np.random.Generator):
        self.state_dim, self.action_dim = state_dim, action_dim
        self.params = init_mlp(rng, [state_dim, hidden, hidden, 2 * action_dim])

    def named(self):
        return [(f"actor.{k}", p) for k, p in enumerate(self.params)]

    def forward(self, s) -> tuple[Tensor, Tensor]:
        out = mlp_forward(self.params, s)
        ab = ad.softplus(out) + 1.0
        return ab[..., :self.action_dim], ab[..., self.action_dim:]

    def forward_np(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = mlp_forward_np(self.params, s)
        ab = np.logaddexp(0.0, out) + 1.0
        return ab[..., :self.action_dim], ab[..., self.action_dim:]

    def sample(self, s: np.ndarray, rng: np.random.Generator):
        """Draw actions; log-prob is a float for one state, an array for a batch."""
        a, b = self.forward_np(s)
        x = rng.beta(a, b)
        logp = beta_log_prob_np(x, a, b)
        return x, (float(logp) if np.ndim(logp) == 0 else logp)

    def mean_action(self, s: np.ndarray) -> np.ndarray:
        a, b = self.forward_np(s)
        return a / (a + b)


class Critic:
    def __init__(self, state_dim: int, hidden: int, rng: np.random.Generator):
        self.params = init_mlp(rng, [state_dim, hidden, hidden, 1])

    def named(self):
        return [(f"critic.{k}", p) for k, p in enumerate(self.params)]

    def forward(self, s) -> Tensor:
        out = mlp_forward(self.params, s)
        return out.reshape(out.shape[:-1])

    def forward_np(self, s: np.ndarray) -> np.ndarray:
        return mlp_forward_np(self.params, s)[..., 0]


def beta_log_prob(x: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Sum over the last axis of Beta log-densities at fixed ``x``."""
    x = np.clip(np.asarray(x, float), LOGPROB_CLAMP, 1.0 - LOGPROB_CLAMP)
    logx, log1mx = np.log(x), np.log1p(-x)
    lp = (ad.lgamma(a + b) - ad.lgamma(a) - ad.lgamma(b)
          + (a - 1.0) * logx + (b - 1.0) * log1mx)
    return ad.tsum(lp, axis=-1)


def beta_log_prob_np(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, float), LOGPROB_CLAMP, 1.0 - LOGPROB_CLAMP)
    lp = (gammaln(a + b) - gammaln(a) - gammaln(b) + (a - 1.0) * np.log(x)
          + (b - 1.0) * np.log1p(-x))
    return lp.sum(axis=-1)
