from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import DimensionError, Tensor


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)


def adam_step(params: list, grads: list, state: AdamState) -> AdamState:
    """Bias-corrected Adam update applied in place to ``params``.

    A ``None`` gradient is treated as zero.
    """
    if not state.first_moment:
        state.first_moment = [np.zeros(p.shape) for p in params]
        state.second_moment = [np.zeros(p.shape) for p in params]
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise DimensionError("adam_step: params, grads and moments differ in length")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if g is None:
            g = np.zeros(p.shape)
        if g.shape != p.shape:
            raise DimensionError(f"adam_step: grad shape {g.shape} != param shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data = p.data - state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
    return state


class Adam:
    """Convenience wrapper pairing a parameter list with its :class:`AdamState`."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr, beta1, beta2, eps)

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
