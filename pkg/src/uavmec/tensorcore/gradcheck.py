"""Central finite-difference oracle for checking reverse-mode gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .autodiff import Tensor, backward


def numerical_grad(fn: Callable[[], Tensor], param: Tensor, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros(param.shape)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    for k in range(flat.size):
        saved = flat[k]
        flat[k] = saved + h
        up = float(fn().data)
        flat[k] = saved - h
        down = float(fn().data)
        flat[k] = saved
        out[k] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> float:
    """Worst relative error between autodiff and finite differences over ``params``."""
    for p in params:
        p.grad = None
    backward(fn())
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros(p.shape)
        worst = max(worst, relative_error(analytic, numerical_grad(fn, p, h)))
    return worst
