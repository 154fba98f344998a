"""Neural-network primitives built on the autodiff core."""
from __future__ import annotations

import numpy as np

from .autodiff import (DimensionError, Tensor, _node, _unbroadcast, add, as_tensor,
                       concat, matmul, sigmoid, softmax, tanh)

LAYER_NORM_EPS = 1e-5


def init_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> Tensor:
    """Parameter drawn from U[-sqrt(1/fan_in), +sqrt(1/fan_in)]."""
    bound = np.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def linear_forward(x, W, b=None) -> Tensor:
    x, W = as_tensor(x), as_tensor(W)
    if W.ndim != 2 or x.shape[-1] != W.shape[0]:
        raise DimensionError(f"linear: input shape {x.shape} incompatible with weight shape {W.shape}")
    out = matmul(x, W)
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[1],):
            raise DimensionError(f"linear: bias shape {b.shape} does not match weight shape {W.shape}")
        out = add(out, b)
    return out


def softmax_rows(x) -> Tensor:
    return softmax(x, axis=-1)


def layer_norm(x, gain, bias, eps: float = LAYER_NORM_EPS) -> Tensor:
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv

    def bw(g):
        gx_hat = g * gain.data
        gx = inv * (gx_hat - gx_hat.mean(axis=-1, keepdims=True)
                    - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        return gx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)
    return _node(xhat * gain.data + bias.data, (x, gain, bias), bw, "layer_norm")


def lstm_cell_step(x, h, c, weights: dict) -> tuple[Tensor, Tensor]:
    """One LSTM step.

    ``weights`` holds ``W_x`` (d_in x 4d_h), ``W_h`` (d_h x 4d_h) and ``b``
    (4d_h), gate blocks ordered input, forget, candidate, output.  ``x``, ``h``
    and ``c`` may be vectors or batches of row vectors.
    """
    x, h, c = as_tensor(x), as_tensor(h), as_tensor(c)
    squeeze = x.ndim == 1
    if squeeze:
        x, h, c = x.reshape(1, -1), h.reshape(1, -1), c.reshape(1, -1)
    d_h = h.shape[-1]
    z = matmul(x, weights["W_x"]) + matmul(h, weights["W_h"]) + weights["b"]
    i = sigmoid(z[:, 0:d_h])
    f = sigmoid(z[:, d_h:2 * d_h])
    g = tanh(z[:, 2 * d_h:3 * d_h])
    o = sigmoid(z[:, 3 * d_h:4 * d_h])
    c_next = f * c + i * g
    h_next = o * tanh(c_next)
    if squeeze:
        return h_next.reshape(d_h), c_next.reshape(d_h)
    return h_next, c_next


def init_lstm(rng: np.random.Generator, d_in: int, d_h: int) -> dict:
    return {
        "W_x": init_uniform(rng, (d_in, 4 * d_h), d_h),
        "W_h": init_uniform(rng, (d_h, 4 * d_h), d_h),
        "b": init_uniform(rng, (4 * d_h,), d_h),
    }


__all__ = ["init_uniform", "linear_forward", "softmax_rows", "layer_norm",
           "lstm_cell_step", "init_lstm", "concat", "LAYER_NORM_EPS"]
