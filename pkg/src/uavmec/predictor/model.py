"""Hierarchical multi-scale Transformer trajectory model.

Everything works on batches: a history batch is ``(B, T_h, 2)`` and a
prediction batch ``(B, T_p, 2)``.  Single sequences are promoted to a batch
of one by :func:`hierarchical_forward`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..tensorcore import ad
from ..tensorcore import ContractError, DimensionError, Tensor, init_uniform, layer_norm


@dataclass
class PredictorConfig:
    """Model and training hyper-parameters; defaults follow the reference table."""

    M: int = 3
    w: tuple = (2, 2, 2)
    d_model: int = 64
    h: int = 4
    L_enc: tuple = (2, 2, 2)
    d_ff: int | None = None  # FFN hidden width; None -> 2 * d_model
    T_h: int = 60
    T_p: int = 10
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 10
    use_pe: bool = True

    def __post_init__(self):
        self.w = tuple(int(x) for x in self.w)
        self.L_enc = tuple(int(x) for x in self.L_enc)
        if self.d_ff is None:
            self.d_ff = 2 * self.d_model
        self.validate()

    def validate(self) -> None:
        if self.M < 1 or len(self.w) != self.M or len(self.L_enc) != self.M:
            raise ContractError(f"need M={self.M} slice widths and layer counts")
        if any(x < 1 for x in self.w):
            raise ContractError("slice widths must be >= 1")
        if any(x < 0 for x in self.L_enc):
            raise ContractError("layer counts must be >= 0")
        if self.d_model % self.h:
            raise ContractError(f"d_model={self.d_model} not divisible by h={self.h}")
        if self.d_model % 2:
            raise ContractError("d_model must be even for the positional encoding")
        for name in ("T_h", "T_p", "batch_size", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return {"M": self.M, "w": list(self.w), "d_model": self.d_model, "h": self.h,
                "L_enc": list(self.L_enc), "d_ff": self.d_ff, "T_h": self.T_h, "T_p": self.T_p,
                "learning_rate": self.learning_rate, "batch_size": self.batch_size,
                "max_epochs": self.max_epochs, "patience": self.patience, "use_pe": self.use_pe}

    @classmethod
    def from_dict(cls, d: dict) -> "PredictorConfig":
        return cls(**d)


def vanilla_config(**kw) -> PredictorConfig:
    """Single stage over raw positions with all layers in that stage."""
    base = PredictorConfig()
    layers = kw.pop("layers", sum(base.L_enc))
    return PredictorConfig(M=1, w=(1,), L_enc=(layers,), **kw)


@dataclass
class StageState:
    m: int
    length: int  # |S_m| before padding
    j: int
    pad: int
    K: int
    G: int


def stage_ledger(cfg: PredictorConfig) -> list[StageState]:
    out, length, j = [], cfg.T_h, 2
    for m in range(cfg.M):
        w = cfg.w[m]
        pad = (-length) % w
        K = (length + pad) // w
        out.append(StageState(m + 1, length, j, pad, K, w * j))
        length, j = K, cfg.d_model
    return out


def flat_size(cfg: PredictorConfig) -> int:
    return stage_ledger(cfg)[-1].K * cfg.d_model


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def partition_slices(S, w: int) -> tuple[Tensor, int]:
    """Group every ``w`` consecutive elements of ``S`` (``(B, n, j)``) into one slice.

    Returns ``(slices (B, K, w*j), pad)`` where ``pad`` copies of the last
    element were appended to make ``n`` divisible by ``w``.
    """
    if w < 1:
        raise ContractError(f"slice width must be >= 1, got {w}")
    S = ad.as_tensor(S)
    B, n, j = S.shape
    pad = (-n) % w
    if pad:
        S = ad.concat([S] + [S[:, n - 1:n, :]] * pad, axis=1)
    return S.reshape(B, (n + pad) // w, w * j), pad


def positional_encoding(K: int, d_model: int) -> np.ndarray:
    """Sinusoidal table with 1-based positions; pair ``i`` uses columns ``2(i-1)``, ``2(i-1)+1``."""
    pos = np.arange(1, K + 1, dtype=float)[:, None]
    i = np.arange(1, d_model // 2 + 1, dtype=float)[None, :]
    angle = pos / 10000.0 ** (2 * i / d_model)
    pe = np.empty((K, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe


def embed_with_positions(slices, W_e, b_e, use_pe: bool = True) -> Tensor:
    Z = ad.relu(ad.add(ad.matmul(slices, W_e), b_e))
    if not use_pe:
        return Z
    return Z + positional_encoding(Z.shape[1], Z.shape[2])


def multi_head_attention(O, p: dict, h: int, return_weights: bool = False):
    """Scaled dot-product self-attention over ``O`` of shape ``(B, K, d)``."""
    B, K, d = O.shape
    di = d // h

    def heads(x):  # (B, K, d) -> (B, h, K, di)
        return x.reshape(B, K, h, di).transpose(0, 2, 1, 3)

    Q, Kt, V = heads(ad.matmul(O, p["W_q"])), heads(ad.matmul(O, p["W_k"])), heads(ad.matmul(O, p["W_v"]))
    scores = ad.matmul(Q, ad.swapaxes(Kt, -1, -2)) * (1.0 / math.sqrt(di))
    A = ad.softmax(scores, axis=-1)
    ctx = ad.matmul(A, V).transpose(0, 2, 1, 3).reshape(B, K, d)
    F = ad.matmul(ctx, p["W_o"])
    return (F, A) if return_weights else F


def encoder_layer(O, p: dict, h: int) -> Tensor:
    """Post-norm layer: ``LN(x + MHA(x))`` then ``LN(y + FFN(y))``."""
    y = layer_norm(O + multi_head_attention(O, p, h), p["ln1_g"], p["ln1_b"])
    ff = ad.matmul(ad.relu(ad.matmul(y, p["W_1"]) + p["b_1"]), p["W_2"]) + p["b_2"]
    return layer_norm(y + ff, p["ln2_g"], p["ln2_b"])


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

def _layer_params(rng, d, d_ff) -> dict:
    return {
        "W_q": init_uniform(rng, (d, d), d), "W_k": init_uniform(rng, (d, d), d),
        "W_v": init_uniform(rng, (d, d), d), "W_o": init_uniform(rng, (d, d), d),
        "ln1_g": Tensor(np.ones(d), requires_grad=True), "ln1_b": Tensor(np.zeros(d), requires_grad=True),
        "W_1": init_uniform(rng, (d, d_ff), d), "b_1": init_uniform(rng, (d_ff,), d),
        "W_2": init_uniform(rng, (d_ff, d), d_ff), "b_2": init_uniform(rng, (d,), d_ff),
        "ln2_g": Tensor(np.ones(d), requires_grad=True), "ln2_b": Tensor(np.zeros(d), requires_grad=True),
    }


@dataclass
class HMTParams:
    stages: list = field(default_factory=list)  # [{"W_e", "b_e", "layers": [..]}]
    W_x: Tensor | None = None
    b_x: Tensor | None = None
    W_y: Tensor | None = None
    b_y: Tensor | None = None

    def named(self) -> list[tuple[str, Tensor]]:
        out = []
        for m, st in enumerate(self.stages):
            out += [(f"stage{m}.W_e", st["W_e"]), (f"stage{m}.b_e", st["b_e"])]
            for l, layer in enumerate(st["layers"]):
                out += [(f"stage{m}.layer{l}.{k}", v) for k, v in layer.items()]
        out += [("head.W_x", self.W_x), ("head.b_x", self.b_x), ("head.W_y", self.W_y),
                ("head.b_y", self.b_y)]
        return out

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named()]


def init_hmt(cfg: PredictorConfig, rng: np.random.Generator) -> HMTParams:
    params = HMTParams()
    for st, L in zip(stage_ledger(cfg), cfg.L_enc):
        params.stages.append({
            "W_e": init_uniform(rng, (st.G, cfg.d_model), st.G),
            # per-position embedding bias, shape (K_m, d_model)
            "b_e": init_uniform(rng, (st.K, cfg.d_model), st.G),
            "layers": [_layer_params(rng, cfg.d_model, cfg.d_ff) for _ in range(L)],
        })
    flat = flat_size(cfg)
    params.W_x = init_uniform(rng, (flat, cfg.T_p), flat)
    params.b_x = Tensor(np.zeros(cfg.T_p), requires_grad=True)
    params.W_y = init_uniform(rng, (flat, cfg.T_p), flat)
    params.b_y = Tensor(np.zeros(cfg.T_p), requires_grad=True)
    return params


def hierarchical_forward(history, cfg: PredictorConfig, params: HMTParams,
                         attention: list | None = None) -> Tensor:
    """Map ``(B, T_h, 2)`` (or ``(T_h, 2)``) histories to ``(B, T_p, 2)`` predictions.

    If ``attention`` is a list, every layer's attention weights are appended.
    """
    S = ad.as_tensor(history)
    single = S.ndim == 2
    if single:
        S = S.reshape(1, *S.shape)
    if S.ndim != 3 or S.shape[1] != cfg.T_h or S.shape[2] != 2:
        raise DimensionError(f"history must be (B, {cfg.T_h}, 2), got {S.shape}")
    if len(params.stages) != cfg.M:
        raise DimensionError(f"parameters hold {len(params.stages)} stages, config wants {cfg.M}")
    for m, st in enumerate(params.stages):
        slices, _ = partition_slices(S, cfg.w[m])
        if slices.shape[2] != st["W_e"].shape[0] or slices.shape[1] != st["b_e"].shape[0]:
            raise DimensionError(f"stage {m + 1}: slices {slices.shape[1:]} vs embedding "
                                 f"{st['W_e'].shape}, bias {st['b_e'].shape}")
        S = embed_with_positions(slices, st["W_e"], st["b_e"], cfg.use_pe)
        for layer in st["layers"]:
            if attention is not None:
                _, A = multi_head_attention(S, layer, cfg.h, return_weights=True)
                attention.append(A.data)
            S = encoder_layer(S, layer, cfg.h)
    B = S.shape[0]
    flat = S.reshape(B, S.shape[1] * S.shape[2])
    yx = ad.matmul(flat, params.W_x) + params.b_x
    yy = ad.matmul(flat, params.W_y) + params.b_y
    out = ad.stack([yx, yy], axis=2)
    return out.reshape(cfg.T_p, 2) if single else out


def rmse(pred, target) -> Tensor:
    """Per-sequence RMSE of Euclidean step errors, averaged over the batch."""
    pred, target = ad.as_tensor(pred), ad.as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"rmse: {pred.shape} vs {target.shape}")
    diff = pred - target
    sq = ad.tsum(diff * diff, axis=-1)  # (..., T_p)
    per_seq = ad.sqrt(ad.mean(sq, axis=-1))
    return ad.mean(per_seq)


def rmse_np(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Per-sequence RMSE without building a graph."""
    return np.sqrt(np.mean(np.sum((pred - target) ** 2, axis=-1), axis=-1))
