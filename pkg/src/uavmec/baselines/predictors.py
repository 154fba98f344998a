"""Baseline trajectory predictors trained with the same loop as the hierarchical model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..predictor import HMTModel, PredictorConfig, TrajectoryModel, vanilla_config
from ..tensorcore import ad
from ..tensorcore import ContractError, DimensionError, Tensor, init_lstm, init_uniform, lstm_cell_step


@dataclass
class LSTMConfig:
    T_h: int = 60
    T_p: int = 10
    hidden: int = 128
    fc: int = 64
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 10

    def __post_init__(self):
        for name in ("T_h", "T_p", "hidden", "fc", "batch_size", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "LSTMConfig":
        return cls(**d)


class LSTMParams:
    def __init__(self, cfg: LSTMConfig, rng: np.random.Generator):
        self.cell = init_lstm(rng, 2, cfg.hidden)
        self.W_1 = init_uniform(rng, (cfg.hidden, cfg.fc), cfg.hidden)
        self.b_1 = init_uniform(rng, (cfg.fc,), cfg.hidden)
        self.W_2 = init_uniform(rng, (cfg.fc, 2 * cfg.T_p), cfg.fc)
        self.b_2 = init_uniform(rng, (2 * cfg.T_p,), cfg.fc)

    def named(self):
        out = [(f"lstm.{k}", v) for k, v in self.cell.items()]
        return out + [(f"fc.{k}", getattr(self, k)) for k in ("W_1", "b_1", "W_2", "b_2")]


class LSTMModel(TrajectoryModel):
    """LSTM(128) over the history, a 128->64 ReLU layer, then a linear 64->2*T_p read-out."""

    kind = "lstm"

    def __init__(self, cfg: LSTMConfig, seed: int = 0):
        super().__init__(cfg, LSTMParams(cfg, np.random.default_rng(seed)))

    def forward(self, x) -> Tensor:
        x = ad.as_tensor(x)
        if x.ndim != 3 or x.shape[1] != self.cfg.T_h or x.shape[2] != 2:
            raise DimensionError(f"history must be (B, {self.cfg.T_h}, 2), got {x.shape}")
        B = x.shape[0]
        p = self.params
        h = Tensor(np.zeros((B, self.cfg.hidden)))
        c = Tensor(np.zeros((B, self.cfg.hidden)))
        for t in range(self.cfg.T_h):
            h, c = lstm_cell_step(x[:, t, :], h, c, p.cell)
        z = ad.relu(ad.matmul(h, p.W_1) + p.b_1)
        out = ad.matmul(z, p.W_2) + p.b_2
        return out.reshape(B, self.cfg.T_p, 2)


class VanillaModel(HMTModel):
    """Single-stage Transformer over raw positions (M=1, w=1)."""

    kind = "vanilla"

    def __init__(self, cfg: PredictorConfig | None = None, seed: int = 0):
        cfg = cfg or vanilla_config()
        if cfg.M != 1 or cfg.w != (1,):
            raise ContractError("vanilla predictor needs M=1 and w=(1,)")
        super().__init__(cfg, seed=seed)


MODEL_KINDS = {"hmt": HMTModel, "vanilla": VanillaModel, "lstm": LSTMModel}


def build_model(kind: str, cfg_dict: dict | None = None, seed: int = 0) -> TrajectoryModel:
    """Construct a predictor of ``kind`` from a plain config dict."""
    cfg_dict = dict(cfg_dict or {})
    if kind == "hmt":
        return HMTModel(PredictorConfig.from_dict(cfg_dict), seed=seed)
    if kind == "vanilla":
        cfg = PredictorConfig.from_dict(cfg_dict) if "M" in cfg_dict else vanilla_config(**cfg_dict)
        return VanillaModel(cfg, seed=seed)
    if kind == "lstm":
        return LSTMModel(LSTMConfig.from_dict(cfg_dict), seed=seed)
    raise ContractError(f"unknown predictor kind {kind!r}; expected one of {sorted(MODEL_KINDS)}")
