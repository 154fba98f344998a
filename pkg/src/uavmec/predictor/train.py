"""Training loop, normalisation and inference shared by all trajectory predictors.

Models see displacements relative to the last observed position, standardised
per feature with train-split statistics.  Losses are reported in metres.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geo import DatasetSplit, stack_windows
from ..tensorcore import Adam, ContractError, Tensor, backward
from .model import HMTParams, PredictorConfig, hierarchical_forward, init_hmt, rmse, rmse_np


@dataclass
class Standardizer:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    @staticmethod
    def identity() -> "Standardizer":
        z, o = np.zeros(2), np.ones(2)
        return Standardizer(z, o, z.copy(), o.copy())

    @classmethod
    def fit(cls, hist: np.ndarray, fut: np.ndarray) -> "Standardizer":
        anchor = hist[:, -1:, :]
        x, y = (hist - anchor).reshape(-1, 2), (fut - anchor).reshape(-1, 2)
        floor = 1e-6
        return cls(x.mean(0), np.maximum(x.std(0), floor), y.mean(0), np.maximum(y.std(0), floor))

    def encode(self, hist: np.ndarray) -> np.ndarray:
        return (hist - hist[..., -1:, :] - self.x_mean) / self.x_std

    def decode(self, out: np.ndarray, hist: np.ndarray) -> np.ndarray:
        return out * self.y_std + self.y_mean + hist[..., -1:, :]

    def to_arrays(self) -> dict:
        return {"norm.x_mean": self.x_mean, "norm.x_std": self.x_std,
                "norm.y_mean": self.y_mean, "norm.y_std": self.y_std}

    @classmethod
    def from_arrays(cls, arrays: dict) -> "Standardizer":
        return cls(*(np.asarray(arrays[f"norm.{k}"], float) for k in ("x_mean", "x_std", "y_mean", "y_std")))


class TrajectoryModel:
    """Base class: subclasses provide ``params`` with ``named()`` and ``forward``."""

    kind = "base"

    def __init__(self, cfg, params):
        self.cfg = cfg
        self.params = params
        self.norm = Standardizer.identity()

    @property
    def T_h(self) -> int:
        return self.cfg.T_h

    @property
    def T_p(self) -> int:
        return self.cfg.T_p

    def forward(self, x) -> Tensor:  # standardised (B, T_h, 2) -> (B, T_p, 2)
        raise NotImplementedError

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return self.params.named()

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def loss(self, hist: np.ndarray, fut: np.ndarray) -> Tensor:
        """Batch-mean RMSE in metres for raw ``(B, T_h, 2)`` / ``(B, T_p, 2)`` arrays."""
        out = self.forward(Tensor(self.norm.encode(hist)))
        anchor = hist[:, -1:, :]
        meters = out * self.norm.y_std + (self.norm.y_mean + anchor)
        return rmse(meters, fut)

    def predict_batch(self, hist: np.ndarray, chunk: int = 512) -> np.ndarray:
        hist = np.asarray(hist, float)
        outs = [self.forward(Tensor(self.norm.encode(hist[i:i + chunk]))).data
                for i in range(0, len(hist), chunk)]
        return self.norm.decode(np.concatenate(outs), hist)

    def state_arrays(self) -> dict:
        d = {name: t.data for name, t in self.named_parameters()}
        d.update(self.norm.to_arrays())
        return d

    def load_arrays(self, arrays: dict) -> None:
        for name, t in self.named_parameters():
            if name not in arrays:
                raise ContractError(f"checkpoint lacks tensor {name}")
            value = np.asarray(arrays[name], float)
            if value.shape != t.shape:
                raise ContractError(f"tensor {name}: checkpoint shape {value.shape} != {t.shape}")
            t.data = value.copy()
        self.norm = Standardizer.from_arrays(arrays)


class HMTModel(TrajectoryModel):
    kind = "hmt"

    def __init__(self, cfg: PredictorConfig, params: HMTParams | None = None, seed: int = 0):
        super().__init__(cfg, params if params is not None else init_hmt(cfg, np.random.default_rng(seed)))

    def forward(self, x) -> Tensor:
        return hierarchical_forward(x, self.cfg, self.params)


@dataclass
class TrainResult:
    history: list = field(default_factory=list)  # (epoch, train_rmse, val_rmse)
    best_epoch: int = 0
    best_val: float = float("inf")
    stopped_early: bool = False


def evaluate_rmse(model: TrajectoryModel, hist: np.ndarray, fut: np.ndarray) -> float:
    """Mean per-window RMSE in metres."""
    if len(hist) == 0:
        raise ContractError("cannot evaluate on an empty split")
    return float(np.mean(rmse_np(model.predict_batch(hist), fut)))


def train_predictor(model: TrajectoryModel, split: DatasetSplit, seed: int = 0,
                    on_epoch=None) -> TrainResult:
    """Mini-batch Adam on batch-mean RMSE with early stopping on validation RMSE.

    The best-validation parameters are restored before returning.
    """
    cfg = model.cfg
    if not split.train or not split.validation:
        raise ContractError("train and validation splits must be non-empty")
    htr, ftr = stack_windows(split.train)
    hva, fva = stack_windows(split.validation)
    if htr.shape[1] != cfg.T_h or ftr.shape[1] != cfg.T_p:
        raise ContractError(f"windows are ({htr.shape[1]}, {ftr.shape[1]}), model wants ({cfg.T_h}, {cfg.T_p})")
    model.norm = Standardizer.fit(htr, ftr)
    params = model.parameters()
    opt = Adam(params, lr=cfg.learning_rate)
    rng = np.random.default_rng(seed)
    result = TrainResult()
    best = [p.data.copy() for p in params]
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(htr))
        total = 0.0
        for i in range(0, len(order), cfg.batch_size):
            idx = order[i:i + cfg.batch_size]
            opt.zero_grad()
            loss = model.loss(htr[idx], ftr[idx])
            backward(loss)
            opt.step()
            total += loss.item() * len(idx)
        train_loss = total / len(htr)
        val_loss = evaluate_rmse(model, hva, fva)
        result.history.append((epoch, train_loss, val_loss))
        if on_epoch is not None:
            on_epoch(epoch, train_loss, val_loss)
        if val_loss < result.best_val:
            result.best_val, result.best_epoch, stale = val_loss, epoch, 0
            best = [p.data.copy() for p in params]
        else:
            stale += 1
            if stale >= cfg.patience:
                result.stopped_early = True
                break
    for p, b in zip(params, best):
        p.data = b
    return result


@dataclass
class Prediction:
    positions: np.ndarray  # (T_p, 2) metres
    padded: int  # number of synthetic points prepended to the history


def predict_horizon(history, model: TrajectoryModel) -> Prediction:
    """Predict the next ``T_p`` positions from the most recent ``T_h`` points."""
    hist = np.asarray(history, float)
    if hist.ndim != 2 or hist.shape[1] != 2 or len(hist) == 0:
        raise ContractError(f"history must be a non-empty (L, 2) array, got {hist.shape}")
    pad = max(0, model.T_h - len(hist))
    if pad:
        hist = np.concatenate([np.repeat(hist[:1], pad, axis=0), hist])
    hist = hist[-model.T_h:]
    return Prediction(model.predict_batch(hist[None])[0], pad)


def predict_users(model: TrajectoryModel, histories: np.ndarray) -> np.ndarray:
    """Batched prediction for ``(U, T_h, 2)`` histories that are already full length."""
    return model.predict_batch(np.asarray(histories, float))
