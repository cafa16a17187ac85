"""Windowing and the Adam training loop with early stopping."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .model import ModelConfig, init_params, loss, forward, loss_and_grads
from .numerics import AdamState, adam_step

log = logging.getLogger(__name__)


class InputTooShortError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"loss became non-finite ({value}) at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    stride: int = 1
    max_epochs: int = 2000
    patience: int = 20
    min_delta: float = 1e-5
    lr: float = 1e-3
    seed: int = 0
    val_fraction: float = 0.2
    batch_size: int | None = None     # None: one full-batch step per epoch
    shuffle: bool = True
    standardize: bool = True

    def problems(self) -> list[str]:
        out = []
        if self.stride < 1:
            out.append("train.stride must be >= 1")
        if self.patience < 1:
            out.append("train.patience must be >= 1")
        if self.max_epochs < 1:
            out.append("train.max_epochs must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            out.append("train.val_fraction must lie in (0, 1)")
        if not self.lr > 0:
            out.append("train.lr must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            out.append("train.batch_size must be >= 1 or null")
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stop_epoch: int = 0
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def standardize(series: np.ndarray) -> np.ndarray:
    """Per-series z-score; constant series are only centred."""
    series = np.asarray(series, dtype=np.float64)
    mu = series.mean(axis=1, keepdims=True)
    sd = series.std(axis=1, keepdims=True)
    sd[sd < 1e-12] = 1.0
    return (series - mu) / sd


def make_windows(series: np.ndarray, T: int, stride: int = 1) -> np.ndarray:
    """Contiguous windows ``[count, N, T]`` starting every ``stride`` slots."""
    series = np.asarray(series, dtype=np.float64)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    L = series.shape[1]
    if L < T:
        raise InputTooShortError(f"series length {L} is shorter than window length {T}")
    starts = range(0, L - T + 1, stride)
    return np.stack([series[:, s:s + T] for s in starts])


def split_windows(windows: np.ndarray, val_fraction: float):
    """Temporal hold-out: the last ``val_fraction`` of windows validate."""
    n = len(windows)
    if n < 2:
        raise ValueError("need at least 2 windows to split into train and validation")
    n_val = min(max(1, int(round(n * val_fraction))), n - 1)
    return windows[: n - n_val], windows[n - n_val:]


def train(windows: np.ndarray, cfg: ModelConfig, tcfg: TrainConfig, params=None,
          callback=None) -> tuple[dict[str, np.ndarray], TrainReport]:
    """Fit the model; returns the best-validation parameters and a report."""
    errs = cfg.problems() + tcfg.problems()
    if errs:
        raise ValueError("; ".join(errs))
    windows = np.asarray(windows, dtype=np.float64)
    train_w, val_w = split_windows(windows, tcfg.val_fraction)
    rng = np.random.default_rng(tcfg.seed)
    params = init_params(cfg, rng) if params is None else {k: v.copy() for k, v in params.items()}
    state = AdamState(lr=tcfg.lr)
    report = TrainReport()
    best, ref, best_params, since_ref = math.inf, math.inf, params, 0
    bs = tcfg.batch_size or len(train_w)
    t0 = time.perf_counter()

    for epoch in range(1, tcfg.max_epochs + 1):
        order = rng.permutation(len(train_w)) if tcfg.shuffle and bs < len(train_w) else np.arange(len(train_w))
        total = 0.0
        for start in range(0, len(train_w), bs):
            batch = train_w[order[start:start + bs]]
            value, grads = loss_and_grads(batch, params, cfg)
            if not math.isfinite(value):
                raise DivergenceError(epoch, value)
            total += value * len(batch)
            params, state = adam_step(params, grads, state)
        train_loss = total / len(train_w)
        val_loss = loss(forward(val_w, params, cfg).X_pred, val_w, params, cfg)
        if not math.isfinite(val_loss):
            raise DivergenceError(epoch, val_loss)
        report.train_loss.append(train_loss)
        report.val_loss.append(val_loss)
        report.stop_epoch = epoch
        if callback is not None:
            callback(epoch, train_loss, val_loss)
        if val_loss < best:
            best, best_params = val_loss, params
            report.best_epoch = epoch
        if val_loss < ref - tcfg.min_delta:
            ref, since_ref = val_loss, 0
        else:
            since_ref += 1
            if since_ref >= tcfg.patience:
                log.debug("early stop at epoch %d (best %d)", epoch, report.best_epoch)
                break
    report.seconds = time.perf_counter() - t0
    return best_params, report
