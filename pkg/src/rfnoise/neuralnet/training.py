"""Mini-batch training, single-window inference and sequence prediction."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError, DivergenceError, PipelineError
from ..pipeline import window_matrix
from ..siggen import Waveform
from .artifact import ModelArtifact
from .layers import mse, mse_grad
from .network import Network
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    epochs: int = 100
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("train.batch_size must be >= 2 (batch norm needs batch statistics)")
        if self.epochs < 1:
            raise ConfigError("train.epochs must be >= 1")
        if not self.lr > 0:
            raise ConfigError("train.lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("train.beta1 and train.beta2 must lie in [0, 1)")
        if self.eps < 0:
            raise ConfigError("train.eps must be non-negative")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("train.dtype must be float32 or float64")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown train field(s): {', '.join(sorted(unknown))}")
        return cls(**d)


def evaluate_mse(network, dataset, chunk=2048):
    return mse(network.predict(dataset.windows, chunk), dataset.targets)


def train(arch, train_set, val_set, cfg, norm_stats=None, on_epoch=None):
    """Train from scratch; return the parameters of the best-validation epoch."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise PipelineError("training and validation sets must be non-empty")
    for ds in (train_set, val_set):
        if ds.window != arch.input_width:
            raise PipelineError(f"dataset window {ds.window} does not match arch input {arch.input_width}")
    rng = np.random.default_rng(cfg.seed)
    net = Network(arch, dtype=np.dtype(cfg.dtype))
    net.init_params(rng)
    state = AdamState.zeros_like(net.params)
    X = train_set.windows.astype(net.dtype, copy=False)
    Y = train_set.targets.astype(net.dtype, copy=False)
    n = len(train_set)
    history, best, best_epoch = [], None, None
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if idx.size < 2:
                continue
            xb, yb = X[idx], Y[idx][:, None]
            pred = net.forward(xb, train=True)
            loss = float(np.mean((pred - yb) ** 2))
            if not np.isfinite(loss):
                raise DivergenceError("non-finite training loss", epoch)
            net.backward(mse_grad(pred, yb))
            try:
                adam_step(net.params, net.grads, state, cfg)
            except DivergenceError as exc:
                raise DivergenceError(str(exc), epoch) from None
            total += loss * idx.size
            seen += idx.size
        val = evaluate_mse(net, val_set)
        if not np.isfinite(val):
            raise DivergenceError("non-finite validation loss", epoch)
        row = dict(epoch=epoch, train_mse=total / seen, val_mse=val)
        history.append(row)
        log.info("epoch %d train_mse=%.3e val_mse=%.3e", epoch, row["train_mse"], val)
        if on_epoch is not None:
            on_epoch(row)
        if best is None or val < history[best_epoch - 1]["val_mse"]:
            best, best_epoch = net.state(), epoch
    net.load_state(best)
    return ModelArtifact(arch, net, norm_stats, history, best_epoch)


def forward(model, window, mode="eval"):
    """Scalar prediction for one normalised input window."""
    window = np.asarray(window, dtype=np.float64).reshape(-1)
    if window.size != model.arch.input_width:
        raise ValueError(f"expected a window of {model.arch.input_width} samples, got {window.size}")
    if mode != "eval":
        raise ValueError("single-window forward is only defined in eval mode")
    return float(model.network.forward(window[None, :], train=False)[0, 0])


def predict_sequence(model, stimulus, n=5000, start=None):
    """Predict ``n`` consecutive response samples from the measured stimulus.

    Output ``i`` uses the stimulus window ending at ``start + i``; windows
    always slide over the stimulus, never over earlier predictions. The
    result is de-normalised with the model's stored statistics.
    """
    w = model.arch.input_width
    if start is None:
        start = w - 1
    if start < w - 1:
        raise PipelineError(f"start must be >= window - 1 = {w - 1}")
    if start + n > len(stimulus):
        raise PipelineError(
            f"stimulus of length {len(stimulus)} cannot supply {n} windows from index {start}"
        )
    if model.norm_stats is None:
        raise PipelineError("model has no normalisation statistics")
    x = model.norm_stats.apply_input(stimulus.samples[start - w + 1:start + n])
    windows = window_matrix(x, np.arange(w - 1, w - 1 + n), w)
    y = model.network.predict(windows)
    return Waveform(model.norm_stats.invert_output(y), stimulus.sample_rate_hz)
