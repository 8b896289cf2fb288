"""Capture preprocessing: delay compensation, min-max normalisation, windowing.

Window convention: the input for prediction index ``n`` is the normalised
stimulus ``x[n - window + 1 .. n]`` *including* the current sample, and the
target is the normalised aligned response ``y[n]``. A physical amplifier's
output depends on its present input, so the present sample belongs in the
window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PipelineError
from .kernels import xcorr_lags
from .siggen import Waveform
from .testbench import CapturePair

DEFAULT_MAX_LAG = 512
DEFAULT_WINDOW = 1024
DEFAULT_COUNT = 2048


@dataclass(frozen=True)
class DelayEstimate:
    lag: int
    sign: int
    peak: float


def estimate_delay(x, y, max_lag=DEFAULT_MAX_LAG):
    """Lag maximising ``|sum_n x[n] y[n + lag]|`` over ``[-max_lag, max_lag]``.

    ``sign`` is -1 when the extreme correlation is negative (inverting
    device). Exact ties go to the smallest ``|lag|``, then the positive one.
    """
    xs = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    ys = y.samples if isinstance(y, Waveform) else np.asarray(y, dtype=np.float64)
    if xs.size != ys.size:
        raise PipelineError(f"estimate_delay needs equal lengths, got {xs.size} and {ys.size}")
    if xs.size < 2 * max_lag:
        raise PipelineError(f"signals of length {xs.size} are too short for max_lag={max_lag}")
    if not xs.any() or not ys.any():
        raise PipelineError("cross-correlation is undefined for an all-zero signal")
    r = xcorr_lags(np.ascontiguousarray(xs), np.ascontiguousarray(ys), int(max_lag))
    mag = np.abs(r)
    best = mag.max()
    lags = np.arange(-max_lag, max_lag + 1)
    ties = lags[mag == best]
    lag = int(min(ties, key=lambda v: (abs(v), -v)))
    peak = float(r[lag + max_lag])
    return DelayEstimate(lag, 1 if peak >= 0 else -1, peak)


def align(pair, lag):
    """Shift the response back by ``lag`` and crop both channels to the overlap."""
    n = len(pair)
    if abs(lag) >= n:
        raise PipelineError(f"lag {lag} leaves no overlap in a capture of length {n}")
    x, y = pair.stimulus.samples, pair.response.samples
    if lag >= 0:
        xs, ys = x[: n - lag], y[lag:]
    else:
        xs, ys = x[-lag:], y[: n + lag]
    fs = pair.sample_rate_hz
    return CapturePair(Waveform(xs.copy(), fs), Waveform(ys.copy(), fs), pair.meta)


def consensus_lag(pairs, max_lag=DEFAULT_MAX_LAG):
    """Median of per-capture lag estimates (rounded toward the lower middle)."""
    lags = sorted(estimate_delay(p.stimulus, p.response, max_lag).lag for p in pairs)
    if not lags:
        raise PipelineError("no captures to estimate a delay from")
    return lags[(len(lags) - 1) // 2]


@dataclass(frozen=True)
class NormStats:
    in_min: float
    in_max: float
    out_min: float
    out_max: float

    def __post_init__(self):
        if not self.in_max > self.in_min:
            raise PipelineError("input channel is constant; min-max range is degenerate")
        if not self.out_max > self.out_min:
            raise PipelineError("output channel is constant; min-max range is degenerate")

    def apply_input(self, x):
        return (np.asarray(x, dtype=np.float64) - self.in_min) / (self.in_max - self.in_min)

    def apply_output(self, y):
        return (np.asarray(y, dtype=np.float64) - self.out_min) / (self.out_max - self.out_min)

    def invert_input(self, v):
        return np.asarray(v, dtype=np.float64) * (self.in_max - self.in_min) + self.in_min

    def invert_output(self, v):
        return np.asarray(v, dtype=np.float64) * (self.out_max - self.out_min) + self.out_min

    def to_dict(self):
        return dict(in_min=self.in_min, in_max=self.in_max, out_min=self.out_min, out_max=self.out_max)


def fit_norm_stats(training_pairs):
    """Global per-channel min/max over every training capture.

    Test data is later mapped with these frozen statistics and is not
    clamped, so it may fall outside [0, 1].
    """
    pairs = list(training_pairs)
    if not pairs:
        raise PipelineError("fit_norm_stats needs at least one capture")
    return NormStats(
        in_min=float(min(p.stimulus.samples.min() for p in pairs)),
        in_max=float(max(p.stimulus.samples.max() for p in pairs)),
        out_min=float(min(p.response.samples.min() for p in pairs)),
        out_max=float(max(p.response.samples.max() for p in pairs)),
    )


@dataclass(eq=False)
class WindowedDataset:
    windows: np.ndarray   # (count, window)
    targets: np.ndarray   # (count,)
    source: list = field(default_factory=list)

    def __post_init__(self):
        self.windows = np.asarray(self.windows, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        if self.windows.ndim != 2 or self.windows.shape[0] != self.targets.shape[0]:
            raise PipelineError("windows and targets must have matching leading dimension")

    def __len__(self):
        return self.targets.shape[0]

    @property
    def window(self):
        return self.windows.shape[1]

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        if not parts:
            raise PipelineError("nothing to concatenate")
        return cls(
            np.concatenate([p.windows for p in parts]),
            np.concatenate([p.targets for p in parts]),
            [s for p in parts for s in p.source],
        )

    def to_array(self):
        """Row-major ``[window values..., target]`` per example."""
        return np.hstack([self.windows, self.targets[:, None]])

    def save(self, path):
        """``.npy`` (binary) or ``.csv``; one example per row, target last."""
        path = Path(path)
        arr = self.to_array()
        if path.suffix == ".csv":
            np.savetxt(path, arr, delimiter=",", fmt="%.17g")
        else:
            with open(path, "wb") as fh:
                np.save(fh, arr, allow_pickle=False)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if path.suffix == ".csv":
            arr = np.loadtxt(path, delimiter=",", ndmin=2)
        else:
            arr = np.load(path, allow_pickle=False)
        return cls(arr[:, :-1], arr[:, -1])


def window_matrix(x, indices, window):
    """Rows ``x[i - window + 1 .. i]`` for each ``i`` in ``indices``."""
    view = np.lib.stride_tricks.sliding_window_view(x, window)
    return view[np.asarray(indices) - window + 1]


def extract_windows(pair, stats, window=DEFAULT_WINDOW, count=DEFAULT_COUNT, seed=0):
    """Randomly pick ``count`` distinct target indices and cut their input windows."""
    n = len(pair)
    if n < window + 1:
        raise PipelineError(f"capture of length {n} is shorter than window + 1 = {window + 1}")
    usable = n - (window - 1)
    if count > usable:
        raise PipelineError(f"requested {count} windows but only {usable} target indices exist")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(usable, size=count, replace=False)) + (window - 1)
    x = stats.apply_input(pair.stimulus.samples)
    windows = window_matrix(x, idx, window).copy()
    targets = stats.apply_output(pair.response.samples[idx])
    src = [(pair.meta.capture_index, int(i)) for i in idx]
    return WindowedDataset(windows, targets, src)
