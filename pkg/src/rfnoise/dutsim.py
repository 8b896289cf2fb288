"""Synthetic amplifier: FIR pre-filter, odd cubic nonlinearity, delay, noise.

The device is a Wiener model::

    u = h * x                          (FIR, zero initial state)
    y = s * (a1 * u + a3 * u**3)       (s = -1 for an inverting device)
    out[n] = y[n - delay] + noise[n]   (zeros before the delayed signal)

Because the nonlinearity is memoryless and sits after the filter, both the
small-signal gain and the two-tone intercept have closed forms.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError
from .siggen import DEFAULT_Z_OHM, Waveform, amplitude_to_dbm

# One-pole-like FIR: taps r**k normalised to unit DC gain.
_PW210_POLE = 0.2
_PW210_TAPS = 5


def one_pole_fir(pole, n_taps):
    h = pole ** np.arange(n_taps, dtype=np.float64)
    return tuple(float(v) for v in h / h.sum())


@dataclass(frozen=True)
class DutSpec:
    a1: float
    a3: float = 0.0
    pre_filter: tuple = (1.0,)
    delay_samples: int = 0
    noise_sigma_v: float = 0.0
    inverting: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pre_filter", tuple(float(v) for v in self.pre_filter))
        if self.a1 == 0:
            raise ConfigError("dut.a1 must be non-zero")
        if not self.pre_filter or not any(self.pre_filter):
            raise ConfigError("dut.pre_filter needs at least one non-zero coefficient")
        if int(self.delay_samples) != self.delay_samples or self.delay_samples < 0:
            raise ConfigError(f"dut.delay_samples must be a non-negative integer, got {self.delay_samples}")
        if self.noise_sigma_v < 0:
            raise ConfigError("dut.noise_sigma_v must be non-negative")
        object.__setattr__(self, "delay_samples", int(self.delay_samples))

    @classmethod
    def pw210_like(cls, **overrides):
        """Default preset: ~20 dB gain, OIP3 of 30 dBm into 50 ohm, ~3 dB FIR rolloff."""
        a1 = 10.0
        # intercept amplitude a1*sqrt(4 a1 / (3 |a3|)) = 10 V  <=>  30 dBm
        a3 = -4.0 * a1 ** 3 / (3.0 * 10.0 ** 2)
        params = dict(
            a1=a1,
            a3=a3,
            pre_filter=one_pole_fir(_PW210_POLE, _PW210_TAPS),
            delay_samples=23,
            noise_sigma_v=1e-3,
            inverting=False,
        )
        params.update(overrides)
        return cls(**params)

    def to_dict(self):
        d = asdict(self)
        d["pre_filter"] = list(self.pre_filter)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown dut field(s): {', '.join(sorted(unknown))}")
        return cls(**d)


def filter_response(dut, f_hz, sample_rate_hz):
    """Complex FIR response ``H(exp(j 2 pi f / fs))``."""
    h = np.asarray(dut.pre_filter)
    w = 2 * np.pi * f_hz / sample_rate_hz
    return complex(np.sum(h * np.exp(-1j * w * np.arange(h.size))))


def memoryless(dut, u):
    y = dut.a1 * u + dut.a3 * u ** 3
    return -y if dut.inverting else y


def simulate(dut, stimulus, seed=0):
    """Drive the device with ``stimulus``; output has the same length and rate."""
    x = stimulus.samples
    n = x.size
    u = np.convolve(x, np.asarray(dut.pre_filter))[:n]
    y = memoryless(dut, u)
    out = np.zeros(n)
    d = dut.delay_samples
    if d < n:
        out[d:] = y[: n - d]
    if dut.noise_sigma_v > 0:
        out += np.random.default_rng(seed).normal(0.0, dut.noise_sigma_v, n)
    return Waveform(out, stimulus.sample_rate_hz)


def analytic_small_signal_gain_db(dut, f_hz, sample_rate_hz):
    """Linear gain ``20 log10(|a1| |H(f)|)`` in dB."""
    if not 0 <= f_hz < sample_rate_hz / 2:
        raise ValueError(f"frequency {f_hz} Hz outside [0, fs/2)")
    return 20.0 * math.log10(abs(dut.a1) * abs(filter_response(dut, f_hz, sample_rate_hz)))


def analytic_oip3_dbm(dut, f_hz, z_ohm=DEFAULT_Z_OHM, *, f2_hz=None, sample_rate_hz=1.0):
    """Output third-order intercept for tones at ``f_hz`` (and ``f2_hz``).

    With tones of input amplitude A the filtered amplitudes are
    ``B1 = |H(f1)| A`` and ``B2 = |H(f2)| A``. The linear output at f1 is
    ``|a1| B1`` and the lower product at 2 f1 - f2 is ``3/4 |a3| B1**2 B2``.
    Extending both lines (slope 1 and slope 3 in dB) to their crossing
    gives an output amplitude

        sqrt(4 |a1|**3 / (3 |a3|)) * sqrt(|H(f1)| / |H(f2)|)

    which is independent of the filter when the two tones see the same
    gain. Returns ``math.inf`` when ``a3 == 0``.
    """
    if dut.a3 == 0:
        return math.inf
    ratio = 1.0
    if f2_hz is not None:
        h1 = abs(filter_response(dut, f_hz, sample_rate_hz))
        h2 = abs(filter_response(dut, f2_hz, sample_rate_hz))
        ratio = h1 / h2
    a_out = math.sqrt(4.0 * abs(dut.a1) ** 3 / (3.0 * abs(dut.a3)) * ratio)
    return amplitude_to_dbm(a_out, z_ohm)
