"""Stimulus generation and amplitude/dBm conversion.

All random draws use numpy's PCG64 bit generator (``np.random.default_rng``),
so a given ``(seed, n)`` produces the same samples on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AliasingError,
    DegenerateToneError,
    DomainError,
    EmptyRequestError,
    SignalError,
    SpectralBoundsError,
)

DEFAULT_Z_OHM = 50.0


@dataclass(eq=False)
class Waveform:
    """Uniformly sampled real signal."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise EmptyRequestError("waveform needs a non-empty 1-D sample array")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform samples must be finite")
        self.sample_rate_hz = float(self.sample_rate_hz)

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz

    def segment(self, start, n):
        if start < 0 or start + n > len(self):
            raise IndexError(f"segment [{start}, {start + n}) outside waveform of length {len(self)}")
        return Waveform(self.samples[start:start + n].copy(), self.sample_rate_hz)


@dataclass(frozen=True)
class BandSpec:
    f_start_hz: float
    f_end_hz: float

    def __post_init__(self):
        if self.f_start_hz < 0 or not self.f_end_hz > self.f_start_hz:
            raise SpectralBoundsError(
                f"band needs 0 <= f_start < f_end, got [{self.f_start_hz}, {self.f_end_hz}]"
            )


@dataclass(frozen=True)
class ToneSpec:
    f_hz: float
    amplitude_v: float
    delta_f_hz: float = 0.0

    def __post_init__(self):
        if not self.f_hz > 0:
            raise SignalError("tone frequency must be positive")
        if self.amplitude_v < 0:
            raise DomainError("tone amplitude must be non-negative")


def _check_count(n, minimum=1):
    if n < minimum:
        raise EmptyRequestError(f"need at least {minimum} samples, got {n}")


def gen_uniform_noise(n, amplitude_v, sample_rate_hz, seed):
    """I.i.d. samples drawn uniformly from ``[-amplitude_v, amplitude_v]``."""
    _check_count(n)
    if amplitude_v < 0:
        raise DomainError("noise amplitude must be non-negative")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n) * amplitude_v
    return Waveform(x, sample_rate_hz)


def band_bins(band, n, sample_rate_hz):
    """Inclusive rFFT bin range ``(k_start, k_end)`` covered by ``band``."""
    nyquist = sample_rate_hz / 2
    if band.f_end_hz > nyquist:
        raise SpectralBoundsError(f"band end {band.f_end_hz} Hz exceeds Nyquist {nyquist} Hz")
    k0 = int(round(band.f_start_hz * n / sample_rate_hz))
    k1 = int(round(band.f_end_hz * n / sample_rate_hz))
    if k1 < k0:
        raise SpectralBoundsError("band collapses below one bin at this length")
    return k0, k1


def gen_narrowband_noise(n, band, amplitude_v, sample_rate_hz, seed):
    """Band-limited noise by inverse FFT of a randomly filled spectral band.

    Bins inside ``band`` (both edges inclusive) get real and imaginary parts
    drawn from Uniform(-1, 1); every other bin is exactly zero. The real
    time signal is then mapped affinely so its minimum is ``-A`` and its
    maximum ``+A``. That affine map adds a DC offset whenever the raw
    extremes are asymmetric, so bin 0 is the one out-of-band bin that can
    be non-zero.
    """
    _check_count(n, 2)
    if amplitude_v < 0:
        raise DomainError("noise amplitude must be non-negative")
    k0, k1 = band_bins(band, n, sample_rate_hz)
    rng = np.random.default_rng(seed)
    width = k1 - k0 + 1
    spec = np.zeros(n // 2 + 1, dtype=np.complex128)
    spec[k0:k1 + 1] = rng.uniform(-1.0, 1.0, width) + 1j * rng.uniform(-1.0, 1.0, width)
    # DC and Nyquist bins of a real signal carry no imaginary part
    spec[0] = spec[0].real
    if n % 2 == 0:
        spec[-1] = spec[-1].real
    x = np.fft.irfft(spec, n)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return Waveform(np.zeros(n), sample_rate_hz)
    scaled = amplitude_v * ((x - lo) / (hi - lo) * 2.0 - 1.0)
    return Waveform(scaled, sample_rate_hz)


def gen_sine(n, tone, sample_rate_hz):
    """``A * sin(2 pi (f + df) k / fs)`` for ``k = 0 .. n-1``."""
    _check_count(n)
    f = tone.f_hz + tone.delta_f_hz
    if not 0 < f < sample_rate_hz / 2:
        raise AliasingError(f"tone at {f} Hz is not below Nyquist ({sample_rate_hz / 2} Hz)")
    k = np.arange(n, dtype=np.float64)
    return Waveform(tone.amplitude_v * np.sin(2 * np.pi * f * k / sample_rate_hz), sample_rate_hz)


def gen_dual_tone(n, f1_hz, f2_hz, amplitude_v, sample_rate_hz):
    """Sum of two equal-amplitude sines."""
    if f1_hz == f2_hz:
        raise DegenerateToneError(f"dual tone needs distinct frequencies, both are {f1_hz} Hz")
    a = gen_sine(n, ToneSpec(f1_hz, amplitude_v), sample_rate_hz).samples
    b = gen_sine(n, ToneSpec(f2_hz, amplitude_v), sample_rate_hz).samples
    return Waveform(a + b, sample_rate_hz)


def amplitude_to_dbm(a_v, z_ohm=DEFAULT_Z_OHM):
    """Power of a sine with peak amplitude ``a_v`` into ``z_ohm``, in dBm.

    Uses ``P = A**2 / (2 Z)``, so a 2 Vpp sine into 50 ohm is 10 dBm.
    """
    if z_ohm <= 0:
        raise DomainError(f"impedance must be positive, got {z_ohm}")
    if not a_v > 0:
        raise DomainError(f"amplitude must be positive for a log power, got {a_v}")
    return 10.0 * math.log10(a_v * a_v / (2.0 * z_ohm * 1e-3))


def dbm_to_amplitude(p_dbm, z_ohm=DEFAULT_Z_OHM):
    """Inverse of :func:`amplitude_to_dbm`."""
    if z_ohm <= 0:
        raise DomainError(f"impedance must be positive, got {z_ohm}")
    return math.sqrt(2.0 * z_ohm * 1e-3 * 10.0 ** (p_dbm / 10.0))


def vpp_to_amplitude(vpp):
    return vpp / 2.0
