"""Frequency-domain metrology: spectra, tone power, gain and two-tone OIP3.

No window function is applied. Every measured tone must sit exactly on an
FFT bin (coherent sampling); the sweep planners in :mod:`rfnoise.testbench`
snap requested frequencies to the grid. Single-sided amplitudes use
``2 |X[k]| / N`` and DC / Nyquist bins are never considered tones.

The same functions process measured and model-predicted responses; curve
builders only differ in where the output waveform comes from.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dutsim
from .errors import IncoherentToneError, MetrologyError, UnreliableIM3Error
from .siggen import DEFAULT_Z_OHM, ToneSpec, Waveform, amplitude_to_dbm, dbm_to_amplitude, gen_dual_tone, gen_sine

COHERENCE_TOL_BINS = 1e-6
IM3_FLOOR_RATIO = 10.0

CURVE_KINDS = ("gain_vs_freq", "gain_vs_power", "oip3_vs_freq")


@dataclass(eq=False)
class Spectrum:
    bin_freqs_hz: np.ndarray
    complex_bins: np.ndarray
    n_fft: int
    sample_rate_hz: float

    @property
    def n_positive(self):
        """Number of bins strictly between DC and Nyquist, plus one (exclusive upper index)."""
        return (self.n_fft + 1) // 2

    def amplitudes(self):
        """Single-sided amplitudes for bins ``0 .. n_positive - 1``; DC entry is ``|X[0]| / N``."""
        a = 2.0 * np.abs(self.complex_bins[: self.n_positive]) / self.n_fft
        a[0] /= 2.0
        return a

    def bin_of(self, f_hz):
        k = f_hz * self.n_fft / self.sample_rate_hz
        kr = int(round(k))
        if abs(k - kr) > COHERENCE_TOL_BINS:
            raise IncoherentToneError(
                f"{f_hz} Hz is {k:.6f} bins; tones must sit on the {self.n_fft}-point grid"
            )
        if not 0 < kr < self.n_positive:
            raise IncoherentToneError(f"{f_hz} Hz is not strictly between DC and Nyquist")
        return kr


def spectrum(w, n_fft=None):
    """Unwindowed DFT of the first ``n_fft`` samples of ``w``."""
    if n_fft is None:
        n_fft = len(w)
    if n_fft < 1 or n_fft > len(w):
        raise MetrologyError(f"n_fft={n_fft} needs 1 <= n_fft <= waveform length {len(w)}")
    bins = np.fft.fft(w.samples[:n_fft])
    freqs = np.fft.fftfreq(n_fft, d=1.0 / w.sample_rate_hz)
    return Spectrum(freqs, bins, n_fft, w.sample_rate_hz)


@dataclass(frozen=True)
class PeakTone:
    f_max_hz: float
    amplitude_v: float
    bin: int


def peak_tone(s):
    """Largest single-sided tone, DC and Nyquist excluded; ties go to the lower bin."""
    amps = s.amplitudes()
    if amps.size < 2:
        raise MetrologyError("spectrum has no bins between DC and Nyquist")
    k = int(np.argmax(amps[1:])) + 1
    if amps[k] == 0:
        raise MetrologyError("all-zero spectrum has no peak tone")
    return PeakTone(k * s.sample_rate_hz / s.n_fft, float(amps[k]), k)


def tone_amplitude(s, f_hz):
    k = s.bin_of(f_hz)
    return 2.0 * abs(s.complex_bins[k]) / s.n_fft


def tone_power_dbm(s, f_hz, z_ohm=DEFAULT_Z_OHM):
    return amplitude_to_dbm(tone_amplitude(s, f_hz), z_ohm)


def freq_resolution(fs, n):
    """FFT bin spacing ``fs / n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return fs / n


@dataclass(frozen=True)
class GainPoint:
    f_hz: float
    gain_db: float
    p_in_dbm: float
    p_out_dbm: float


def gain_db(input_wf, output_wf, n_fft=None, z_ohm=DEFAULT_Z_OHM):
    """Output minus input power at the input's dominant tone."""
    if input_wf.sample_rate_hz != output_wf.sample_rate_hz:
        raise MetrologyError("input and output sample rates differ")
    s_in = spectrum(input_wf, n_fft)
    s_out = spectrum(output_wf, s_in.n_fft)
    f = peak_tone(s_in).f_max_hz
    p_in = tone_power_dbm(s_in, f, z_ohm)
    p_out = tone_power_dbm(s_out, f, z_ohm)
    return GainPoint(f, p_out - p_in, p_in, p_out)


def noise_floor_amplitude(s, exclude_bins=()):
    """Median single-sided amplitude over non-DC positive bins, skipping ``exclude_bins``."""
    amps = s.amplitudes()[1:]
    mask = np.ones(amps.size, dtype=bool)
    for k in exclude_bins:
        if 0 < k < s.n_positive:
            mask[k - 1] = False
    return float(np.median(amps[mask]))


@dataclass(frozen=True)
class Oip3Result:
    oip3_dbm: float
    p_out1_dbm: float
    p_out3_dbm: float
    oip3_upper_dbm: float
    p_out3_upper_dbm: float


def oip3_from_powers(p_out1_dbm, p_out3_dbm):
    return (3.0 * p_out1_dbm - p_out3_dbm) / 2.0


def oip3_dbm(input_wf, output_wf, f1_hz, f2_hz, n_fft=None, z_ohm=DEFAULT_Z_OHM,
             floor_ratio=IM3_FLOOR_RATIO):
    """Two-tone output intercept from the f1 fundamental and the 2 f1 - f2 product.

    The upper product (2 f2 - f1 against f2) is reported alongside. Raises
    :class:`UnreliableIM3Error` when the lower product is not at least
    ``floor_ratio`` times the median spectral floor.
    """
    if f1_hz == f2_hz:
        raise MetrologyError("two-tone test needs distinct tones")
    s = spectrum(output_wf, n_fft)
    k1, k2 = s.bin_of(f1_hz), s.bin_of(f2_hz)
    f_lo, f_hi = 2 * f1_hz - f2_hz, 2 * f2_hz - f1_hz
    k3, k4 = s.bin_of(f_lo), s.bin_of(f_hi)
    if len({k1, k2, k3, k4}) < 4:
        raise MetrologyError("frequency resolution too coarse to separate tones and products")
    floor = noise_floor_amplitude(s, (k1, k2, k3, k4))
    a3 = tone_amplitude(s, f_lo)
    if not a3 > floor_ratio * floor or a3 == 0:
        raise UnreliableIM3Error(
            f"IM3 amplitude {a3:.3e} V at {f_lo} Hz is within {floor_ratio}x of the floor {floor:.3e} V"
        )
    p1, p2 = tone_power_dbm(s, f1_hz, z_ohm), tone_power_dbm(s, f2_hz, z_ohm)
    p3 = tone_power_dbm(s, f_lo, z_ohm)
    a4 = tone_amplitude(s, f_hi)
    p4 = amplitude_to_dbm(a4, z_ohm) if a4 > 0 else -math.inf
    return Oip3Result(oip3_from_powers(p1, p3), p1, p3, oip3_from_powers(p2, p4), p4)


# ----------------------------------------------------------------------- curves


@dataclass(eq=False)
class MetricCurve:
    kind: str
    x: list
    measured: list
    predicted: list
    analytic: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        n = len(self.x)
        if len(self.measured) != n or len(self.predicted) != n:
            raise ValueError("curve series lengths differ")
        if not self.analytic:
            self.analytic = [math.nan] * n
        if not self.flags:
            self.flags = [""] * n
        if any(b <= a for a, b in zip(self.x, self.x[1:])):
            raise ValueError("curve x values must be strictly increasing")

    def __len__(self):
        return len(self.x)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "measured", "predicted", "analytic", "flag"])
            for row in zip(self.x, self.measured, self.predicted, self.analytic, self.flags):
                w.writerow(["%.17g" % v for v in row[:4]] + [row[4]])

    @classmethod
    def from_csv(cls, path, kind):
        x, m, p, a, fl = [], [], [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                x.append(float(row["x"]))
                m.append(float(row["measured"]))
                p.append(float(row["predicted"]))
                a.append(float(row.get("analytic", "nan") or "nan"))
                fl.append(row.get("flag", "") or "")
        return cls(kind, x, m, p, a, fl)

    def max_abs_error(self, against="measured", which="predicted"):
        ref = np.asarray(getattr(self, against), dtype=float)
        val = np.asarray(getattr(self, which), dtype=float)
        ok = np.isfinite(ref) & np.isfinite(val)
        return float(np.max(np.abs(ref[ok] - val[ok]))) if ok.any() else math.nan


def dut_predictor(dut, seed=0):
    """Use the device itself as the "model" (self-consistency checks)."""
    def predict(stimulus, start, n):
        return dutsim.simulate(dut, stimulus, seed).segment(start, n)
    return predict


def model_predictor(model):
    from .neuralnet import predict_sequence

    def predict(stimulus, start, n):
        return predict_sequence(model, stimulus, n, start)
    return predict


def measure_segment(stimulus, response, start, n):
    return stimulus.segment(start, n), response.segment(start, n)


def gain_point_pair(stimulus, response, predictor, start, n_fft, z_ohm):
    x_seg, y_seg = measure_segment(stimulus, response, start, n_fft)
    measured = gain_db(x_seg, y_seg, n_fft, z_ohm)
    predicted = gain_db(x_seg, predictor(stimulus, start, n_fft), n_fft, z_ohm)
    return measured, predicted


def oip3_point_pair(stimulus, response, predictor, f1, f2, start, n_fft, z_ohm):
    """(measured, predicted, flag) OIP3 values; unreliable IM3 becomes NaN + flag."""
    x_seg, y_seg = measure_segment(stimulus, response, start, n_fft)
    flags = []
    vals = []
    for label, out in (("measured", y_seg), ("predicted", predictor(stimulus, start, n_fft))):
        try:
            vals.append(oip3_dbm(x_seg, out, f1, f2, n_fft, z_ohm).oip3_dbm)
        except UnreliableIM3Error:
            vals.append(math.nan)
            flags.append(f"im3_below_floor:{label}")
    return vals[0], vals[1], ";".join(flags)


def gain_frequency_curve(predictor, dut, freqs, amplitude_v=0.1, sample_rate_hz=1.0, n_fft=4096,
                         start=1023, seed=0, z_ohm=DEFAULT_Z_OHM):
    """Gain vs frequency from freshly simulated single tones; ``freqs`` must be coherent."""
    n = start + n_fft
    stims = [gen_sine(n, ToneSpec(f, amplitude_v), sample_rate_hz) for f in freqs]
    pairs = [(s, dutsim.simulate(dut, s, seed + i)) for i, s in enumerate(stims)]
    return gain_frequency_from_captures(pairs, predictor, dut, n_fft, start, z_ohm)


def gain_frequency_from_captures(pairs, predictor, dut, n_fft=4096, start=1023, z_ohm=DEFAULT_Z_OHM):
    """Gain vs frequency over ``(stimulus, response)`` single-tone captures.

    The x value of each point is the frequency of the strongest input bin.
    """
    xs, meas, pred, ana = [], [], [], []
    for stim, resp in pairs:
        m, p = gain_point_pair(stim, resp, predictor, start, n_fft, z_ohm)
        xs.append(m.f_hz)
        meas.append(m.gain_db)
        pred.append(p.gain_db)
        ana.append(dutsim.analytic_small_signal_gain_db(dut, m.f_hz, stim.sample_rate_hz))
    order = np.argsort(xs, kind="stable")
    return MetricCurve("gain_vs_freq", *([v[k] for k in order] for v in (xs, meas, pred, ana)))


def gain_power_curve(predictor, dut, f_hz, powers_dbm, sample_rate_hz=1.0, n_fft=4096,
                     start=1023, seed=0, z_ohm=DEFAULT_Z_OHM):
    """Gain vs input power at a fixed coherent frequency."""
    n = start + n_fft
    pairs = []
    for i, p_dbm in enumerate(powers_dbm):
        stim = gen_sine(n, ToneSpec(f_hz, dbm_to_amplitude(p_dbm, z_ohm)), sample_rate_hz)
        pairs.append((stim, dutsim.simulate(dut, stim, seed + i)))
    return gain_power_from_captures(pairs, powers_dbm, predictor, dut, n_fft, start, z_ohm)


def gain_power_from_captures(pairs, powers_dbm, predictor, dut, n_fft=4096, start=1023,
                             z_ohm=DEFAULT_Z_OHM):
    """Gain vs nominal input power over same-frequency tone captures."""
    meas, pred, ana = [], [], []
    for stim, resp in pairs:
        m, p = gain_point_pair(stim, resp, predictor, start, n_fft, z_ohm)
        meas.append(m.gain_db)
        pred.append(p.gain_db)
        ana.append(dutsim.analytic_small_signal_gain_db(dut, m.f_hz, stim.sample_rate_hz))
    return MetricCurve("gain_vs_power", list(powers_dbm), meas, pred, ana)


def oip3_frequency_curve(predictor, dut, tone_pairs, amplitude_v=0.1, sample_rate_hz=1.0, n_fft=4096,
                         start=1023, seed=0, z_ohm=DEFAULT_Z_OHM):
    """OIP3 vs centre frequency from freshly simulated equal-amplitude tone pairs."""
    n = start + n_fft
    caps = []
    for i, (f1, f2) in enumerate(tone_pairs):
        stim = gen_dual_tone(n, f1, f2, amplitude_v, sample_rate_hz)
        caps.append((stim, dutsim.simulate(dut, stim, seed + i)))
    return oip3_from_captures(caps, tone_pairs, predictor, dut, n_fft, start, z_ohm)


def oip3_from_captures(pairs, tone_pairs, predictor, dut, n_fft=4096, start=1023, z_ohm=DEFAULT_Z_OHM):
    """OIP3 vs centre frequency over dual-tone captures with known ``(f1, f2)``."""
    xs, meas, pred, ana, flags = [], [], [], [], []
    for (stim, resp), (f1, f2) in zip(pairs, tone_pairs, strict=True):
        m, p, flag = oip3_point_pair(stim, resp, predictor, f1, f2, start, n_fft, z_ohm)
        xs.append((f1 + f2) / 2)
        meas.append(m)
        pred.append(p)
        flags.append(flag)
        ana.append(dutsim.analytic_oip3_dbm(dut, f1, z_ohm, f2_hz=f2,
                                            sample_rate_hz=stim.sample_rate_hz))
    order = np.argsort(xs, kind="stable")
    return MetricCurve("oip3_vs_freq", *([v[k] for k in order] for v in (xs, meas, pred, ana, flags)))


def write_curve(curve, path):
    curve.to_csv(Path(path))
