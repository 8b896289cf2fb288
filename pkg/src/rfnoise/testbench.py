"""Simulated acquisition rig: capture pairs, oscilloscope-style CSV, dataset suites.

Capture CSV layout (one file per acquisition)::

    # rfnoise-capture v1
    # sample_rate_hz=1
    # waveform_kind=uniform_noise
    # amplitude_v=0.6
    # descriptor=full
    # seed=123
    # capture_index=0
    time_s,ch1_v,ch2_v
    0,0.1234...,1.234...
    ...

``ch1`` is the stimulus and ``ch2`` the device response. Values are written
with 17 significant digits, which round-trips IEEE doubles exactly. The
``#`` lines are optional on read; without them the sample rate is inferred
from the time column.

The manifest is JSON Lines, one object per capture with keys
``index, kind, amplitude_v, descriptor, seed, path``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import dutsim
from .errors import CaptureFormatError, ConfigError, SignalError
from .siggen import (
    BandSpec,
    ToneSpec,
    Waveform,
    dbm_to_amplitude,
    gen_dual_tone,
    gen_narrowband_noise,
    gen_sine,
    gen_uniform_noise,
)

CSV_MAGIC = "# rfnoise-capture v1"
CSV_COLUMNS = ("time_s", "ch1_v", "ch2_v")
MANIFEST_NAME = "manifest.jsonl"

KINDS = ("uniform_noise", "band_noise", "sine", "dual_tone", "amplitude_sweep")


@dataclass
class CaptureMeta:
    waveform_kind: str = "unknown"
    amplitude_v: float = 0.0
    descriptor: str = ""
    seed: int = 0
    capture_index: int = 0


@dataclass(eq=False)
class CapturePair:
    stimulus: Waveform
    response: Waveform
    meta: CaptureMeta = field(default_factory=CaptureMeta)

    def __post_init__(self):
        if len(self.stimulus) != len(self.response):
            raise ValueError(
                f"stimulus and response lengths differ ({len(self.stimulus)} vs {len(self.response)})"
            )
        if self.stimulus.sample_rate_hz != self.response.sample_rate_hz:
            raise ValueError("stimulus and response sample rates differ")

    def __len__(self):
        return len(self.stimulus)

    @property
    def sample_rate_hz(self):
        return self.stimulus.sample_rate_hz


def acquire(dut, stimulus, seed=0, meta=None):
    """Drive ``dut`` with ``stimulus`` and record both channels."""
    response = dutsim.simulate(dut, stimulus, seed)
    return CapturePair(stimulus, response, meta if meta is not None else CaptureMeta(seed=seed))


# --------------------------------------------------------------------------- CSV


def _fmt(v):
    return "%.17g" % v


def write_capture_csv(pair, path):
    path = Path(path)
    fs = pair.sample_rate_hz
    m = pair.meta
    header = [
        CSV_MAGIC,
        f"# sample_rate_hz={_fmt(fs)}",
        f"# waveform_kind={m.waveform_kind}",
        f"# amplitude_v={_fmt(m.amplitude_v)}",
        f"# descriptor={m.descriptor}",
        f"# seed={int(m.seed)}",
        f"# capture_index={int(m.capture_index)}",
        ",".join(CSV_COLUMNS),
    ]
    t = np.arange(len(pair), dtype=np.float64) / fs
    rows = "\n".join(
        f"{_fmt(a)},{_fmt(b)},{_fmt(c)}"
        for a, b, c in zip(t.tolist(), pair.stimulus.samples.tolist(), pair.response.samples.tolist())
    )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(header))
        fh.write("\n")
        fh.write(rows)
        fh.write("\n")


_META_CASTS = {
    "waveform_kind": str,
    "amplitude_v": float,
    "descriptor": str,
    "seed": int,
    "capture_index": int,
}


def read_capture_csv(path):
    path = Path(path)
    meta = CaptureMeta()
    fs = None
    t, ch1, ch2, linenos = [], [], [], []
    saw_columns = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if not saw_columns:
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" not in body:
                        continue
                    key, _, value = body.partition("=")
                    key = key.strip()
                    try:
                        if key == "sample_rate_hz":
                            fs = float(value)
                        elif key in _META_CASTS:
                            setattr(meta, key, _META_CASTS[key](value.strip()))
                    except ValueError:
                        raise CaptureFormatError(f"bad value for header key {key!r}", lineno, path) from None
                    continue
                cols = tuple(c.strip() for c in line.split(","))
                if cols != CSV_COLUMNS:
                    raise CaptureFormatError(
                        f"expected column header {','.join(CSV_COLUMNS)!r}, got {line!r}", lineno, path
                    )
                saw_columns = True
                continue
            cells = line.split(",")
            if len(cells) != 3:
                raise CaptureFormatError(f"expected 3 cells, found {len(cells)}", lineno, path)
            try:
                a, b, c = (float(v) for v in cells)
            except ValueError:
                raise CaptureFormatError(f"non-numeric cell in {line!r}", lineno, path) from None
            t.append(a)
            linenos.append(lineno)
            ch1.append(b)
            ch2.append(c)
    if not saw_columns:
        raise CaptureFormatError("missing column header line", None, path)
    if not t:
        raise CaptureFormatError("no sample rows", None, path)
    t = np.array(t)
    if fs is None:
        if t.size < 2:
            raise CaptureFormatError("cannot infer sample rate from a single row", None, path)
        steps = np.diff(t)
        dt = float(np.median(steps))
        if not dt > 0:
            raise CaptureFormatError("time column is not increasing", None, path)
        bad = np.flatnonzero(np.abs(steps - dt) > 1e-6 * dt)
        if bad.size:
            raise CaptureFormatError("non-uniform time step", linenos[bad[0] + 1], path)
        fs = (t.size - 1) / (t[-1] - t[0])
    return CapturePair(Waveform(np.array(ch1), fs), Waveform(np.array(ch2), fs), meta)


# ---------------------------------------------------------------- sweep planning


def snap_to_bin(f_hz, sample_rate_hz, n_fft):
    """Nearest frequency on the ``n_fft`` grid, kept strictly inside (0, fs/2)."""
    k = int(round(f_hz * n_fft / sample_rate_hz))
    k = min(max(k, 1), (n_fft - 1) // 2)
    return k * sample_rate_hz / n_fft


def plan_sine_sweep(f_lo_hz, f_hi_hz, n_points, sample_rate_hz, n_fft):
    """``n_points`` coherent frequencies linearly spaced over [f_lo, f_hi]."""
    freqs = [snap_to_bin(f, sample_rate_hz, n_fft) for f in np.linspace(f_lo_hz, f_hi_hz, n_points)]
    if len(set(freqs)) != len(freqs):
        raise SignalError("sine sweep is denser than the FFT grid; raise n_fft or narrow the sweep")
    return freqs


def plan_dual_tone_sweep(c_lo_hz, c_hi_hz, n_points, sample_rate_hz, n_fft, spacing_bins=2):
    """Tone pairs ``(f1, f2)`` centred on a linear sweep, ``spacing_bins`` apart.

    The spacing is an even number of bins (at least 2) so both tones and the
    third-order products at ``2 f1 - f2`` and ``2 f2 - f1`` fall on distinct
    bins inside (0, fs/2).
    """
    half = max(1, int(math.ceil(spacing_bins / 2)))
    lowest, highest = 3 * half + 1, (n_fft - 1) // 2 - 3 * half - 1
    if highest < lowest:
        raise SignalError("FFT too short for a dual-tone sweep")
    pairs = []
    for c in np.linspace(c_lo_hz, c_hi_hz, n_points):
        k = int(round(c * n_fft / sample_rate_hz))
        k = min(max(k, lowest), highest)
        pairs.append(((k - half) * sample_rate_hz / n_fft, (k + half) * sample_rate_hz / n_fft))
    return pairs


def plan_power_sweep(p_lo_dbm, p_hi_dbm, n_points):
    return [float(p) for p in np.linspace(p_lo_dbm, p_hi_dbm, n_points)]


# ------------------------------------------------------------------ dataset plan


@dataclass
class DatasetPlan:
    """Counts, amplitudes and frequencies for each capture group.

    Frequencies are in Hz at ``sample_rate_hz``. ``top_hz`` stands for the
    top of the device band; every sweep is laid out as a fraction of it.
    """

    sample_rate_hz: float = 1.0
    n_samples: int = 8192
    n_fft: int = 4096
    top_hz: float = 0.4
    train_count: int = 26
    train_amplitude_vpp: float = 1.2
    band_count: int = 6
    band_amplitude_vpp: float = 1.0
    sine_count: int = 10
    sine_amplitude_vpp: float = 0.2
    dual_count: int = 10
    dual_amplitude_vpp: float = 0.2
    dual_spacing_bins: int = 2
    sweep_count: int = 10
    sweep_freqs_frac: tuple = (0.3, 19.0 / 30.0)
    sweep_dbm: tuple = (-20.0, -5.0)

    def __post_init__(self):
        self.sweep_freqs_frac = tuple(self.sweep_freqs_frac)
        self.sweep_dbm = tuple(self.sweep_dbm)
        for name in ("train_count", "band_count", "sine_count", "dual_count", "sweep_count"):
            if getattr(self, name) < 1:
                raise ConfigError(f"plan.{name} must be >= 1")
        if not self.sample_rate_hz > 0:
            raise ConfigError("plan.sample_rate_hz must be positive")
        if not 0 < self.top_hz < self.sample_rate_hz / 2:
            raise ConfigError("plan.top_hz must lie inside (0, fs/2)")
        if self.n_fft > self.n_samples:
            raise ConfigError("plan.n_fft cannot exceed plan.n_samples")
        if self.dual_spacing_bins < 2:
            raise ConfigError("plan.dual_spacing_bins must be >= 2")

    @classmethod
    def full_scale(cls, **overrides):
        """Full-size composition: 300 / 30 / 100 / 100 / 2 x 100 captures of 50,000 samples."""
        params = dict(
            n_samples=50_000, n_fft=25_000, train_count=300, band_count=30,
            sine_count=100, dual_count=100, sweep_count=100,
        )
        params.update(overrides)
        return cls(**params)

    @classmethod
    def desk(cls, **overrides):
        return cls(**overrides)

    @property
    def total_captures(self):
        return (self.train_count + self.band_count + self.sine_count + self.dual_count
                + self.sweep_count * len(self.sweep_freqs_frac))

    def bands(self):
        """Contiguous, ordered slices of [0, top] (neighbours share an edge)."""
        edges = np.linspace(0.0, self.top_hz, self.band_count + 1)
        return [BandSpec(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]

    def sine_freqs(self):
        return plan_sine_sweep(self.top_hz / self.sine_count, self.top_hz, self.sine_count,
                               self.sample_rate_hz, self.n_fft)

    def dual_pairs(self):
        # centres from top/100 up to two thirds of the band
        return plan_dual_tone_sweep(self.top_hz / 100.0, self.top_hz * 2.0 / 3.0, self.dual_count,
                                    self.sample_rate_hz, self.n_fft, self.dual_spacing_bins)

    def sweep_freqs(self):
        return [snap_to_bin(frac * self.top_hz, self.sample_rate_hz, self.n_fft)
                for frac in self.sweep_freqs_frac]

    def sweep_powers(self):
        return plan_power_sweep(self.sweep_dbm[0], self.sweep_dbm[1], self.sweep_count)

    def to_dict(self):
        d = asdict(self)
        d["sweep_freqs_frac"] = list(self.sweep_freqs_frac)
        d["sweep_dbm"] = list(self.sweep_dbm)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown plan field(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class StimulusRequest:
    kind: str
    amplitude_v: float
    descriptor: str
    make: object  # callable(seed) -> Waveform


def plan_stimuli(plan):
    """Ordered stimulus requests; the list index is the capture index."""
    fs, n = plan.sample_rate_hz, plan.n_samples
    out = []
    a = plan.train_amplitude_vpp / 2
    for _ in range(plan.train_count):
        out.append(StimulusRequest("uniform_noise", a, "full",
                                   lambda s, a=a: gen_uniform_noise(n, a, fs, s)))
    a = plan.band_amplitude_vpp / 2
    for band in plan.bands():
        out.append(StimulusRequest(
            "band_noise", a, f"band={_fmt(band.f_start_hz)}:{_fmt(band.f_end_hz)}",
            lambda s, a=a, band=band: gen_narrowband_noise(n, band, a, fs, s)))
    a = plan.sine_amplitude_vpp / 2
    for f in plan.sine_freqs():
        out.append(StimulusRequest("sine", a, f"tone={_fmt(f)}",
                                   lambda s, a=a, f=f: gen_sine(n, ToneSpec(f, a), fs)))
    a = plan.dual_amplitude_vpp / 2
    for f1, f2 in plan.dual_pairs():
        out.append(StimulusRequest("dual_tone", a, f"tones={_fmt(f1)}:{_fmt(f2)}",
                                   lambda s, a=a, f1=f1, f2=f2: gen_dual_tone(n, f1, f2, a, fs)))
    for f in plan.sweep_freqs():
        for p in plan.sweep_powers():
            a = dbm_to_amplitude(p)
            out.append(StimulusRequest("amplitude_sweep", a, f"tone={_fmt(f)};dbm={_fmt(p)}",
                                       lambda s, a=a, f=f: gen_sine(n, ToneSpec(f, a), fs)))
    return out


def capture_seeds(master_seed, capture_index):
    """Independent (stimulus, device-noise) seeds for one capture."""
    ss = np.random.SeedSequence([int(master_seed), int(capture_index)])
    a, b = ss.generate_state(2, dtype=np.uint32)
    return int(a), int(b)


def parse_descriptor(descriptor):
    """``"tone=0.1;dbm=-20"`` -> ``{"tone": "0.1", "dbm": "-20"}``."""
    out = {}
    for part in descriptor.split(";"):
        if "=" in part:
            k, _, v = part.partition("=")
            out[k] = v
    return out


def build_dataset_suite(plan, dut, out_dir, seed):
    """Generate, acquire and write every capture in ``plan``; returns manifest rows.

    Rows are also written to ``out_dir/manifest.jsonl`` once all captures
    exist. Paths in the manifest are relative to ``out_dir``.
    """
    out_dir = Path(out_dir)
    if not out_dir.parent.exists():
        raise FileNotFoundError(f"parent directory of data_dir does not exist: {out_dir.parent}")
    out_dir.mkdir(exist_ok=True)
    rows = []
    for idx, req in enumerate(plan_stimuli(plan)):
        stim_seed, noise_seed = capture_seeds(seed, idx)
        stimulus = req.make(stim_seed)
        meta = CaptureMeta(req.kind, req.amplitude_v, req.descriptor, stim_seed, idx)
        pair = CapturePair(stimulus, dutsim.simulate(dut, stimulus, noise_seed), meta)
        name = f"{idx:04d}_{req.kind}.csv"
        try:
            write_capture_csv(pair, out_dir / name)
        except OSError as exc:
            raise OSError(f"failed writing capture {out_dir / name}: {exc}") from exc
        rows.append(dict(index=idx, kind=req.kind, amplitude_v=req.amplitude_v,
                         descriptor=req.descriptor, seed=stim_seed, path=name))
    write_manifest(rows, out_dir / MANIFEST_NAME)
    return rows


def write_manifest(rows, path):
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")
    os.replace(tmp, path)


def read_manifest(path):
    path = Path(path)
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CaptureFormatError(f"bad manifest row: {exc.msg}", lineno, path) from None
    return rows


def load_capture(data_dir, row):
    return read_capture_csv(Path(data_dir) / row["path"])
