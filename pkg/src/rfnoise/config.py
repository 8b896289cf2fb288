"""Run configuration: one TOML file with a section per stage.

Schema (every key optional; defaults reproduce the desk-scale run)::

    seed = 0                      # master seed for every stochastic stage

    [paths]                       # relative paths resolve against the run root
    data_dir = "data"
    model_path = "model/model.npz"
    report_dir = "report"

    [dut]
    preset = "pw210_like"         # or "custom" (then a1 is required)
    a1 = 10.0                     # any DutSpec field overrides the preset

    [plan]                        # DatasetPlan fields
    [train]                       # TrainConfig fields except seed
    [arch]                        # ArchSpec fields
    [pipeline]
    n_train_files = 20
    n_val_files = 6
    windows_per_file = 2048
    max_lag = 512

    [eval]
    n_predict = 5000
    n_plot = 500
    z_ohm = 50.0
    time_band_frac = 0.3167       # pick the band-noise file nearest this fraction of top_hz

Values given on the command line as ``--set section.key=value`` are parsed
as TOML scalars/arrays and override the file.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dutsim import DutSpec
from .errors import ConfigError
from .neuralnet import ArchSpec, TrainConfig
from .testbench import DatasetPlan

DUT_PRESETS = ("pw210_like", "custom")


@dataclass(frozen=True)
class PathsConfig:
    data_dir: str = "data"
    model_path: str = "model/model.npz"
    report_dir: str = "report"


@dataclass(frozen=True)
class PipelineConfig:
    n_train_files: int = 20
    n_val_files: int = 6
    windows_per_file: int = 2048
    max_lag: int = 512

    def __post_init__(self):
        if self.n_train_files < 1 or self.n_val_files < 1:
            raise ConfigError("pipeline.n_train_files and pipeline.n_val_files must be >= 1")
        if self.windows_per_file < 1:
            raise ConfigError("pipeline.windows_per_file must be >= 1")
        if self.max_lag < 0:
            raise ConfigError("pipeline.max_lag must be non-negative")


@dataclass(frozen=True)
class EvalConfig:
    n_predict: int = 5000
    n_plot: int = 500
    z_ohm: float = 50.0
    time_band_frac: float = 0.95 / 3

    def __post_init__(self):
        if self.n_plot < 1 or self.n_predict < self.n_plot:
            raise ConfigError("eval.n_plot must be >= 1 and no larger than eval.n_predict")
        if not self.z_ohm > 0:
            raise ConfigError("eval.z_ohm must be positive")


@dataclass(frozen=True)
class RunConfig:
    dut: DutSpec = field(default_factory=DutSpec.pw210_like)
    plan: DatasetPlan = field(default_factory=DatasetPlan)
    train: TrainConfig = field(default_factory=TrainConfig)
    arch: ArchSpec = field(default_factory=ArchSpec)
    paths: PathsConfig = field(default_factory=PathsConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0
    root: Path = Path(".")

    def __post_init__(self):
        need = self.pipeline.n_train_files + self.pipeline.n_val_files
        if need > self.plan.train_count:
            raise ConfigError(
                f"pipeline needs {need} uniform-noise files but plan.train_count is {self.plan.train_count}")
        usable = self.plan.n_samples - self.arch.input_width + 1 - self.pipeline.max_lag
        if self.pipeline.windows_per_file > usable:
            raise ConfigError(
                f"pipeline.windows_per_file={self.pipeline.windows_per_file} exceeds the {usable} "
                "target indices available per aligned capture")
        if self.eval.n_predict + self.arch.input_width - 1 > self.plan.n_samples:
            raise ConfigError("eval.n_predict plus the window length exceeds plan.n_samples")

    def resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.root / p

    @property
    def data_dir(self):
        return self.resolve(self.paths.data_dir)

    @property
    def model_path(self):
        return self.resolve(self.paths.model_path)

    @property
    def report_dir(self):
        return self.resolve(self.paths.report_dir)

    def to_dict(self):
        dut = self.dut.to_dict()
        return dict(
            seed=self.seed,
            paths=dataclasses.asdict(self.paths),
            dut=dict(preset="custom", **dut),
            plan=self.plan.to_dict(),
            train={k: v for k, v in self.train.to_dict().items() if k != "seed"},
            arch=self.arch.to_dict(),
            pipeline=dataclasses.asdict(self.pipeline),
            eval=dataclasses.asdict(self.eval),
        )


_SCALARS = {"int": int, "float": float, "bool": bool, "str": str}


def _coerce(section, name, kind, value):
    """Check one TOML value against a field annotation; ints widen to float."""
    kind = getattr(kind, "__name__", kind)
    where = f"{section}.{name}"
    if kind == "tuple":
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected an array, got {value!r}")
        return tuple(value)
    want = _SCALARS.get(kind)
    if want is None:
        return value
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if want is int and isinstance(value, float) and value.is_integer():
        return int(value)
    if not isinstance(value, want) or (want is int and isinstance(value, bool)):
        raise ConfigError(f"{where}: expected {kind}, got {value!r}")
    return value


def _section(cls, section, values, exclude=()):
    if not isinstance(values, dict):
        raise ConfigError(f"[{section}] must be a table")
    fields = {f.name: f for f in dataclasses.fields(cls) if f.name not in exclude}
    unknown = sorted(set(values) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    return {k: _coerce(section, k, fields[k].type, v) for k, v in values.items()}


def _build(cls, section, values, exclude=(), **extra):
    kwargs = _section(cls, section, values, exclude)
    kwargs.update(extra)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def _build_dut(values):
    values = dict(values)
    preset = values.pop("preset", "pw210_like")
    if preset not in DUT_PRESETS:
        raise ConfigError(f"dut.preset: expected one of {DUT_PRESETS}, got {preset!r}")
    kwargs = _section(DutSpec, "dut", values)
    if preset == "pw210_like":
        return DutSpec.pw210_like(**kwargs)
    if "a1" not in kwargs:
        raise ConfigError("dut.a1 is required when dut.preset = \"custom\"")
    return DutSpec(**kwargs)


def parse_override(text):
    """``"train.epochs=5"`` -> ``("train", "epochs", 5)``; top-level keys have section None."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    section, dot, name = key.strip().rpartition(".")
    return (section if dot else None), name, value


_TOP_LEVEL = ("seed", "paths", "dut", "plan", "train", "arch", "pipeline", "eval")


def config_from_dict(data, root=".", overrides=()):
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    unknown = sorted(set(data) - set(_TOP_LEVEL))
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    for section, name, value in overrides:
        if section is None:
            data[name] = value
        else:
            if section not in _TOP_LEVEL or section == "seed":
                raise ConfigError(f"unknown config section {section!r}")
            data.setdefault(section, {})[name] = value
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: expected a non-negative integer, got {seed!r}")
    if "seed" in data.get("train", {}):
        raise ConfigError("train.seed is derived from the top-level seed; set seed instead")
    return RunConfig(
        dut=_build_dut(data.get("dut", {})),
        plan=_build(DatasetPlan, "plan", data.get("plan", {})),
        train=_build(TrainConfig, "train", data.get("train", {}), exclude=("seed",), seed=seed),
        arch=_build(ArchSpec, "arch", data.get("arch", {})),
        paths=_build(PathsConfig, "paths", data.get("paths", {})),
        pipeline=_build(PipelineConfig, "pipeline", data.get("pipeline", {})),
        eval=_build(EvalConfig, "eval", data.get("eval", {})),
        seed=seed,
        root=Path(root),
    )


def load_config(path=None, root=".", overrides=()):
    """Read a TOML file (or use defaults when ``path`` is None) and apply overrides."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, root, [parse_override(o) if isinstance(o, str) else o for o in overrides])
