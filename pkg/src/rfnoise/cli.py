"""``rfnoise`` command line: generate captures, train, evaluate, check gradients.

Every file-writing command works inside a run root (``--out``, default the
current directory) guarded by a ``.rfnoise.lock`` file. Timestamps only go
to ``rfnoise.log`` in that root, so repeated runs with the same config and
seed leave every other file byte-identical.

Exit codes: 0 success, 1 failed check or unexpected error, 2 config,
3 I/O or file format, 4 training divergence, 5 metrology, 6 preprocessing.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from collections import Counter, defaultdict
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import metrics, pipeline, report, testbench
from .config import load_config
from .errors import (
    CaptureFormatError,
    ConfigError,
    DivergenceError,
    MetrologyError,
    PipelineError,
    RFNoiseError,
)
from .neuralnet import (
    ModelArtifact,
    default_check_archs,
    evaluate_mse,
    grad_check,
    predict_sequence,
    train,
)
from .siggen import Waveform

log = logging.getLogger("rfnoise")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGENCE, EXIT_METROLOGY, EXIT_PIPELINE = range(7)
LOCK_NAME = ".rfnoise.lock"
LOG_NAME = "rfnoise.log"
LOG_ENV = "RFNOISE_LOG_LEVEL"
EVAL_MODES = ("time", "gain_freq", "gain_power", "oip3")


class LockError(OSError):
    pass


# ---------------------------------------------------------------- run plumbing


@contextmanager
def run_lock(root):
    """Exclusive lock on ``root``; a lock left by a dead process is taken over."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    path = root / LOCK_NAME
    for _ in range(2):
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            break
        except FileExistsError:
            if _lock_is_stale(path):
                path.unlink(missing_ok=True)
                continue
            raise LockError(f"{root} is in use by another rfnoise process (remove {path} if it is stale)")
    else:
        raise LockError(f"could not acquire {path}")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        path.unlink(missing_ok=True)


def _lock_is_stale(path):
    try:
        pid = int(path.read_text().strip() or "0")
    except (OSError, ValueError):
        return False
    if pid <= 0:
        return False
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return True
    except PermissionError:
        return False
    return False


def close_logging():
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()


def setup_logging(root=None):
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    close_logging()
    log.setLevel(logging.DEBUG)
    log.propagate = False
    err = logging.StreamHandler(sys.stderr)
    err.setLevel(getattr(logging, level, logging.WARNING))
    err.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(err)
    if root is not None:
        fh = logging.FileHandler(Path(root) / LOG_NAME)
        fh.setLevel(logging.DEBUG)
        fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        log.addHandler(fh)


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def derived_seed(master, *keys):
    return int(np.random.SeedSequence([int(master), *keys]).generate_state(1)[0])


def _manifest(cfg):
    path = cfg.data_dir / testbench.MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path} (run `rfnoise generate` first)")
    return testbench.read_manifest(path)


def _rows(manifest, kind):
    return sorted((r for r in manifest if r["kind"] == kind), key=lambda r: r["index"])


def _load(cfg, rows):
    return [testbench.load_capture(cfg.data_dir, r) for r in rows]


# -------------------------------------------------------------------- commands


def cmd_generate(cfg):
    rows = testbench.build_dataset_suite(cfg.plan, cfg.dut, cfg.data_dir, cfg.seed)
    counts = Counter(r["kind"] for r in rows)
    print(f"wrote {len(rows)} captures to {cfg.data_dir}")
    for kind in testbench.KINDS:
        if counts[kind]:
            print(f"  {kind:16s} {counts[kind]}")
    log.info("generate: %d captures in %s", len(rows), cfg.data_dir)
    return rows


def _windows(pairs, stats, cfg, group):
    pc = cfg.pipeline
    return pipeline.WindowedDataset.concat(
        pipeline.extract_windows(p, stats, cfg.arch.input_width, pc.windows_per_file,
                                 derived_seed(cfg.seed, group, p.meta.capture_index))
        for p in pairs)


def cmd_train(cfg):
    manifest = _manifest(cfg)
    pc = cfg.pipeline
    uniform = _rows(manifest, "uniform_noise")
    need = pc.n_train_files + pc.n_val_files
    if len(uniform) < need:
        raise PipelineError(f"need {need} uniform-noise captures, manifest lists {len(uniform)}")
    pairs = _load(cfg, uniform[:need])
    train_pairs, val_pairs = pairs[:pc.n_train_files], pairs[pc.n_train_files:]
    band_pairs = _load(cfg, _rows(manifest, "band_noise"))

    lag = pipeline.consensus_lag(train_pairs, pc.max_lag)
    log.info("consensus delay: %d samples", lag)
    aligned_train = [pipeline.align(p, lag) for p in train_pairs]
    stats = pipeline.fit_norm_stats(aligned_train)
    train_set = _windows(aligned_train, stats, cfg, 0)
    val_set = _windows([pipeline.align(p, lag) for p in val_pairs], stats, cfg, 1)
    test_sets = [_windows([pipeline.align(p, lag)], stats, cfg, 2) for p in band_pairs]

    model = train(cfg.arch, train_set, val_set, cfg.train, norm_stats=stats,
                  on_epoch=lambda r: print(f"epoch {r['epoch']:3d}  train {r['train_mse']:.3e}  "
                                           f"val {r['val_mse']:.3e}", flush=True))
    model.delay_lag = lag
    best = model.history[model.best_epoch - 1]
    test = {r["descriptor"]: evaluate_mse(model.network, ds)
            for r, ds in zip(_rows(manifest, "band_noise"), test_sets)}

    out = cfg.model_path
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    (out.parent / "history.csv").write_text(model.history_csv())
    summary = dict(
        delay_lag=lag,
        best_epoch=model.best_epoch,
        train_mse=best["train_mse"],
        val_mse=best["val_mse"],
        test_mse=test,
        test_mse_max=max(test.values()) if test else None,
        n_train_windows=len(train_set),
        n_val_windows=len(val_set),
        n_params=int(model.network.n_params),
    )
    write_json(out.parent / "train_summary.json", summary)
    print(f"best epoch {model.best_epoch}: val MSE {best['val_mse']:.3e}"
          + (f", worst band-noise test MSE {summary['test_mse_max']:.3e}" if test else ""))
    print(f"model written to {out}")
    return summary


def _eval_time(cfg, model, manifest, out_dir):
    pc, ec = cfg.pipeline, cfg.eval
    uniform = _rows(manifest, "uniform_noise")
    picks = []
    if len(uniform) > pc.n_train_files:
        picks.append(("val", uniform[pc.n_train_files]))
    bands = _rows(manifest, "band_noise")
    if bands:
        target = ec.time_band_frac * cfg.plan.top_hz

        def centre(r):
            lo, hi = (float(v) for v in testbench.parse_descriptor(r["descriptor"])["band"].split(":"))
            return abs((lo + hi) / 2 - target)
        picks.append(("band", min(bands, key=centre)))
    if not picks:
        raise PipelineError("no uniform-noise or band-noise captures to plot")
    lag = model.delay_lag or 0
    start = model.arch.input_width - 1
    summary = {}
    for label, row in picks:
        pair = pipeline.align(testbench.load_capture(cfg.data_dir, row), lag)
        predicted = predict_sequence(model, pair.stimulus, ec.n_predict, start).samples
        measured = pair.response.segment(start, ec.n_predict).samples
        resid = measured - predicted
        idx = np.arange(start, start + ec.n_predict)
        fs = pair.sample_rate_hz
        k = ec.n_plot
        report.write_svg(out_dir / f"time_{label}_waveform.svg",
                         [("measured", idx[:k], measured[:k]), ("predicted", idx[:k], predicted[:k])],
                         f"{row['path']}: first {k} samples", "sample index", "output (V)")
        spec = {}
        for name, y in (("measured", measured), ("predicted", predicted)):
            s = metrics.spectrum(Waveform(y, fs))
            spec[name] = 20 * np.log10(np.maximum(s.amplitudes(), 1e-12))
        freqs = np.arange(spec["measured"].size) * fs / ec.n_predict
        report.write_svg(out_dir / f"time_{label}_spectrum.svg",
                         [("measured", freqs, spec["measured"]), ("predicted", freqs, spec["predicted"])],
                         f"{row['path']}: {ec.n_predict}-point spectrum", "frequency (Hz)", "amplitude (dBV)")
        with open(out_dir / f"time_{label}_residual.csv", "w", newline="\n") as fh:
            fh.write("index,measured_v,predicted_v,residual_v\n")
            for i, m, p, r in zip(idx, measured, predicted, resid):
                fh.write(f"{i},{m:.17g},{p:.17g},{r:.17g}\n")
        ns = model.norm_stats
        summary[label] = dict(
            capture=row["path"],
            mse_normalized=float(np.mean((ns.apply_output(measured) - ns.apply_output(predicted)) ** 2)),
            rms_residual_v=float(np.sqrt(np.mean(resid ** 2))),
        )
    return summary


def _curve_summary(curve):
    out = dict(
        points=len(curve),
        max_abs_err_db=curve.max_abs_error("measured", "predicted"),
        max_abs_err_vs_analytic_db=curve.max_abs_error("analytic", "measured"),
    )
    flagged = [float(x) for x, f in zip(curve.x, curve.flags) if f]
    if flagged:
        out["flagged_x"] = flagged
    return out


def _measure_start(cfg, model):
    start = model.arch.input_width - 1
    if start + cfg.plan.n_fft > cfg.plan.n_samples:
        raise PipelineError(
            f"measurement segment [{start}, {start + cfg.plan.n_fft}) exceeds {cfg.plan.n_samples} samples")
    return start


def _eval_gain_freq(cfg, model, manifest, out_dir):
    rows = _rows(manifest, "sine")
    if not rows:
        raise PipelineError("manifest has no sine captures")
    pairs = [(p.stimulus, p.response) for p in _load(cfg, rows)]
    curve = metrics.gain_frequency_from_captures(pairs, metrics.model_predictor(model), cfg.dut,
                                                 cfg.plan.n_fft, _measure_start(cfg, model), cfg.eval.z_ohm)
    curve.to_csv(out_dir / "gain_freq.csv")
    report.curve_svg(out_dir / "gain_freq.svg", curve, "Small-signal gain vs frequency",
                     "frequency (Hz)", "gain (dB)")
    return _curve_summary(curve)


def _eval_gain_power(cfg, model, manifest, out_dir):
    groups = defaultdict(list)
    for r in _rows(manifest, "amplitude_sweep"):
        groups[float(testbench.parse_descriptor(r["descriptor"])["tone"])].append(r)
    if not groups:
        raise PipelineError("manifest has no amplitude-sweep captures")
    start = _measure_start(cfg, model)
    summary = {}
    for i, f in enumerate(sorted(groups)):
        rows = sorted(groups[f], key=lambda r: float(testbench.parse_descriptor(r["descriptor"])["dbm"]))
        powers = [float(testbench.parse_descriptor(r["descriptor"])["dbm"]) for r in rows]
        pairs = [(p.stimulus, p.response) for p in _load(cfg, rows)]
        curve = metrics.gain_power_from_captures(pairs, powers, metrics.model_predictor(model), cfg.dut,
                                                 cfg.plan.n_fft, start, cfg.eval.z_ohm)
        curve.to_csv(out_dir / f"gain_power_{i}.csv")
        report.curve_svg(out_dir / f"gain_power_{i}.svg", curve, f"Gain vs input power at {f:.6g} Hz",
                         "input power (dBm)", "gain (dB)")
        summary[f"{f:.17g}"] = dict(_curve_summary(curve), file=f"gain_power_{i}.csv")
    return summary


def _eval_oip3(cfg, model, manifest, out_dir):
    rows = _rows(manifest, "dual_tone")
    if not rows:
        raise PipelineError("manifest has no dual-tone captures")
    tones = [tuple(float(v) for v in testbench.parse_descriptor(r["descriptor"])["tones"].split(":"))
             for r in rows]
    pairs = [(p.stimulus, p.response) for p in _load(cfg, rows)]
    curve = metrics.oip3_from_captures(pairs, tones, metrics.model_predictor(model), cfg.dut,
                                       cfg.plan.n_fft, _measure_start(cfg, model), cfg.eval.z_ohm)
    curve.to_csv(out_dir / "oip3.csv")
    report.curve_svg(out_dir / "oip3.svg", curve, "OIP3 vs centre frequency",
                     "centre frequency (Hz)", "OIP3 (dBm)")
    flagged = sum(1 for f in curve.flags if f)
    if flagged:
        log.warning("oip3: %d sweep point(s) had IM3 below the noise floor", flagged)
    return _curve_summary(curve)


_EVALUATORS = dict(time=_eval_time, gain_freq=_eval_gain_freq, gain_power=_eval_gain_power, oip3=_eval_oip3)


def cmd_eval(cfg, which="all"):
    modes = EVAL_MODES if which == "all" else (which,)
    model = ModelArtifact.load(cfg.model_path)
    if model.norm_stats is None:
        raise PipelineError(f"{cfg.model_path} carries no normalisation statistics")
    manifest = _manifest(cfg)
    out_dir = cfg.report_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "eval_summary.json"
    summary = json.loads(path.read_text()) if path.exists() else {}
    for mode in modes:
        summary[mode] = _EVALUATORS[mode](cfg, model, manifest, out_dir)
        log.info("eval %s done", mode)
        print(f"{mode}: {json.dumps(summary[mode], sort_keys=True)}")
    write_json(path, summary)
    return summary


def cmd_gradcheck(tol=1e-5):
    ok = True
    for arch in default_check_archs():
        rep = grad_check(arch)
        passed = rep.passed(tol)
        ok &= passed
        worst = max(rep.per_slice, key=rep.per_slice.get)
        print(f"{arch.kind:12s} max rel error {rep.max_rel_error:.3e} ({worst})  "
              f"{'PASS' if passed else 'FAIL'}")
    return ok


# ------------------------------------------------------------------------ main


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration (defaults if omitted)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("."),
                        help="run root; relative config paths resolve here (default: cwd)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")

    parser = argparse.ArgumentParser(prog="rfnoise", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="simulate the capture suite and write the manifest")
    sub.add_parser("train", parents=[common], help="train a model on the uniform-noise captures")
    ev = sub.add_parser("eval", parents=[common], help="compare model predictions with captures")
    ev.add_argument("--which", choices=EVAL_MODES + ("all",), default="all")
    gc = sub.add_parser("gradcheck", help="verify backprop against finite differences")
    gc.add_argument("--tol", type=float, default=1e-5)
    return parser


def _run(args):
    if args.command == "gradcheck":
        setup_logging()
        t0 = time.perf_counter()
        ok = cmd_gradcheck(args.tol)
        log.info("gradcheck took %.2f s", time.perf_counter() - t0)
        return EXIT_OK if ok else EXIT_FAIL
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = load_config(args.config, root=args.out, overrides=overrides)
    with run_lock(cfg.root):
        setup_logging(cfg.root)
        log.info("rfnoise %s (config=%s, seed=%d)", args.command, args.config, cfg.seed)
        if args.command == "generate":
            cmd_generate(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        else:
            cmd_eval(cfg, args.which)
    return EXIT_OK


def _error(exc):
    """Exit code and message for an exception escaping a command, or None if unknown."""
    for types, code, prefix in (
        (ConfigError, EXIT_CONFIG, "config error"),
        ((OSError, CaptureFormatError), EXIT_IO, "I/O error"),
        (DivergenceError, EXIT_DIVERGENCE, "training diverged"),
        (MetrologyError, EXIT_METROLOGY, "metrology error"),
        (PipelineError, EXIT_PIPELINE, "preprocessing error"),
        (RFNoiseError, EXIT_FAIL, "error"),
    ):
        if isinstance(exc, types):
            return code, f"{prefix}: {exc}"
    return None


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except Exception as exc:
        handled = _error(exc)
        if handled is None:
            raise
        code, msg = handled
        print(msg, file=sys.stderr)
        for h in log.handlers:
            if isinstance(h, logging.FileHandler):
                h.handle(log.makeRecord(log.name, logging.ERROR, __file__, 0, msg, (), None))
        return code
    finally:
        close_logging()


if __name__ == "__main__":
    sys.exit(main())
