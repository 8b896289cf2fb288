"""Time the compiled kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so one process compares them.
"""

import argparse
import timeit

import numpy as np

from rfnoise import _kernels_py

try:
    from rfnoise import _kernels as _compiled
except ImportError:
    _compiled = None


def cases(rng):
    x, y = rng.uniform(-1, 1, 8192), rng.uniform(-1, 1, 8192)
    z = rng.normal(size=(256, 128))
    _, sig = _kernels_py.silu_forward(z)
    g = rng.normal(size=z.shape)
    n = 264_449  # parameter count of the desk-scale residual net
    p, grad = rng.normal(size=n), rng.normal(size=n)
    m, v = np.zeros(n), np.zeros(n)
    return {
        "xcorr_lags (8192 samples, +-512 lags)": lambda k: k.xcorr_lags(x, y, 512),
        "silu_forward (256 x 128)": lambda k: k.silu_forward(z),
        "silu_backward (256 x 128)": lambda k: k.silu_backward(z, sig, g),
        "adam_update (264k params)": lambda k: k.adam_update(p, grad, m, v, 1e-3, 0.9, 0.999, 1e-8, 1),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = [("python", _kernels_py)] + ([("cython", _compiled)] if _compiled else [])
    if _compiled is None:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'kernel':40s}" + "".join(f"{name:>12s}" for name, _ in backends) + "     speedup")
    for label, fn in cases(np.random.default_rng(0)).items():
        times = []
        for _, mod in backends:
            t = timeit.Timer(lambda: fn(mod))
            number, _ = t.autorange()
            times.append(min(t.repeat(args.repeat, number)) / number)
        row = f"{label:40s}" + "".join(f"{1e3 * t:10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:8.2f}x"
        print(row)


if __name__ == "__main__":
    main()
