import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfnoise.dutsim import DutSpec
from rfnoise.errors import PipelineError
from rfnoise.pipeline import (
    NormStats,
    WindowedDataset,
    align,
    consensus_lag,
    estimate_delay,
    extract_windows,
    fit_norm_stats,
    window_matrix,
)
from rfnoise.siggen import Waveform, gen_uniform_noise
from rfnoise.testbench import CaptureMeta, CapturePair, acquire


def shift(x, d):
    """``y[n] = x[n - d]`` with zero fill."""
    y = np.zeros_like(x)
    if d >= 0:
        y[d:] = x[:x.size - d]
    else:
        y[:d] = x[-d:]
    return y


def brute_xcorr(x, y, lag):
    n = x.size
    return sum(x[k] * y[k + lag] for k in range(n) if 0 <= k + lag < n) / n


def pair_of(x, y, idx=0):
    return CapturePair(Waveform(np.asarray(x, float), 1.0), Waveform(np.asarray(y, float), 1.0),
                       CaptureMeta(capture_index=idx))


class TestEstimateDelay:
    @pytest.mark.parametrize("d, sign", [(17, 1), (9, -1), (-40, 1), (0, -1), (512, 1), (-512, -1)])
    def test_shift(self, rng, d, sign):
        x = rng.uniform(-1, 1, 2048)
        est = estimate_delay(x, sign * shift(x, d), 512)
        assert (est.lag, est.sign) == (d, sign)

    def test_matches_brute_force_correlation(self, rng):
        from rfnoise.kernels import xcorr_lags
        x, y = rng.normal(size=64), rng.normal(size=64)
        r = xcorr_lags(x, y, 8)
        for lag in range(-8, 9):
            assert r[lag + 8] == pytest.approx(brute_xcorr(x, y, lag), rel=1e-12, abs=1e-15)

    def test_pw210_capture(self):
        dut = DutSpec.pw210_like()
        p = acquire(dut, gen_uniform_noise(8192, 0.6, 1.0, 0), seed=1)
        assert estimate_delay(p.stimulus, p.response).lag == dut.delay_samples

    def test_tie_prefers_smallest_then_positive(self):
        x = np.zeros(16)
        x[8] = 1.0
        y = np.zeros(16)
        y[5] = y[11] = 1.0  # lags -3 and +3 tie
        assert estimate_delay(x, y, 4).lag == 3
        y[8] = 1.0
        assert estimate_delay(x, y, 4).lag == 0

    def test_zero_signal(self):
        with pytest.raises(PipelineError):
            estimate_delay(np.zeros(64), np.ones(64), 4)

    def test_too_short(self):
        with pytest.raises(PipelineError):
            estimate_delay(np.ones(10), np.ones(10), 8)

    def test_length_mismatch(self):
        with pytest.raises(PipelineError):
            estimate_delay(np.ones(64), np.ones(65), 4)

    @settings(max_examples=60, deadline=None)
    @given(d=st.integers(-512, 512), sign=st.sampled_from([1, -1]), seed=st.integers(0, 2**31))
    def test_recovers_any_shift(self, d, sign, seed):
        x = np.random.default_rng(seed).uniform(-1, 1, 2048)
        est = estimate_delay(x, sign * shift(x, d), 512)
        assert (est.lag, est.sign) == (d, sign)


class TestAlign:
    def test_identity(self, rng):
        p = pair_of(rng.normal(size=32), rng.normal(size=32))
        q = align(p, 0)
        np.testing.assert_array_equal(q.response.samples, p.response.samples)

    def test_length(self):
        p = pair_of(np.ones(50_000), np.ones(50_000))
        assert len(align(p, 17)) == 49_983
        assert len(align(p, -17)) == 49_983

    def test_fixed_point(self, rng):
        x = rng.uniform(-1, 1, 4096)
        p = align(pair_of(x, shift(x, 23)), 23)
        assert estimate_delay(p.stimulus, p.response, 256).lag == 0

    def test_no_overlap(self):
        with pytest.raises(PipelineError):
            align(pair_of(np.ones(8), np.ones(8)), 8)

    def test_consensus_is_median(self, rng):
        pairs = []
        for i, d in enumerate([5, 7, 7, 90]):
            x = rng.uniform(-1, 1, 1024)
            pairs.append(pair_of(x, shift(x, d), i))
        assert consensus_lag(pairs, 128) == 7


class TestNorm:
    def test_fit(self, rng):
        x = np.linspace(-0.6, 0.6, 101)
        s = fit_norm_stats([pair_of(x, 3 * x)])
        assert (s.in_min, s.in_max, s.out_min, s.out_max) == (-0.6, 0.6, -1.7999999999999998, 1.7999999999999998)

    def test_global_over_pairs(self):
        s = fit_norm_stats([pair_of([0, 1], [0, 2]), pair_of([-1, 0.5], [-3, 0])])
        assert (s.in_min, s.in_max, s.out_min, s.out_max) == (-1, 1, -3, 2)

    def test_degenerate(self):
        with pytest.raises(PipelineError):
            fit_norm_stats([pair_of([1, 1], [0, 2])])
        with pytest.raises(PipelineError):
            fit_norm_stats([])

    def test_unclamped(self):
        s = NormStats(0.0, 1.0, 0.0, 1.0)
        assert s.apply_input(2.0) == 2.0

    @given(v=st.floats(-1e6, 1e6), lo=st.floats(-10, 10), w=st.floats(0.01, 10))
    def test_round_trip(self, v, lo, w):
        s = NormStats(lo, lo + w, lo, lo + w)
        assert s.invert_input(s.apply_input(v)) == pytest.approx(v, abs=1e-12 * max(1, abs(v)) * 100)
        assert s.apply_output(s.invert_output(v)) == pytest.approx(v, abs=1e-12 * max(1, abs(v)) * 100)

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=50))
    def test_monotone(self, xs):
        s = NormStats(-100.0, 100.0, -1.0, 1.0)
        a = np.array(xs)
        order = np.argsort(a, kind="stable")
        assert np.all(np.diff(s.apply_input(a)[order]) >= 0)


class TestWindows:
    def test_indexing(self):
        p = pair_of([1, 2, 3, 4, 5], [10, 20, 30, 40, 50])
        s = NormStats(0.0, 10.0, 0.0, 100.0)
        np.testing.assert_allclose(window_matrix(s.apply_input(p.stimulus.samples), [3], 4), [[.1, .2, .3, .4]])
        ds = extract_windows(p, s, window=4, count=2, seed=0)
        for row, t in zip(ds.windows, ds.targets):
            n = int(round(row[-1] * 10)) - 1
            np.testing.assert_allclose(row, np.arange(n - 2, n + 2) / 10)
            assert t == pytest.approx((n + 1) / 10)

    def test_distinct_and_deterministic(self, rng):
        x = rng.uniform(-1, 1, 50_000)
        p = pair_of(x, 2 * x)
        s = fit_norm_stats([p])
        a = extract_windows(p, s, 1024, 2048, seed=5)
        b = extract_windows(p, s, 1024, 2048, seed=5)
        assert len(a) == 2048 and a.window == 1024
        assert len({i for _, i in a.source}) == 2048
        assert a.windows.tobytes() == b.windows.tobytes()
        assert a.windows.min() >= 0 and a.windows.max() <= 1

    def test_only_target_response_read(self, rng):
        x = rng.uniform(-1, 1, 600)
        y = rng.uniform(-1, 1, 600)
        s = NormStats(-1.0, 1.0, -1.0, 1.0)
        a = extract_windows(pair_of(x, y), s, 64, 50, seed=1)
        idx = [i for _, i in a.source]
        y2 = y.copy()
        mask = np.ones(600, bool)
        mask[idx] = False
        y2[mask] = 99.0
        b = extract_windows(pair_of(x, y2), s, 64, 50, seed=1)
        assert a.targets.tobytes() == b.targets.tobytes()
        assert a.windows.tobytes() == b.windows.tobytes()

    @pytest.mark.parametrize("n, count", [(64, 1), (100, 100)])
    def test_insufficient(self, n, count):
        p = pair_of(np.linspace(0, 1, n), np.linspace(0, 1, n))
        with pytest.raises(PipelineError):
            extract_windows(p, NormStats(0.0, 1.0, 0.0, 1.0), 64, count)

    @pytest.mark.parametrize("suffix", [".npy", ".csv"])
    def test_save_load(self, tmp_path, rng, suffix):
        ds = WindowedDataset(rng.uniform(size=(5, 8)), rng.uniform(size=5))
        ds.save(tmp_path / f"d{suffix}")
        back = WindowedDataset.load(tmp_path / f"d{suffix}")
        assert back.windows.tobytes() == ds.windows.tobytes()
        assert back.targets.tobytes() == ds.targets.tobytes()
        np.testing.assert_array_equal(ds.to_array()[:, -1], ds.targets)

    def test_concat(self, rng):
        a = WindowedDataset(rng.uniform(size=(2, 3)), [0.1, 0.2], [(0, 1), (0, 2)])
        b = WindowedDataset(rng.uniform(size=(1, 3)), [0.3], [(1, 5)])
        c = WindowedDataset.concat([a, b])
        assert len(c) == 3 and c.source[-1] == (1, 5)
        with pytest.raises(PipelineError):
            WindowedDataset(np.zeros((2, 3)), np.zeros(3))
