import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import wf
from rfnoise.dutsim import DutSpec, analytic_oip3_dbm, analytic_small_signal_gain_db, simulate
from rfnoise.errors import IncoherentToneError, MetrologyError, UnreliableIM3Error
from rfnoise.metrics import (
    MetricCurve,
    dut_predictor,
    freq_resolution,
    gain_db,
    gain_frequency_curve,
    gain_power_curve,
    oip3_dbm,
    oip3_frequency_curve,
    oip3_from_powers,
    peak_tone,
    spectrum,
    tone_amplitude,
    tone_power_dbm,
)
from rfnoise.siggen import amplitude_to_dbm

N = 4096


def tone(k, a=1.0, n=N):
    return a * np.sin(2 * np.pi * k * np.arange(n) / N)


class TestSpectrum:
    def test_dc(self):
        s = spectrum(wf(np.full(64, 0.25)))
        assert s.complex_bins[0] == pytest.approx(0.25 * 64)
        assert np.max(np.abs(s.complex_bins[1:])) < 1e-12

    def test_unit_sine(self):
        s = spectrum(wf(tone(37)))
        assert abs(s.complex_bins[37]) == pytest.approx(N / 2, rel=1e-12)

    def test_uses_leading_samples(self, rng):
        x = rng.normal(size=100)
        np.testing.assert_allclose(spectrum(wf(x), 64).complex_bins, np.fft.fft(x[:64]))

    def test_too_long(self):
        with pytest.raises(MetrologyError):
            spectrum(wf(np.ones(8)), 9)

    @settings(max_examples=50)
    @given(st.integers(1, 300), st.integers(0, 2**31))
    def test_parseval(self, n, seed):
        x = np.random.default_rng(seed).normal(size=n)
        s = spectrum(wf(x))
        assert np.sum(x ** 2) == pytest.approx(np.sum(np.abs(s.complex_bins) ** 2) / n, rel=1e-9)


class TestPeakTone:
    def test_convention(self):
        p = peak_tone(spectrum(wf(tone(37, 0.1), fs=2.0)))
        assert p.bin == 37 and p.f_max_hz == 37 * 2.0 / N
        assert p.amplitude_v == pytest.approx(0.1, abs=1e-9)

    def test_larger_tone_wins(self):
        assert peak_tone(spectrum(wf(tone(50, 0.05) + tone(90, 0.1)))).bin == 90

    def test_tie_prefers_lower(self):
        assert peak_tone(spectrum(wf(tone(90, 0.1) + tone(50, 0.1)))).bin == 50

    def test_dc_and_nyquist_ignored(self):
        x = 5.0 + 3.0 * (-1.0) ** np.arange(N) + tone(11, 0.01)
        assert peak_tone(spectrum(wf(x))).bin == 11

    def test_all_zero(self):
        with pytest.raises(MetrologyError):
            peak_tone(spectrum(wf(np.zeros(16))))

    @given(k=st.integers(1, N // 2 - 1), a=st.floats(1e-4, 10))
    def test_recovers_generator_amplitude(self, k, a):
        assert peak_tone(spectrum(wf(tone(k, a)))).amplitude_v == pytest.approx(a, rel=1e-9)


class TestTonePower:
    @pytest.mark.parametrize("a, dbm", [(1.0, 10.0), (0.1, -10.0)])
    def test_values(self, a, dbm):
        assert tone_power_dbm(spectrum(wf(tone(100, a))), 100 / N) == pytest.approx(dbm, abs=1e-9)

    def test_off_grid(self):
        s = spectrum(wf(tone(100)))
        with pytest.raises(IncoherentToneError):
            tone_power_dbm(s, 100.5 / N)
        tone_power_dbm(s, (100 + 1e-8) / N)

    @pytest.mark.parametrize("k", [0, N // 2])
    def test_dc_nyquist_not_tones(self, k):
        with pytest.raises(IncoherentToneError):
            tone_amplitude(spectrum(wf(tone(100))), k / N)


class TestGain:
    def test_ten_times(self):
        x = tone(64, 0.1)
        g = gain_db(wf(x), wf(10 * x))
        assert g.gain_db == pytest.approx(20.0, abs=1e-9) and g.f_hz == 64 / N

    def test_identity(self):
        x = tone(64, 0.1)
        assert gain_db(wf(x), wf(x)).gain_db == 0.0

    def test_rate_mismatch(self):
        with pytest.raises(MetrologyError):
            gain_db(wf(tone(5), 1.0), wf(tone(5), 2.0))

    @pytest.mark.parametrize("k", [40, 400, 1200])
    def test_dut_matches_analytic(self, noiseless_dut, k):
        x = wf(tone(k, 0.01, 2 * N))
        y = simulate(noiseless_dut, x).segment(N, N)
        g = gain_db(x.segment(N, N), y)
        assert g.gain_db == pytest.approx(analytic_small_signal_gain_db(noiseless_dut, k / N, 1.0), abs=0.05)

    @given(k=st.integers(1, N // 2 - 1), a=st.floats(1e-3, 1.0))
    def test_identity_device_is_zero_db(self, k, a):
        x = tone(k, a)
        assert gain_db(wf(x), wf(x)).gain_db == 0.0


class TestOip3:
    def test_intercept_definition(self):
        assert oip3_from_powers(7.0, 7.0) == 7.0

    def test_arithmetic(self):
        assert oip3_from_powers(10.0, -30.0) == 30.0

    @given(p1=st.floats(-50, 50), p3=st.floats(-150, 50), c=st.floats(-40, 40))
    def test_linearity(self, p1, p3, c):
        assert oip3_from_powers(p1 + c, p3 + c) == pytest.approx(oip3_from_powers(p1, p3) + c, abs=1e-9)

    @pytest.mark.parametrize("a", [0.005, 0.02])
    def test_cubic_trig_expansion(self, a):
        dut = DutSpec(a1=10.0, a3=-20.0)
        k1, k2 = 300, 310
        x = wf(tone(k1, a) + tone(k2, a))
        r = oip3_dbm(x, simulate(dut, x), k1 / N, k2 / N)
        fund = 10 * a + 9 / 4 * -20 * a ** 3
        im3 = 3 / 4 * 20 * a ** 3
        want = (3 * amplitude_to_dbm(abs(fund)) - amplitude_to_dbm(im3)) / 2
        assert r.oip3_dbm == pytest.approx(want, abs=1e-6)
        assert r.oip3_dbm == pytest.approx(r.oip3_upper_dbm, abs=1e-6)
        assert r.oip3_dbm == pytest.approx(analytic_oip3_dbm(dut, k1 / N), abs=0.1)

    def test_linear_device_unreliable(self):
        x = wf(tone(300, 0.1) + tone(310, 0.1))
        with pytest.raises(UnreliableIM3Error):
            oip3_dbm(x, wf(3 * x.samples), 300 / N, 310 / N)

    def test_im3_in_noise_unreliable(self, rng):
        dut = DutSpec(a1=10.0, a3=-20.0, noise_sigma_v=1e-2)
        x = wf(tone(300, 1e-3) + tone(310, 1e-3))
        with pytest.raises(UnreliableIM3Error):
            oip3_dbm(x, simulate(dut, x, seed=0), 300 / N, 310 / N)

    def test_unresolved(self):
        x = wf(tone(300) + tone(301))
        with pytest.raises(MetrologyError):
            oip3_dbm(x, x, 300 / N, 300 / N)


class TestFreqResolution:
    def test_25_ghz_over_25000_points(self):
        assert freq_resolution(25e9, 25_000) == 1e6

    def test_unit(self):
        assert freq_resolution(4096, 4096) == 1.0

    @given(fs=st.floats(1, 1e12), n=st.integers(1, 10**7))
    def test_doubling_halves(self, fs, n):
        assert freq_resolution(fs, 2 * n) == pytest.approx(freq_resolution(fs, n) / 2, rel=1e-15)

    def test_invalid(self):
        with pytest.raises(ValueError):
            freq_resolution(1.0, 0)


class TestCurve:
    def test_csv_round_trip(self, tmp_path):
        c = MetricCurve("oip3_vs_freq", [0.1, 0.2, 0.3], [30.0, math.nan, 29.5], [30.1, 29.9, 29.4],
                        [30.0, 30.0, 30.0], ["", "im3_below_floor:measured", ""])
        c.to_csv(tmp_path / "c.csv")
        back = MetricCurve.from_csv(tmp_path / "c.csv", "oip3_vs_freq")
        assert back.x == c.x and back.predicted == c.predicted and back.flags == c.flags
        assert math.isnan(back.measured[1])
        assert c.max_abs_error() == pytest.approx(0.1)

    @pytest.mark.parametrize("x", [[1.0, 1.0], [2.0, 1.0]])
    def test_x_strictly_increasing(self, x):
        with pytest.raises(ValueError):
            MetricCurve("gain_vs_freq", x, [0, 0], [0, 0])

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            MetricCurve("phase", [1.0], [0.0], [0.0])


class TestCurves:
    freqs = [k / N for k in (20, 200, 700, 1500)]

    def test_self_consistent_gain(self, noiseless_dut):
        c = gain_frequency_curve(dut_predictor(noiseless_dut), noiseless_dut, self.freqs[::-1], n_fft=N)
        assert c.x == self.freqs
        assert c.measured == c.predicted
        assert c.max_abs_error("analytic", "measured") < 0.1

    def test_self_consistent_oip3(self, noiseless_dut):
        pairs = [(f, f + 8 / N) for f in self.freqs]
        c = oip3_frequency_curve(dut_predictor(noiseless_dut), noiseless_dut, pairs, amplitude_v=0.03, n_fft=N)
        assert len(c) == 4 and c.measured == c.predicted
        assert c.max_abs_error("analytic", "measured") < 0.5

    def test_linear_device_flat(self):
        dut = DutSpec(a1=10.0)
        c = gain_power_curve(dut_predictor(dut), dut, 200 / N, np.linspace(-20, -5, 16), n_fft=N)
        assert np.ptp(c.measured) < 0.05

    def test_compression_non_increasing(self, noiseless_dut):
        c = gain_power_curve(dut_predictor(noiseless_dut), noiseless_dut, 200 / N,
                             np.linspace(-20, -5, 16), n_fft=N)
        assert np.all(np.diff(c.measured) < 0)
