import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rfnoise.errors import (
    AliasingError,
    DegenerateToneError,
    DomainError,
    EmptyRequestError,
    SpectralBoundsError,
)
from rfnoise.metrics import peak_tone, spectrum, tone_amplitude
from rfnoise.siggen import (
    BandSpec,
    ToneSpec,
    Waveform,
    amplitude_to_dbm,
    band_bins,
    dbm_to_amplitude,
    gen_dual_tone,
    gen_narrowband_noise,
    gen_sine,
    gen_uniform_noise,
    vpp_to_amplitude,
)


class TestWaveform:
    def test_rejects_empty(self):
        with pytest.raises(EmptyRequestError):
            Waveform(np.array([]), 1.0)

    @pytest.mark.parametrize("fs", [0.0, -1.0])
    def test_rejects_bad_rate(self, fs):
        with pytest.raises(ValueError):
            Waveform(np.ones(3), fs)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Waveform(np.array([0.0, np.nan]), 1.0)

    def test_segment_and_duration(self):
        w = Waveform(np.arange(10.0), 2.0)
        assert w.duration_s == 5.0
        np.testing.assert_array_equal(w.segment(3, 4).samples, [3, 4, 5, 6])
        with pytest.raises(IndexError):
            w.segment(8, 4)


class TestUniformNoise:
    def test_bounds_and_mean(self):
        n, a = 100_000, 0.6
        x = gen_uniform_noise(n, a, 1.0, 7).samples
        assert x.min() >= -a and x.max() <= a
        assert abs(x.mean()) < 3 * (a / math.sqrt(3)) / math.sqrt(n)

    def test_zero_amplitude(self):
        assert not gen_uniform_noise(100, 0.0, 1.0, 1).samples.any()

    def test_ks_against_uniform_cdf(self):
        x = gen_uniform_noise(1_000_000, 1.0, 1.0, 3).samples
        d = stats.kstest(x, stats.uniform(loc=-1, scale=2).cdf).statistic
        assert d < 1.63 / math.sqrt(x.size)  # 1% critical value

    def test_variance(self):
        x = gen_uniform_noise(1_000_000, 0.5, 1.0, 11).samples
        assert x.var() == pytest.approx(0.25 / 3, rel=0.01)

    def test_empty_request(self):
        with pytest.raises(EmptyRequestError):
            gen_uniform_noise(0, 1.0, 1.0, 0)

    def test_deterministic(self):
        a = gen_uniform_noise(64, 1.0, 1.0, 5).samples
        b = gen_uniform_noise(64, 1.0, 1.0, 5).samples
        assert a.tobytes() == b.tobytes()

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(1, 500), a=st.floats(0, 10), seed=st.integers(0, 2**32 - 1))
    def test_never_exceeds_amplitude(self, n, a, seed):
        x = gen_uniform_noise(n, a, 1.0, seed).samples
        assert np.all(np.abs(x) <= a)


class TestNarrowbandNoise:
    def test_out_of_band_is_zero(self):
        n = 4096
        band = BandSpec(0.1 * 0.5, 0.2 * 0.5)
        x = gen_narrowband_noise(n, band, 0.5, 1.0, 3).samples
        mag = np.abs(np.fft.rfft(x))
        k0, k1 = band_bins(band, n, 1.0)
        outside = np.ones(mag.size, bool)
        outside[k0:k1 + 1] = False
        outside[0] = False  # the rescale offset lands in DC only
        assert mag[outside].max() <= 1e-10 * mag[k0:k1 + 1].max()

    @pytest.mark.parametrize("band", [BandSpec(0.0, 0.05), BandSpec(0.2, 0.3), BandSpec(0.4, 0.5)])
    def test_rescaled_onto_amplitude(self, band):
        x = gen_narrowband_noise(4096, band, 0.5, 1.0, 9).samples
        assert x.min() == pytest.approx(-0.5, abs=1e-12)
        assert x.max() == pytest.approx(0.5, abs=1e-12)

    def test_deterministic(self):
        band = BandSpec(0.1, 0.2)
        a = gen_narrowband_noise(4096, band, 0.5, 1.0, 4).samples
        b = gen_narrowband_noise(4096, band, 0.5, 1.0, 4).samples
        assert a.tobytes() == b.tobytes()

    def test_band_beyond_nyquist(self):
        with pytest.raises(SpectralBoundsError):
            gen_narrowband_noise(1024, BandSpec(0.3, 0.6), 0.5, 1.0, 0)

    def test_invalid_band(self):
        with pytest.raises(SpectralBoundsError):
            BandSpec(0.3, 0.2)

    def test_band_bins_inclusive_round(self):
        assert band_bins(BandSpec(0.1, 0.2), 100, 1.0) == (10, 20)


class TestSine:
    def test_exact_values(self):
        x = gen_sine(8, ToneSpec(1 / 8, 1.0), 1.0).samples
        r = math.sqrt(2) / 2
        np.testing.assert_allclose(x, [0, r, 1, r, 0, -r, -1, -r], atol=1e-12)

    def test_zero_amplitude(self):
        assert not np.any(gen_sine(64, ToneSpec(0.1, 0.0), 1.0).samples)

    def test_coherent_amplitude(self):
        n = 4096
        x = gen_sine(n, ToneSpec(37 / n, 0.3), 1.0)
        assert tone_amplitude(spectrum(x, n), 37 / n) == pytest.approx(0.3, abs=1e-9)

    def test_frequency_offset(self):
        a = gen_sine(64, ToneSpec(0.1, 1.0, 0.05), 1.0).samples
        b = gen_sine(64, ToneSpec(0.15, 1.0), 1.0).samples
        np.testing.assert_allclose(a, b, atol=1e-12)

    @pytest.mark.parametrize("f, df", [(0.5, 0.0), (0.4, 0.1), (0.7, 0.0)])
    def test_aliasing(self, f, df):
        with pytest.raises(AliasingError):
            gen_sine(16, ToneSpec(f, 1.0, df), 1.0)


class TestDualTone:
    def test_two_peaks(self):
        n = 4096
        x = gen_dual_tone(n, 100 / n, 140 / n, 0.1, 1.0)
        amps = spectrum(x, n).amplitudes()
        peaks = np.flatnonzero(amps > 1e-6)
        assert peaks.tolist() == [100, 140]
        np.testing.assert_allclose(amps[peaks], 0.1, atol=1e-9)

    def test_zero_amplitude(self):
        assert not np.any(gen_dual_tone(128, 0.1, 0.2, 0.0, 1.0).samples)

    def test_degenerate(self):
        with pytest.raises(DegenerateToneError):
            gen_dual_tone(128, 0.1, 0.1, 0.1, 1.0)

    @settings(max_examples=40, deadline=None)
    @given(f1=st.floats(0.001, 0.49), f2=st.floats(0.001, 0.49), a=st.floats(0, 5))
    def test_peak_bounded(self, f1, f2, a):
        if f1 == f2:
            return
        x = gen_dual_tone(256, f1, f2, a, 1.0).samples
        assert np.max(np.abs(x)) <= 2 * a + 1e-12

    def test_peak_tone_picks_stronger(self):
        n = 1024
        x = Waveform(gen_sine(n, ToneSpec(50 / n, 0.1), 1.0).samples
                     + gen_sine(n, ToneSpec(90 / n, 0.05), 1.0).samples, 1.0)
        assert peak_tone(spectrum(x, n)).f_max_hz == pytest.approx(50 / n)


class TestDbm:
    def test_two_vpp_is_ten_dbm(self):
        assert amplitude_to_dbm(vpp_to_amplitude(2.0)) == pytest.approx(10.0, abs=1e-12)

    def test_five_dbm_amplitude(self):
        assert amplitude_to_dbm(0.5623) == pytest.approx(5.0, abs=0.01)

    def test_1p12_vpp_rounding_gap(self):
        # 1.12 Vpp is a rounded label: the exact 5 dBm sine is 1.1247 Vpp
        assert amplitude_to_dbm(vpp_to_amplitude(1.12)) == pytest.approx(
            10 * math.log10(0.56 ** 2 / 0.1), abs=1e-12)
        assert 2 * dbm_to_amplitude(5.0) == pytest.approx(1.1247, abs=1e-4)

    @pytest.mark.parametrize("a", [0.0, -1.0])
    def test_domain(self, a):
        with pytest.raises(DomainError):
            amplitude_to_dbm(a)

    def test_bad_impedance(self):
        with pytest.raises(DomainError):
            dbm_to_amplitude(0.0, 0.0)

    @given(a=st.floats(1e-6, 1e3), z=st.floats(1.0, 1000.0))
    def test_round_trip(self, a, z):
        assert dbm_to_amplitude(amplitude_to_dbm(a, z), z) == pytest.approx(a, rel=1e-12)

    @given(a=st.floats(1e-6, 1e3))
    def test_twenty_db_per_decade(self, a):
        assert amplitude_to_dbm(10 * a) - amplitude_to_dbm(a) == pytest.approx(20.0, abs=1e-9)

    @given(a=st.floats(1e-6, 1e3), b=st.floats(1e-6, 1e3))
    def test_monotone(self, a, b):
        if a < b:
            assert amplitude_to_dbm(a) < amplitude_to_dbm(b)
