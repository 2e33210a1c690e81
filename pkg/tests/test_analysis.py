import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from thermosd import analysis as an
from thermosd.modulator import BitStream, ModulatorConfig


def _white_bits(n, seed=0, f_ck=1e4, scale=2.0):
    rng = np.random.default_rng(seed)
    return BitStream(np.where(rng.random(n) < 0.5, -1, 1), f_ck, scale)


class TestWelch:
    @pytest.mark.parametrize("nperseg", [256, 1001])
    def test_matches_scipy(self, nperseg):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(20_000) + 0.3
        acc = an.WelchAccumulator(1e3, nperseg)
        for piece in np.array_split(x, 7):
            acc.feed(piece)
        spec = acc.result()
        f, p = signal.welch(x, fs=1e3, window="hann", nperseg=nperseg, detrend=False)
        np.testing.assert_allclose(spec.freqs, f)
        np.testing.assert_allclose(spec.psd, p, rtol=1e-10)

    def test_parseval(self):
        bs = _white_bits(200_000)
        spec = an.psd(bs, n_segments=40)
        assert spec.total_power() == pytest.approx(bs.scale**2, rel=0.01)

    def test_white_bits_flat(self):
        bs = _white_bits(100 * 2048 // 2 + 2048, seed=3)
        spec = an.psd(bs, resolution_bw=bs.f_ck / 2048)
        assert spec.n_segments >= 100
        mid = spec.psd[5:-5]
        assert np.mean(mid) == pytest.approx(bs.scale**2 / (bs.f_ck / 2), rel=0.05)

    def test_nyquist_square_wave(self):
        bits = np.tile([1, -1], 4096)
        spec = an.psd(BitStream(bits, 1e3, 1.0), n_segments=7)
        frac = spec.psd[-1] * spec.resolution_bw / spec.total_power()
        assert frac > 0.6  # Hann main lobe puts the rest in the neighbouring bin
        assert spec.psd[-2:].sum() * spec.resolution_bw == pytest.approx(spec.total_power(), rel=1e-9)

    def test_empty_and_short(self):
        with pytest.raises(ValueError):
            an.psd(BitStream(np.empty(0), 1e3, 1.0))
        with pytest.raises(ValueError):
            an.psd(BitStream(np.ones(100), 1e3, 1.0), resolution_bw=1.0)


class TestNTF:
    def test_ideal_dc_zero(self):
        assert an.ntf_magnitude(0.0, 131e3) == 0.0

    def test_thermal_dc(self):
        a_z = math.exp(-1 / (131e3 * 3.3e-3))
        assert an.ntf_magnitude(0.0, 131e3, 3.3e-3) == pytest.approx(1 - a_z, rel=1e-12)
        assert an.ntf_magnitude(0.0, 131e3, 3.3e-3) == pytest.approx(2.31e-3, rel=1e-3)

    def test_closed_form(self):
        f = np.linspace(0, 65.5e3, 1000)
        a_z = math.exp(-1 / (131e3 * 3.3e-3))
        ref = np.abs(1 - a_z * np.exp(-2j * np.pi * f / 131e3))
        np.testing.assert_array_equal(an.ntf_magnitude(f, 131e3, 3.3e-3), ref)

    def test_flat_to_corner(self):
        f = np.linspace(0, 48, 200)
        th = an.ntf_magnitude(f, 131e3, 3.3e-3)
        assert 20 * np.log10(th.max() / th[0]) <= 3.0
        assert an.ntf_magnitude(200.0, 131e3, 3.3e-3) > 2 * th[0]

    def test_crossover(self):
        # |1 - z^-1| = |1 - a z^-1| where cos(w) = (1 + a) / 2, about 1 kHz at 131 kHz
        f_ck = 131e3
        a_z = math.exp(-1 / (f_ck * 3.3e-3))
        f_x = f_ck * math.acos((1 + a_z) / 2) / (2 * math.pi)
        assert 900 < f_x < 1100
        below = np.geomspace(0.01, 0.99 * f_x, 300)
        above = np.geomspace(1.01 * f_x, f_ck / 2, 300)
        assert np.all(an.ntf_magnitude(below, f_ck) < an.ntf_magnitude(below, f_ck, 3.3e-3))
        assert np.all(an.ntf_magnitude(above, f_ck) >= an.ntf_magnitude(above, f_ck, 3.3e-3))


def _flat_spectrum(d=1e-6, df=0.5, n=4001):
    return an.Spectrum(np.arange(n) * df, np.full(n, d), df)


class TestBandMetrics:
    def test_flat_band(self):
        spec = _flat_spectrum()
        nbins = np.count_nonzero((spec.freqs >= 1) & (spec.freqs <= 20))
        assert an.band_rms(spec, 1, 20) == pytest.approx(math.sqrt(1e-6 * nbins * 0.5))

    @settings(max_examples=50, deadline=None)
    @given(i=st.integers(0, 1000), j=st.integers(0, 1000), k=st.integers(0, 1000))
    def test_additive(self, i, j, k):
        i, j, k = sorted((i, j, k))
        spec = an.Spectrum(np.arange(2001) * 0.5, np.random.default_rng(0).random(2001), 0.5)
        left = an.band_rms(spec, i * 0.5, j * 0.5)
        right = an.band_rms(spec, (j + 1) * 0.5, k * 0.5) if k > j else 0.0
        assert an.band_rms(spec, i * 0.5, k * 0.5) ** 2 == pytest.approx(left**2 + right**2, rel=1e-12)

    def test_recovers_white_noise(self):
        rng = np.random.default_rng(4)
        fs, sigma = 1e3, 0.01
        x = rng.standard_normal(400_000) * sigma
        acc = an.WelchAccumulator(fs, 2000)
        acc.feed(x)
        spec = acc.result()
        expect = sigma * math.sqrt((100 - 10) / (fs / 2))
        assert an.band_rms(spec, 10, 100) == pytest.approx(expect, rel=0.05)

    def test_exclusion(self):
        spec = _flat_spectrum()
        full = an.band_rms(spec, 1, 20)
        cut = an.band_rms(spec, 1, 20, [(16.0, 1.5)])
        assert cut**2 == pytest.approx(full**2 - 7 * 1e-6 * 0.5)

    def test_outside_rejected(self):
        with pytest.raises(ValueError):
            an.band_rms(_flat_spectrum(), 1, 5000)


class TestShapeDeviation:
    def test_scaled_model_matches(self):
        spec = an.Spectrum(np.linspace(0, 1e4, 20001), np.linspace(1, 5, 20001) ** 2, 0.5)
        dev = an.shape_deviation_db(spec, lambda f: 7.0 * spec.psd, 10, 5e3)
        np.testing.assert_allclose(dev, 0.0, atol=1e-12)

    def test_minimax_level(self):
        f = np.linspace(0, 1e4, 20001)
        edge = np.geomspace(10, 5e3, 13)[-2]
        bump = np.where(f >= edge, 10 ** 0.4, 1.0)  # +4 dB in the last band only
        dev = an.shape_deviation_db(an.Spectrum(f, bump, 0.5), lambda fr: np.ones_like(fr), 10, 5e3)
        assert dev.max() == pytest.approx(2.0) and dev.min() == pytest.approx(-2.0)


class TestQuantizationNoise:
    def test_constant_power_estimate(self):
        assert an.quantization_noise_density(1 / math.sqrt(2), 131e3, 2.0) == pytest.approx(7.31e-3, abs=5e-6)
        assert an.quantization_noise_density(0.0, 131e3, 2.0) == pytest.approx(2.0 / math.sqrt(65.5e3))
        with pytest.raises(ValueError):
            an.quantization_noise_density(3.0, 131e3, 2.0)


class TestDistortion:
    def _spec(self, h3, noise=1e-4, seed=0):
        fs, n = 2048.0, 2048 * 64
        t = np.arange(n) / fs
        rng = np.random.default_rng(seed)
        x = np.sin(2 * np.pi * 16 * t) + h3 * np.sin(2 * np.pi * 48 * t) + noise * rng.standard_normal(n)
        acc = an.WelchAccumulator(fs, 4096)
        acc.feed(x)
        return acc.result()

    def test_pure_sine(self):
        assert an.harmonic_distortion(self._spec(0.0), 16.0) < 1e-3

    def test_one_percent(self):
        assert an.harmonic_distortion(self._spec(0.01), 16.0) == pytest.approx(0.01, rel=0.1)

    def test_above_nyquist(self):
        with pytest.raises(ValueError):
            an.harmonic_distortion(self._spec(0.0), 400.0)

    def test_signal_rms(self):
        assert an.signal_rms(self._spec(0.0), 16.0) == pytest.approx(1 / math.sqrt(2), rel=1e-3)


class TestCorner:
    def test_interpolation(self):
        table = [(10.0, 0.0), (100.0, -1.0), (1000.0, -5.0)]
        fc = an.corner_frequency(table)
        assert fc == pytest.approx(math.exp(math.log(100) + 0.5 * math.log(10)))
        assert math.isnan(an.corner_frequency([(1.0, 0.0), (2.0, -1.0)]))

    def test_slope(self):
        f = np.array([1e4, 2e4, 4e4, 8e4])
        assert an.slope_db_per_octave(f, 1 / np.sqrt(f)) == pytest.approx(-20 * math.log10(2) / 2)


class TestClosedLoop:
    def test_stf_ideal_unity_at_low_frequency(self):
        tab = an.stf_measure(ModulatorConfig(integrator="ideal"), [20.0], 1.0, seeds=(0, 1))
        assert abs(tab[0][1]) < 0.05

    def test_stf_rejects_large_amplitude(self):
        with pytest.raises(ValueError):
            an.stf_measure(ModulatorConfig(), [20.0], 2.5)

    def test_stf_monotone_beyond_passband(self):
        freqs = [1500.0, 2500.0, 4000.0, 6000.0]
        tab = an.stf_measure(ModulatorConfig(), freqs, 1.0, seeds=(0,))
        gains = [g for _, g in tab]
        assert all(x >= y for x, y in zip(gains, gains[1:]))

    def test_sweep_rows_ordered(self):
        base = replace(ModulatorConfig(), duration=3.0)
        rows = an.resolution_vs_fck(base, [32.75e3, 16e3], seeds=(0, 1))
        assert [r.fck_hz for r in rows] == [32.75e3, 16e3]
        assert all(r.n_seeds == 2 and r.resolution_g > 0 for r in rows)

    def test_streamed_psd_equals_whole(self):
        from thermosd.modulator import simulate, sine

        cfg = replace(ModulatorConfig(), duration=4.0, seed=2, chunk=1 << 16)
        whole = an.psd(simulate(cfg, sine(16, 1.0)))
        streamed = an.sine_spectrum(cfg)
        np.testing.assert_allclose(streamed.psd, whole.psd, rtol=1e-12)


def test_csv_writers(tmp_path):
    spec = _flat_spectrum(n=5)
    an.write_spectrum_csv(tmp_path / "s.csv", spec)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "freq_hz,psd_g2_per_hz" and len(lines) == 6
    an.write_sweep_csv(tmp_path / "w.csv", [an.SweepRow(1e4, 1e-3, 1e-4, 5)])
    assert (tmp_path / "w.csv").read_text().splitlines() == ["fck_hz,resolution_g,stddev_g,n_seeds", "10000,0.001,0.0001,5"]
    an.write_stf_csv(tmp_path / "t.csv", [(10.0, -0.25)])
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "freq_hz,gain_db"
