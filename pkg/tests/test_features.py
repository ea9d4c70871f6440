import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glottkit.dsp import AudioBuffer
from glottkit.features import (FeatureError, GlottalParams, HarmonicSeries, estimate_f0, glottal_params_from_poles,
                               h1h2, harmonic_amplitudes, hrf, median_params, spectral_features, spectral_tilt)
from glottkit.gif import NoVoicedFramesError
from glottkit.lpc import LpcModel, poly_from_roots, response_db
from glottkit.synth import SynthSpec, glottis_from_params, render

FS = 22050


def glottis(roots):
    return LpcModel.from_coefficients(poly_from_roots(roots))


def sines(freqs, amps, dur=0.5, fs=FS):
    t = np.arange(int(dur * fs)) / fs
    return sum(a * np.sin(2 * np.pi * f * t + 0.3 * i) for i, (f, a) in enumerate(zip(freqs, amps)))


class TestPoleMapping:
    def test_unit_radius(self):
        a = np.exp(2j * np.pi * 200 / FS)
        p = glottal_params_from_poles(glottis([a, np.conj(a), 0.9]), FS)
        assert p.fg == pytest.approx(200, abs=1e-6)
        assert p.bg == pytest.approx(0, abs=1e-6)

    def test_bandwidth(self):
        a = 0.99 * np.exp(2j * np.pi * 200 / FS)
        p = glottal_params_from_poles(glottis([a, np.conj(a), 0.9]), FS)
        assert p.bg == pytest.approx(-22050 * math.log(0.99) / math.pi, rel=1e-9)
        assert p.bg == pytest.approx(70.5, abs=0.05)

    def test_tilt_cutoff(self):
        a = 0.99 * np.exp(2j * np.pi * 200 / FS)
        p = glottal_params_from_poles(glottis([a, np.conj(a), 0.9]), FS)
        assert p.fst == pytest.approx(-22050 * math.log(0.9) / (2 * math.pi), rel=1e-9)
        assert p.fst == pytest.approx(369.8, abs=0.1)
        assert not p.degenerate

    def test_three_real_poles(self):
        roots = [0.99, 0.5, 0.97]
        cut = sorted(-math.log(r) * FS / (2 * math.pi) for r in roots)
        p = glottal_params_from_poles(glottis(roots), FS)
        assert p.fg == pytest.approx(math.sqrt(cut[0] * cut[1]), rel=1e-9)
        assert p.bg == pytest.approx(cut[0] + cut[1], rel=1e-9)
        assert p.fst == pytest.approx(cut[2], rel=1e-9)

    def test_negative_real_pole_flagged(self):
        a = 0.98 * np.exp(2j * np.pi * 300 / FS)
        p = glottal_params_from_poles(glottis([a, np.conj(a), -0.3]), FS)
        assert p.fst == FS / 2 and p.degenerate

    def test_order_check(self):
        with pytest.raises(ValueError):
            glottal_params_from_poles(LpcModel.from_coefficients([1.0, -0.5]), FS)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(20, 5000), st.floats(5, 800), st.floats(20, 10000))
    def test_round_trip(self, fg, bg, fst):
        p = glottal_params_from_poles(glottis_from_params(GlottalParams(fg, bg, fst), FS), FS)
        np.testing.assert_allclose(p.as_array(), [fg, bg, fst], rtol=1e-6)

    @given(st.floats(0.05, 3.0), st.floats(0.05, 3.0), st.floats(0.5, 0.99))
    def test_fg_monotone_in_angle(self, t1, t2, r):
        if abs(t1 - t2) < 1e-6:
            return
        lo, hi = sorted((t1, t2))
        f = [glottal_params_from_poles(glottis([r * np.exp(1j * t), r * np.exp(-1j * t), 0.5]), FS).fg
             for t in (lo, hi)]
        assert f[0] < f[1]

    @given(st.floats(0.3, 0.999), st.floats(0.3, 0.999))
    def test_bg_decreases_with_radius(self, r1, r2):
        if abs(r1 - r2) < 1e-6:
            return
        lo, hi = sorted((r1, r2))
        b = [glottal_params_from_poles(glottis([r * np.exp(0.2j), r * np.exp(-0.2j), 0.5]), FS).bg
             for r in (lo, hi)]
        assert b[0] > b[1]

    def test_median_params(self):
        m = median_params([GlottalParams(1, 2, 3), GlottalParams(3, 4, 5, True), GlottalParams(2, 9, 4)])
        np.testing.assert_array_equal(m.as_array(), [2, 4, 4])
        assert m.degenerate
        with pytest.raises(ValueError):
            median_params([])


class TestF0:
    def test_sine(self):
        track = estimate_f0(AudioBuffer(sines([220], [0.5]), FS))
        assert track.median() == pytest.approx(220, abs=1)

    def test_synthetic_period(self):
        spec = SynthSpec(f0=220.5, seed=1)
        assert spec.period == 100
        assert estimate_f0(render(spec).buffer).median() == pytest.approx(220.5, abs=2)

    def test_noise(self):
        with pytest.raises(NoVoicedFramesError):
            estimate_f0(AudioBuffer(np.random.default_rng(0).standard_normal(FS), FS))

    def test_range_check(self):
        with pytest.raises(ValueError):
            estimate_f0(AudioBuffer(np.ones(5000), FS), (40, 500))


class TestHarmonics:
    def test_two_sines(self):
        s = harmonic_amplitudes(sines([200, 400], [1.0, 0.5]), 200, FS)
        assert s.amplitudes_db[0] - s.amplitudes_db[1] == pytest.approx(20 * math.log10(2), abs=0.1)
        assert s.amplitudes_db[0] == pytest.approx(0.0, abs=0.1)
        np.testing.assert_allclose(s.frequencies[:2], [200, 400], atol=0.5)
        assert np.all(s.frequencies < 5000) and s.n == 24

    def test_single_harmonic_errors(self):
        with pytest.raises(FeatureError):
            harmonic_amplitudes(sines([3000], [1.0]), 3000, FS)

    def test_too_short(self):
        with pytest.raises(FeatureError):
            harmonic_amplitudes(np.ones(300), 100, FS)

    def test_series_validation(self):
        with pytest.raises(ValueError):
            HarmonicSeries([200, 100], [0, 0])
        with pytest.raises(FeatureError):
            h1h2(HarmonicSeries([100], [0]))
        with pytest.raises(FeatureError):
            hrf(HarmonicSeries([100], [0]))
        with pytest.raises(FeatureError):
            spectral_tilt(HarmonicSeries([100, 200], [0, 0]))

    def test_h1_dominates_when_fg_at_f0(self):
        r = render(SynthSpec(params=GlottalParams(200, 60, 1200), noise_floor_db=-np.inf, seed=0))
        s = harmonic_amplitudes(r.truth.glottal_flow_derivative, 200, FS)
        assert np.argmax(s.amplitudes_db) == 0

    def test_h1h2_matches_true_filters(self):
        spec = SynthSpec(noise_floor_db=-np.inf, seed=0)
        r = render(spec)
        g = glottis_from_params(spec.params, FS)
        f = np.array([spec.f0, 2 * spec.f0])
        lip = 20 * np.log10(np.abs(1 - spec.lip_d * np.exp(-2j * np.pi * f / FS)))
        level = response_db(g, f, FS) + lip
        s = harmonic_amplitudes(r.truth.glottal_flow_derivative, FS / spec.period, FS)
        assert h1h2(s) == pytest.approx(level[0] - level[1], abs=1.0)


class TestScalarFeatures:
    def test_h1h2(self):
        assert h1h2(HarmonicSeries([100, 200], [-10, -16])) == pytest.approx(6.0)
        assert h1h2(HarmonicSeries([100, 200], [-3, -3])) == 0.0

    def test_hrf(self):
        assert hrf(HarmonicSeries([100, 200], [0, 0])) == pytest.approx(0.0, abs=1e-12)
        db = 20 * np.log10([1, 0.5, 0.5])
        assert hrf(HarmonicSeries([100, 200, 300], db)) == pytest.approx(0.0, abs=1e-12)

    def test_tilt(self):
        f = np.arange(100, 1001, 100)
        assert spectral_tilt(HarmonicSeries(f, -20 * np.log10(f / 100))) == pytest.approx(-20.0, abs=1e-9)
        assert spectral_tilt(HarmonicSeries(f, np.full(f.size, -7.0))) == pytest.approx(0.0, abs=1e-9)

    def test_gain_invariance(self):
        x = render(SynthSpec(noise_floor_db=-np.inf, seed=0)).truth.glottal_flow_derivative
        a = spectral_features(x, 200, FS)
        b = spectral_features(10 * x, 200, FS)
        assert b.h1h2 == pytest.approx(a.h1h2, abs=1e-9)
        assert b.hrf == pytest.approx(a.hrf, abs=1e-9)
        assert b.st == pytest.approx(a.st, abs=1e-9)
