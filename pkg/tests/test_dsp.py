import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.io import wavfile
from scipy.signal import welch

from glottkit import dsp
from glottkit.dsp import AudioBuffer, PolynomialFilter, UnstableFilterError, WavError

FS = 22050
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def stable_poly(roots):
    return np.real(np.poly(roots))


class TestAudioBuffer:
    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            AudioBuffer(np.zeros(4), 0)
        with pytest.raises(ValueError):
            AudioBuffer(np.zeros(4), 100.5)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            AudioBuffer([0.0, np.nan], FS)

    def test_polynomial_must_be_monic(self):
        with pytest.raises(ValueError):
            PolynomialFilter([2.0, 1.0])
        assert PolynomialFilter([1.0, -0.5, 0.1]).order == 2


class TestWav:
    def test_header_passthrough(self, tmp_path):
        p = tmp_path / "a.wav"
        wavfile.write(p, FS, np.zeros(22050, dtype=np.int16))
        buf = dsp.load_wav(p)
        assert len(buf) == 22050 and buf.sample_rate == 22050

    def test_int16_normalization(self, tmp_path):
        p = tmp_path / "a.wav"
        wavfile.write(p, FS, np.array([32767, -32768, 0], dtype=np.int16))
        buf = dsp.load_wav(p)
        assert buf.samples[0] == 32767 / 32768
        assert buf.samples[1] == -1.0

    def test_float32_accepted(self, tmp_path):
        p = tmp_path / "f.wav"
        wavfile.write(p, 16000, np.array([0.25, -0.5], dtype=np.float32))
        np.testing.assert_array_equal(dsp.load_wav(p).samples, [0.25, -0.5])

    def test_stereo_keeps_channel_zero(self, tmp_path, caplog, rng):
        data = (rng.standard_normal((500, 2)) * 3000).astype(np.int16)
        p = tmp_path / "s.wav"
        wavfile.write(p, FS, data)
        with caplog.at_level(logging.WARNING):
            buf = dsp.load_wav(p)
        np.testing.assert_array_equal(buf.samples, data[:, 0] / 32768.0)
        assert "channel" in caplog.text

    def test_rejects_other_formats(self, tmp_path):
        p = tmp_path / "i32.wav"
        wavfile.write(p, FS, np.zeros(10, dtype=np.int32))
        with pytest.raises(WavError):
            dsp.load_wav(p)

    def test_rejects_empty_and_garbage(self, tmp_path):
        p = tmp_path / "e.wav"
        wavfile.write(p, FS, np.zeros(0, dtype=np.int16))
        with pytest.raises(WavError):
            dsp.load_wav(p)
        g = tmp_path / "g.wav"
        g.write_bytes(b"not a wav at all")
        with pytest.raises(WavError):
            dsp.load_wav(g)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            dsp.load_wav(tmp_path / "nope.wav")

    def test_write_round_trip_with_comment(self, tmp_path, rng):
        x = np.round(rng.uniform(-0.9, 0.9, 777) * 32768) / 32768
        p = tmp_path / "w.wav"
        dsp.write_wav(p, AudioBuffer(x, 16000), comment="hello meta")
        buf = dsp.load_wav(p)
        assert buf.sample_rate == 16000
        np.testing.assert_array_equal(buf.samples, x)
        assert b"ICMT" in p.read_bytes() and b"hello meta" in p.read_bytes()

    def test_write_is_deterministic(self, tmp_path):
        buf = AudioBuffer(np.sin(np.arange(100) / 3), FS)
        dsp.write_wav(tmp_path / "a.wav", buf, "c")
        dsp.write_wav(tmp_path / "b.wav", buf, "c")
        assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()


class TestFraming:
    def test_offsets(self):
        frames = dsp.frame_signal(AudioBuffer(np.arange(100.0), FS), 40, 20, "rect")
        assert [f.start_index for f in frames] == [0, 20, 40, 60]

    def test_hann_endpoint(self):
        f = dsp.frame_signal(AudioBuffer(np.ones(64), FS), 64, 32, "hann")[0]
        assert abs(f.samples[0]) < 1e-12

    def test_constant_gives_window(self):
        f = dsp.frame_signal(AudioBuffer(np.ones(64), FS), 64, 32, "hann")[0]
        np.testing.assert_allclose(f.samples, dsp.window_samples("hann", 64))
        np.testing.assert_array_equal(f.raw, np.ones(64))

    def test_too_long_frame(self):
        with pytest.raises(ValueError):
            dsp.frame_signal(AudioBuffer(np.ones(10), FS), 11, 5)

    def test_unknown_window(self):
        with pytest.raises(ValueError):
            dsp.window_samples("kaiserish", 8)

    @given(arrays(float, st.integers(8, 200), elements=finite), st.integers(1, 8))
    def test_partition(self, x, frame_len):
        frames = dsp.frame_signal(AudioBuffer(x, FS), frame_len, frame_len, "rect")
        joined = np.concatenate([f.samples for f in frames])
        np.testing.assert_array_equal(joined, x[:joined.size])
        assert joined.size == (x.size // frame_len) * frame_len


class TestFilters:
    def test_fir_impulse(self):
        y = dsp.apply_fir(np.eye(1, 6).ravel(), [1.0, -0.99])
        np.testing.assert_allclose(y, [1, -0.99, 0, 0, 0, 0])

    def test_fir_identity(self, rng):
        x = rng.standard_normal(50)
        np.testing.assert_array_equal(dsp.apply_fir(x, [1.0]), x)

    def test_fir_undoes_ar1(self, rng):
        e = rng.standard_normal(2000)
        x = np.zeros_like(e)
        for n in range(e.size):  # direct recursion as oracle
            x[n] = e[n] + (0.9 * x[n - 1] if n else 0.0)
        y = dsp.apply_fir(x, [1.0, -0.9])
        np.testing.assert_allclose(y[1:], e[1:], atol=1e-9)

    def test_allpole_geometric(self):
        y = dsp.apply_allpole(np.eye(1, 20).ravel(), [1.0, -0.5])
        np.testing.assert_allclose(y, 0.5 ** np.arange(20))

    def test_allpole_gain(self):
        y = dsp.apply_allpole(np.eye(1, 5).ravel(), [1.0], gain=3.0)
        np.testing.assert_allclose(y, [3, 0, 0, 0, 0])

    def test_allpole_rejects_unstable(self):
        with pytest.raises(UnstableFilterError):
            dsp.apply_allpole(np.ones(4), [1.0, -1.0])
        with pytest.raises(UnstableFilterError):
            dsp.apply_allpole(np.ones(4), stable_poly([1.1, 0.2]))

    def test_is_stable_matches_roots(self, rng):
        for _ in range(300):
            c = np.concatenate([[1.0], rng.uniform(-2, 2, rng.integers(1, 6))])
            expect = bool(np.all(np.abs(np.roots(c)) < 1.0))
            if np.any(np.abs(np.abs(np.roots(c)) - 1.0) < 1e-9):
                continue
            assert dsp.is_stable(c) == expect

    def test_allpole_matches_welch(self, rng):
        # white noise through a 3-pole filter; Welch PSD vs |1/A|^2
        a = stable_poly([0.9, 0.7 * np.exp(0.6j), 0.7 * np.exp(-0.6j)])
        y = dsp.apply_allpole(rng.standard_normal(2 ** 18), a)
        f, pxx = welch(y, fs=FS, nperseg=1024)
        w = np.exp(-2j * np.pi * f / FS)
        model = 2.0 / FS / np.abs(np.polyval(a[::-1], w)) ** 2
        band = (f > 50) & (f < 10000)
        diff_db = 10 * np.log10(pxx[band] / model[band])
        assert abs(np.mean(diff_db)) < 0.5
        assert np.sqrt(np.mean(diff_db ** 2)) < 1.0

    def test_integrate_impulse_and_step(self):
        y = dsp.integrate(np.eye(1, 30).ravel(), 0.99)
        np.testing.assert_allclose(y, 0.99 ** np.arange(30))
        assert abs(dsp.integrate(np.ones(200), 0.5)[-1] - 2.0) < 1e-12

    @pytest.mark.parametrize("d", [0.0, 1.0, -0.3, 1.5])
    def test_integrate_rejects_d(self, d):
        with pytest.raises(ValueError):
            dsp.integrate(np.ones(3), d)

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, st.integers(1, 300), elements=finite),
           st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=6))
    def test_round_trip(self, x, roots):
        c = stable_poly(roots)
        y = dsp.apply_allpole(dsp.apply_fir(x, c), c)
        np.testing.assert_allclose(y, x, rtol=1e-9, atol=1e-9 * max(1.0, np.max(np.abs(x))))

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, st.integers(1, 300), elements=finite), st.floats(0.01, 0.99))
    def test_integrate_inverts_fir(self, x, d):
        y = dsp.integrate(dsp.apply_fir(x, [1.0, -d]), d)
        np.testing.assert_allclose(y, x, rtol=1e-9, atol=1e-9 * max(1.0, np.max(np.abs(x))))
        np.testing.assert_allclose(dsp.differentiate(x, d), dsp.apply_fir(x, [1.0, -d]))

    @given(arrays(float, 40, elements=finite), arrays(float, 40, elements=finite),
           finite, finite, arrays(float, st.integers(1, 5), elements=st.floats(-2, 2)))
    def test_fir_linear(self, x, y, a, b, tail):
        c = np.concatenate([[1.0], tail])
        lhs = dsp.apply_fir(a * x + b * y, c)
        rhs = a * dsp.apply_fir(x, c) + b * dsp.apply_fir(y, c)
        scale = max(1.0, np.max(np.abs(lhs)))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * scale * 1e3)


class TestPeriodicity:
    def test_nccf_periodic(self):
        x = np.tile(np.random.default_rng(0).standard_normal(50), 10)
        c = dsp.nccf(x, 40, 110)
        assert c[50 - 40] == pytest.approx(1.0)
        assert c[100 - 40] == pytest.approx(1.0)

    def test_nccf_matches_direct(self, rng):
        x = rng.standard_normal(300)
        c = dsp.nccf(x, 5, 60)
        xm = x - x.mean()
        for lag in (5, 17, 60):
            a, b = xm[:-lag], xm[lag:]
            assert c[lag - 5] == pytest.approx(a @ b / np.sqrt((a @ a) * (b @ b)), abs=1e-10)

    def test_periodicity_sine(self):
        t = np.arange(2000) / FS
        lag, strength = dsp.periodicity(np.sin(2 * np.pi * 220 * t), FS, 60, 500)
        assert FS / lag == pytest.approx(220, abs=1.0)
        assert strength > 0.9

    def test_rms_db(self):
        assert dsp.rms_db(np.zeros(5)) == -np.inf
        assert dsp.rms_db(np.ones(5)) == pytest.approx(0.0)
