"""Glottal parameters from glottis poles and harmonic voice-quality features."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import dsp
from .dsp import AudioBuffer
from .gif import NoVoicedFramesError
from .lpc import LpcModel, cubic_roots

logger = logging.getLogger(__name__)

#: Harmonics at or above this frequency are ignored.
HARMONIC_CEILING_HZ = 5000.0


class FeatureError(ValueError):
    """Raised when a feature cannot be computed from the available harmonics."""


@dataclass(frozen=True)
class GlottalParams:
    """Glottal formant frequency and bandwidth, and spectral tilt cutoff (all Hz).

    ``degenerate`` marks an estimate whose real pole was non-positive, so
    ``fst`` was pinned to Nyquist.
    """

    fg: float
    bg: float
    fst: float
    degenerate: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.fg, self.bg, self.fst])


@dataclass(frozen=True)
class HarmonicSeries:
    frequencies: np.ndarray
    amplitudes_db: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        a = np.asarray(self.amplitudes_db, dtype=float)
        if f.shape != a.shape or f.ndim != 1:
            raise ValueError("frequencies and amplitudes_db must be 1-D and equally long")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("harmonic frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "amplitudes_db", a)

    @property
    def n(self) -> int:
        return self.frequencies.size

    @property
    def amplitudes(self) -> np.ndarray:
        return 10.0 ** (self.amplitudes_db / 20.0)


@dataclass(frozen=True)
class SpectralFeatures:
    h1h2: float
    hrf: float
    st: float
    f0: float


def _cutoff(pole: float, sample_rate: float) -> float:
    """Matched-z cutoff of a real pole; non-positive poles map to Nyquist."""
    nyquist = sample_rate / 2.0
    if pole <= 0.0:
        return nyquist
    return min(-np.log(pole) * sample_rate / (2.0 * np.pi), nyquist)


def glottal_params_from_poles(glottis: LpcModel, sample_rate: float) -> GlottalParams:
    """Read (Fg, Bg, Fst) off a third-order glottis model.

    A conjugate pair ``a`` gives ``Fg = angle(a) Fs / 2pi`` and
    ``Bg = -ln|a| Fs / pi``; the real pole ``b`` gives
    ``Fst = -ln(b) Fs / 2pi``. With three real poles the two lowest cutoffs
    form the glottal formant (geometric mean, sum) and the highest is Fst.
    """
    if glottis.order != 3:
        raise ValueError(f"glottis model must be order 3, got {glottis.order}")
    roots = cubic_roots(glottis.coefficients)
    nyquist = sample_rate / 2.0
    pair = roots[1:]
    if pair[0].imag != 0.0:
        a = pair[0] if pair[0].imag > 0 else pair[1]
        b = roots[0].real
        fg = np.angle(a) * sample_rate / (2.0 * np.pi)
        bg = -np.log(np.abs(a)) * sample_rate / np.pi
        degenerate = b <= 0.0
        return GlottalParams(float(fg), float(bg), float(_cutoff(b, sample_rate)), bool(degenerate))

    reals = np.real(roots)
    cut = np.sort([_cutoff(r, sample_rate) for r in reals])
    degenerate = bool(np.any(reals <= 0.0))
    fg = min(np.sqrt(cut[0] * cut[1]), nyquist)
    return GlottalParams(float(fg), float(cut[0] + cut[1]), float(cut[2]), degenerate)


@dataclass
class F0Track:
    times: np.ndarray
    f0: np.ndarray
    voiced: np.ndarray

    def median(self) -> float:
        if not self.voiced.any():
            raise NoVoicedFramesError("no voiced frames in f0 track")
        return float(np.median(self.f0[self.voiced]))


def estimate_f0(buf: AudioBuffer, f_range=(60.0, 500.0), hop_s: float = 0.01,
                voicing_threshold: float = 0.3, floor_db: float = 20.0) -> F0Track:
    """Autocorrelation pitch tracker.

    Frames span three periods of the lowest allowed f0. A frame is voiced
    when its level is within ``floor_db`` of the loudest frame and its
    normalized autocorrelation peak exceeds ``voicing_threshold``.

    Raises
    ------
    NoVoicedFramesError
        If no frame is voiced.
    """
    f_min, f_max = f_range
    if f_min < 50.0 or f_max > 1000.0 or f_min >= f_max:
        raise ValueError(f"f0 range must satisfy 50 <= f_min < f_max <= 1000, got {f_range}")
    fs = buf.sample_rate
    n = min(int(np.ceil(3.0 * fs / f_min)), len(buf))
    hop = max(1, int(round(hop_s * fs)))
    frames = dsp.frame_signal(buf, n, hop, "rect")
    levels = np.array([dsp.rms_db(fr.raw) for fr in frames])
    top = np.max(levels)
    f0 = np.full(len(frames), np.nan)
    voiced = np.zeros(len(frames), dtype=bool)
    for i, fr in enumerate(frames):
        if not np.isfinite(levels[i]) or levels[i] <= top - floor_db:
            continue
        lag, strength = dsp.periodicity(fr.raw, fs, f_min, f_max)
        if strength > voicing_threshold and np.isfinite(lag):
            voiced[i] = True
            f0[i] = fs / lag
    if not voiced.any():
        raise NoVoicedFramesError("no voiced frames found for f0 estimation")
    times = (np.array([fr.start_index for fr in frames]) + n / 2.0) / fs
    return F0Track(times, f0, voiced)


def harmonic_amplitudes(x, f0: float, sample_rate: float,
                        ceiling_hz: float = HARMONIC_CEILING_HZ) -> HarmonicSeries:
    """Harmonic peak amplitudes of ``x`` below ``ceiling_hz``.

    The whole signal is Hann-windowed and zero-padded (at least 8192 bins
    and four times the signal length). Harmonic ``k`` is the spectral
    maximum within ``k*f0 +/- f0/4``, refined by parabolic interpolation on
    the dB magnitude. Amplitudes are scaled so a unit sinusoid reads 0 dB.
    """
    x = np.asarray(x, dtype=float)
    if f0 <= 0:
        raise ValueError("f0 must be positive")
    if x.size < 4 * sample_rate / f0:
        raise FeatureError(f"signal of {x.size} samples covers fewer than 4 periods of {f0:.1f} Hz")
    w = np.hanning(x.size)
    nfft = max(8192, 4 * (1 << int(np.ceil(np.log2(x.size)))))
    mag = np.abs(np.fft.rfft(x * w, nfft)) * 2.0 / w.sum()
    db = 20.0 * np.log10(np.maximum(mag, 1e-300))
    bin_hz = sample_rate / nfft

    freqs, amps = [], []
    k = 1
    while k * f0 < ceiling_hz:
        lo = int(np.ceil((k * f0 - f0 / 4.0) / bin_hz))
        hi = int(np.floor((k * f0 + f0 / 4.0) / bin_hz))
        lo, hi = max(lo, 1), min(hi, db.size - 2)
        i = lo + int(np.argmax(db[lo:hi + 1]))
        y0, y1, y2 = db[i - 1], db[i], db[i + 1]
        denom = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom < 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
        freqs.append((i + shift) * bin_hz)
        amps.append(y1 - 0.25 * (y0 - y2) * shift)
        k += 1
    if len(freqs) < 2:
        raise FeatureError(f"fewer than 2 harmonics of {f0:.1f} Hz below {ceiling_hz:.0f} Hz")
    return HarmonicSeries(np.array(freqs), np.array(amps))


def h1h2(series: HarmonicSeries) -> float:
    """First minus second harmonic level, dB."""
    if series.n < 2:
        raise FeatureError("H1-H2 needs at least 2 harmonics")
    return float(series.amplitudes_db[0] - series.amplitudes_db[1])


def hrf(series: HarmonicSeries) -> float:
    """Harmonic richness factor: summed linear amplitude of harmonics 2..n over H1, in dB."""
    if series.n < 2:
        raise FeatureError("HRF needs at least 2 harmonics")
    a = series.amplitudes
    return float(20.0 * np.log10(a[1:].sum() / a[0]))


def spectral_tilt(series: HarmonicSeries) -> float:
    """Least-squares slope of harmonic level against log10 frequency, dB/decade."""
    if series.n < 3:
        raise FeatureError("spectral tilt needs at least 3 harmonics")
    slope, _ = np.polyfit(np.log10(series.frequencies), series.amplitudes_db, 1)
    return float(slope)


def spectral_features(derivative, f0: float, sample_rate: float) -> SpectralFeatures:
    series = harmonic_amplitudes(derivative, f0, sample_rate)
    return SpectralFeatures(h1h2(series), hrf(series), spectral_tilt(series), float(f0))


def median_params(params: list[GlottalParams]) -> GlottalParams:
    """Per-stimulus parameters: the median of each field over frames."""
    if not params:
        raise ValueError("no frame parameters to summarize")
    arr = np.array([p.as_array() for p in params])
    fg, bg, fst = np.median(arr, axis=0)
    return GlottalParams(float(fg), float(bg), float(fst), any(p.degenerate for p in params))
