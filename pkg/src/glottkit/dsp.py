"""Audio containers, WAV I/O, framing and elementary filters.

All filters run with zero initial state on every call.
"""
from __future__ import annotations

import functools
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window, lfilter

logger = logging.getLogger(__name__)

_WINDOW_ALIASES = {
    "rect": "boxcar",
    "rectangular": "boxcar",
    "boxcar": "boxcar",
    "hann": "hann",
    "hanning": "hann",
    "hamming": "hamming",
    "blackman": "blackman",
}


class WavError(ValueError):
    """Raised when a WAV file cannot be ingested."""


class UnstableFilterError(ValueError):
    """Raised when an all-pole filter has roots on or outside the unit circle."""


@dataclass
class AudioBuffer:
    """Mono signal with its sample rate.

    Parameters
    ----------
    samples : array_like
        Real amplitudes, nominally in [-1, 1].
    sample_rate : int
        Sampling frequency in Hz.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain NaN or Inf")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class Frame:
    """Windowed excerpt of a parent buffer.

    ``samples`` holds the windowed excerpt; ``raw`` the same span before
    windowing (inverse filtering operates on the latter).
    """

    samples: np.ndarray
    start_index: int
    window: str
    raw: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.raw is None:
            self.raw = self.samples.copy()
        else:
            self.raw = np.asarray(self.raw, dtype=float)

    def __len__(self):
        return self.samples.size


@dataclass
class PolynomialFilter:
    """Monic polynomial ``[1, k1, ..., kN]`` in powers of z^-1.

    ``role`` is ``"inverse-fir"`` or ``"all-pole"``; it documents intent only.
    """

    coefficients: np.ndarray
    role: str = "inverse-fir"

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        if c[0] != 1.0:
            raise ValueError(f"leading coefficient must be 1, got {c[0]}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        self.coefficients = c

    @property
    def order(self) -> int:
        return self.coefficients.size - 1


def _coefficients(filt) -> np.ndarray:
    if isinstance(filt, PolynomialFilter):
        return filt.coefficients
    if hasattr(filt, "polynomial"):  # LpcModel
        return filt.polynomial.coefficients
    return PolynomialFilter(filt).coefficients


def window_samples(name: str, n: int) -> np.ndarray:
    """Symmetric window of length ``n`` by identifier (read-only array)."""
    key = _WINDOW_ALIASES.get(name.lower())
    if key is None:
        raise ValueError(f"unknown window {name!r}")
    return _window(key, int(n))


@functools.lru_cache(maxsize=64)
def _window(key: str, n: int) -> np.ndarray:
    w = get_window(key, n, fftbins=False)
    w.flags.writeable = False
    return w


def load_wav(path) -> AudioBuffer:
    """Read a 16-bit PCM or 32-bit float WAV file.

    Integer samples are scaled by 1/32768. Multichannel files keep channel 0
    and log a warning.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:  # scipy raises a mix of ValueError/struct errors
        raise WavError(f"cannot read {path}: {exc}") from exc

    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(float)
    else:
        raise WavError(f"{path}: unsupported sample format {data.dtype}")

    if x.ndim == 2:
        if x.shape[1] > 1:
            logger.warning("%s has %d channels; keeping channel 0", path, x.shape[1])
        x = x[:, 0]
    if x.size == 0:
        raise WavError(f"{path}: zero-length audio")
    if not np.all(np.isfinite(x)):
        raise WavError(f"{path}: non-finite samples")
    return AudioBuffer(x, rate)


def write_wav(path, buf: AudioBuffer, comment: str | None = None) -> None:
    """Write ``buf`` as 16-bit PCM, optionally with a LIST/INFO comment chunk.

    Samples are clipped to [-1, 32767/32768]. The output depends only on the
    arguments, so identical inputs give byte-identical files.
    """
    pcm = np.clip(np.round(buf.samples * 32768.0), -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    fmt = struct.pack("<HHIIHH", 1, 1, buf.sample_rate, buf.sample_rate * 2, 2, 16)
    chunks = [b"fmt " + struct.pack("<I", len(fmt)) + fmt,
              b"data" + struct.pack("<I", len(data)) + data + (b"\0" if len(data) % 2 else b"")]
    if comment:
        text = comment.encode("utf-8") + b"\0"
        if len(text) % 2:
            text += b"\0"
        info = b"INFO" + b"ICMT" + struct.pack("<I", len(text)) + text
        chunks.append(b"LIST" + struct.pack("<I", len(info)) + info)
    body = b"WAVE" + b"".join(chunks)
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def frame_signal(buf: AudioBuffer, frame_len: int, hop: int, window: str = "hann") -> list[Frame]:
    """Cut ``buf`` into overlapping windowed frames; a trailing partial frame is dropped."""
    n = len(buf)
    if frame_len > n:
        raise ValueError(f"frame_len {frame_len} exceeds buffer length {n}")
    if not 0 < hop <= frame_len:
        raise ValueError(f"need 0 < hop <= frame_len, got hop={hop}, frame_len={frame_len}")
    w = window_samples(window, frame_len)
    if np.sum(w * w) <= 0:
        raise ValueError(f"window {window!r} has zero energy at length {frame_len}")
    frames = []
    for start in range(0, n - frame_len + 1, hop):
        raw = buf.samples[start:start + frame_len]
        frames.append(Frame(raw * w, start, window, raw.copy()))
    return frames


def apply_fir(x, filt) -> np.ndarray:
    """Inverse-filter ``x`` by a monic polynomial: y[n] = sum_k c[k] x[n-k]."""
    return lfilter(_coefficients(filt), [1.0], np.asarray(x, dtype=float))


def is_stable(coefficients) -> bool:
    """Schur-Cohn test via the step-down recursion; True if all roots lie inside |z| < 1."""
    a = np.asarray(coefficients, dtype=float)
    a = a / a[0]
    while a.size > 1:
        k = a[-1]
        if not abs(k) < 1.0:
            return False
        a = (a[:-1] - k * a[::-1][:-1]) / (1.0 - k * k)
    return True


def apply_allpole(x, filt, gain: float = 1.0) -> np.ndarray:
    """Synthesis filter: y[n] = gain*x[n] - sum_{k>=1} c[k] y[n-k].

    Raises
    ------
    UnstableFilterError
        If the polynomial has a root on or outside the unit circle.
    """
    c = _coefficients(filt)
    if not is_stable(c):
        raise UnstableFilterError("all-pole filter has roots on or outside the unit circle")
    return lfilter([gain], c, np.asarray(x, dtype=float))


def integrate(x, d: float) -> np.ndarray:
    """Leaky integrator y[n] = x[n] + d*y[n-1], the inverse of ``1 - d z^-1``."""
    if not 0.0 < d < 1.0:
        raise ValueError(f"integration coefficient must lie in (0, 1), got {d}")
    return lfilter([1.0], [1.0, -d], np.asarray(x, dtype=float))


def differentiate(x, d: float) -> np.ndarray:
    """Lip radiation ``1 - d z^-1`` applied to ``x``."""
    return lfilter([1.0, -d], [1.0], np.asarray(x, dtype=float))


def rms_db(x) -> float:
    """RMS level in dB (``-inf`` for silence)."""
    x = np.asarray(x, dtype=float)
    ms = float(np.mean(x * x)) if x.size else 0.0
    return 10.0 * np.log10(ms) if ms > 0 else -np.inf


def nccf(x, min_lag: int, max_lag: int) -> np.ndarray:
    """Normalized cross-correlation of ``x`` with itself for lags ``min_lag..max_lag``.

    Each lag is normalized by the energies of the two overlapping segments,
    so a strictly periodic signal scores 1 at every multiple of its period.
    """
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    n = x.size
    max_lag = min(max_lag, n - 2)
    if max_lag < min_lag:
        return np.zeros(0)
    nfft = 1 << int(np.ceil(np.log2(2 * n - 1)))
    spec = np.fft.rfft(x, nfft)
    lags = np.arange(min_lag, max_lag + 1)
    num = np.fft.irfft(spec * np.conj(spec), nfft)[lags]
    csum = np.concatenate([[0.0], np.cumsum(x * x)])
    den = np.sqrt(csum[n - lags] * (csum[n] - csum[lags]))
    out = np.zeros(lags.size)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def periodicity(x, sample_rate: int, f_min: float, f_max: float) -> tuple[float, float]:
    """Best pitch period of ``x`` within ``[f_min, f_max]``.

    Returns
    -------
    lag : float
        Period in samples, refined by parabolic interpolation (NaN if no
        candidate lag fits in the frame).
    strength : float
        Normalized correlation at that lag, in [-1, 1].
    """
    lo = max(int(np.floor(sample_rate / f_max)), 2)
    hi = int(np.ceil(sample_rate / f_min))
    c = nccf(x, lo - 1, hi + 1)
    if c.size < 3:
        return float("nan"), 0.0
    inner = c[1:-1]
    # first local maximum close to the global one, to avoid period doubling
    best = float(inner.max())
    peaks = [i for i in range(inner.size)
             if c[i + 1] >= c[i] and c[i + 1] >= c[i + 2] and inner[i] >= 0.9 * best]
    i = (peaks[0] if peaks else int(inner.argmax())) + 1
    y0, y1, y2 = c[i - 1], c[i], c[i + 1]
    denom = y0 - 2.0 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom < 0 else 0.0
    return lo - 1 + i + float(np.clip(shift, -0.5, 0.5)), float(y1)
