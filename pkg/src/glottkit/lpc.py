"""Autocorrelation-method linear prediction and pole handling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import Frame, PolynomialFilter, is_stable, window_samples

#: Roots pushed outside or onto the unit circle end up at most this far out.
STABILITY_RADIUS = 0.995
#: Relative white-noise floor added to r[0] before the recursion.
NOISE_FLOOR = 1e-9


class DegenerateFrameError(ValueError):
    """Raised when a frame carries no energy to model."""


@dataclass
class LpcModel:
    """All-pole model ``gain / A(z)``."""

    polynomial: PolynomialFilter
    gain: float = 1.0
    reflection: np.ndarray | None = None

    @classmethod
    def from_coefficients(cls, coefficients, gain: float = 1.0, reflection=None) -> "LpcModel":
        return cls(PolynomialFilter(coefficients, role="all-pole"), float(gain), reflection)

    @property
    def coefficients(self) -> np.ndarray:
        return self.polynomial.coefficients

    @property
    def order(self) -> int:
        return self.polynomial.order

    @property
    def is_stable(self) -> bool:
        return is_stable(self.coefficients)

    def poles(self) -> np.ndarray:
        if self.order == 3:
            return cubic_roots(self.coefficients)
        return np.roots(self.coefficients)


def autocorrelate(frame, max_lag: int) -> np.ndarray:
    """Biased autocorrelation ``r[k] = sum_n x[n] x[n+k]`` for ``k = 0..max_lag``."""
    x = frame.samples if isinstance(frame, Frame) else np.asarray(frame, dtype=float)
    if max_lag >= x.size:
        raise ValueError(f"max_lag {max_lag} must be smaller than the frame length {x.size}")
    n = x.size
    # FFT correlation for long frames; direct sums otherwise
    if n > 512:
        nfft = 1 << int(np.ceil(np.log2(2 * n - 1)))
        spec = np.fft.rfft(x, nfft)
        r = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]
    else:
        r = np.array([np.dot(x[: n - k], x[k:]) for k in range(max_lag + 1)])
    return r


def levinson_durbin(r, order: int) -> LpcModel:
    """Solve the Toeplitz normal equations by the Levinson-Durbin recursion.

    Parameters
    ----------
    r : array_like
        Autocorrelation sequence, at least ``order + 1`` long.
    order : int
        Prediction order.

    Returns
    -------
    LpcModel
        Prediction polynomial ``[1, a1, ..., aN]``; gain is the square root
        of the final prediction error and ``reflection`` holds the
        reflection coefficients.
    """
    r = np.asarray(r, dtype=float)
    if order < 1:
        raise ValueError("order must be >= 1")
    if r.size < order + 1:
        raise ValueError(f"need {order + 1} autocorrelation lags, got {r.size}")
    if not np.all(np.isfinite(r[: order + 1])):
        raise ValueError("autocorrelation contains non-finite values")
    if r[0] <= 0.0:
        raise DegenerateFrameError("zero-energy frame: r[0] == 0")

    a = np.zeros(order + 1)
    a[0] = 1.0
    k = np.zeros(order)
    err = r[0]
    for i in range(1, order + 1):
        acc = r[i] + np.dot(a[1:i], r[i - 1:0:-1])
        ki = -acc / err
        k[i - 1] = ki
        a[1:i] = a[1:i] + ki * a[i - 1:0:-1]
        a[i] = ki
        err *= 1.0 - ki * ki
        if err <= 0.0:
            # perfectly predictable input; keep the polynomial found so far
            err = np.finfo(float).tiny
    return LpcModel.from_coefficients(a, np.sqrt(err), k)


def stabilize(model: LpcModel, radius: float = STABILITY_RADIUS) -> LpcModel:
    """Reflect roots on or outside the unit circle to ``1/conj(z)``.

    Reflected roots still at or beyond ``radius`` are pulled in to ``radius``.
    The gain is rescaled so the magnitude response is unchanged by the
    reflection itself. Stable models are returned as-is.
    """
    if model.is_stable:
        return model
    roots = np.roots(model.coefficients)
    mag = np.abs(roots)
    outside = mag >= 1.0
    scale = np.prod(mag[outside])
    roots = roots.astype(complex)
    roots[outside] = 1.0 / np.conj(roots[outside])
    mag = np.abs(roots)
    clamp = outside & (mag >= radius)
    roots[clamp] *= radius / mag[clamp]
    coeffs = np.real(np.poly(roots))
    return LpcModel.from_coefficients(coeffs, model.gain / scale)


def lpc_analyze(x, order: int, window: str | None = "hann") -> LpcModel:
    """Windowed autocorrelation LPC of ``x``, stabilized.

    A relative white-noise floor of 1e-9 is added to r[0] so the normal
    equations stay positive definite.
    """
    x = np.asarray(x.samples if isinstance(x, Frame) else x, dtype=float)
    if window is not None:
        x = x * window_samples(window, x.size)
    if not np.any(x):
        raise DegenerateFrameError("all-zero frame")
    r = autocorrelate(x, order)
    r[0] *= 1.0 + NOISE_FLOOR
    model = levinson_durbin(r, order)
    return stabilize(model)


def _poly_eval(c: np.ndarray, z):
    # c = [1, c1, c2, c3] are coefficients of z^3 + c1 z^2 + c2 z + c3
    return ((z + c[1]) * z + c[2]) * z + c[3]


def cubic_roots(coefficients) -> np.ndarray:
    """Roots (in z) of ``1 + c1 z^-1 + c2 z^-2 + c3 z^-3``.

    One real root is taken from the closed-form solution and polished by
    Newton steps; the remaining quadratic comes from deflation. The result is
    ordered real root first, then the pair (or the other two real roots).
    """
    c = np.asarray(coefficients, dtype=float)
    if c.size != 4:
        raise ValueError(f"expected a degree-3 polynomial (4 coefficients), got {c.size}")
    if c[0] != 1.0:
        raise ValueError("leading coefficient must be 1")
    _, b, cc, d = c

    # depressed cubic t^3 + p t + q with z = t - b/3
    p = cc - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * cc / 3.0 + d
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc >= 0:
        s = np.sqrt(disc)
        t = np.cbrt(-q / 2.0 + s) + np.cbrt(-q / 2.0 - s)
    else:
        # three real roots: take the largest trigonometric one
        m = 2.0 * np.sqrt(-p / 3.0)
        arg = np.clip(3.0 * q / (p * m), -1.0, 1.0)
        t = m * np.cos(np.arccos(arg) / 3.0)
    z0 = t - b / 3.0

    for _ in range(8):
        f = _poly_eval(c, z0)
        df = (3.0 * z0 + 2.0 * b) * z0 + cc
        if df == 0.0 or f == 0.0:
            break
        step = f / df
        z0 -= step
        if abs(step) <= 1e-16 * max(1.0, abs(z0)):
            break

    # deflate: z^2 + e1 z + e2
    e1 = b + z0
    e2 = cc + z0 * e1
    qd = e1 * e1 - 4.0 * e2
    if qd >= 0:
        sq = np.sqrt(qd)
        big = -0.5 * (e1 + np.copysign(sq, e1)) if e1 != 0 else 0.5 * sq
        other = e2 / big if big != 0 else -big
        pair = np.array([big, other], dtype=complex)
    else:
        re = -e1 / 2.0
        im = np.sqrt(-qd) / 2.0
        pair = np.array([re + 1j * im, re - 1j * im])
    return np.concatenate([[complex(z0)], pair])


def poly_from_roots(roots) -> np.ndarray:
    """Real monic coefficients ``[1, c1, ...]`` of the polynomial with these roots."""
    return np.real(np.poly(np.asarray(roots)))


def response_db(model: LpcModel, freqs, sample_rate: float) -> np.ndarray:
    """``20 log10 |gain / A(e^{jw})|`` at arbitrary frequencies in Hz."""
    w = 2.0 * np.pi * np.asarray(freqs, dtype=float) / sample_rate
    zinv = np.exp(-1j * w)
    a = np.polyval(model.coefficients[::-1], zinv)
    return 20.0 * np.log10(model.gain / np.abs(a))


def frequency_response(model: LpcModel, n_points: int, sample_rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude response in dB on ``n_points`` uniform frequencies from 0 to Nyquist."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    freqs = np.linspace(0.0, sample_rate / 2.0, n_points)
    return freqs, response_db(model, freqs, sample_rate)
