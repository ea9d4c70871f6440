"""Glottal inverse filtering: IAIF, GFM-IAIF and IOP-IAIF.

Each pipeline maps one frame of speech to a :class:`SourceFilterDecomposition`.
LPC is computed on windowed signals; inverse filtering is applied to the
unwindowed frame with zero initial state.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .dsp import AudioBuffer, Frame, apply_allpole, apply_fir, differentiate, integrate
from .lpc import DegenerateFrameError, LpcModel, lpc_analyze

GLOTTIS_MODEL_ORDER = 3


class Method(str, enum.Enum):
    IAIF = "iaif"
    GFM_IAIF = "gfm-iaif"
    IOP_IAIF = "iop-iaif"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for m in cls:
            if m.value == key:
                return m
        raise ValueError(f"unknown method {value!r}; expected one of {[m.value for m in cls]}")


class NoVoicedFramesError(ValueError):
    """Raised when an utterance has no frame passing the voicing gate."""


@dataclass(frozen=True)
class AnalysisConfig:
    """Analysis settings shared by all pipelines.

    ``vt_order`` of ``None`` means ``sample_rate // 1000 + 4``.
    """

    lip_d: float = 0.99
    vt_order: int | None = None
    glottis_fine_order: int = 3
    frame_len_ms: float = 32.0
    hop_fraction: float = 0.5
    window: str = "hann"
    iop_gain_threshold: float = 0.1
    max_iop_order: int = 30
    f0_min: float = 60.0
    f0_max: float = 500.0
    voicing_threshold: float = 0.3
    voicing_floor_db: float = 20.0

    def __post_init__(self):
        if not 0.0 < self.lip_d < 1.0:
            raise ValueError(f"lip_d must lie in (0, 1), got {self.lip_d}")
        if self.vt_order is not None and self.vt_order < 4:
            raise ValueError(f"vt_order must be >= 4, got {self.vt_order}")
        if self.glottis_fine_order < 1:
            raise ValueError("glottis_fine_order must be >= 1")
        if self.frame_len_ms <= 0:
            raise ValueError("frame_len_ms must be positive")
        if not 0.0 < self.hop_fraction <= 1.0:
            raise ValueError("hop_fraction must lie in (0, 1]")
        if not 0.0 < self.iop_gain_threshold < 1.0:
            raise ValueError("iop_gain_threshold must lie in (0, 1)")
        if self.max_iop_order < 1:
            raise ValueError("max_iop_order must be >= 1")
        if not 50.0 <= self.f0_min < self.f0_max <= 1000.0:
            raise ValueError("need 50 <= f0_min < f0_max <= 1000")
        dsp.window_samples(self.window, 8)

    def vt_order_for(self, sample_rate: int) -> int:
        return self.vt_order if self.vt_order is not None else int(sample_rate) // 1000 + 4

    def frame_len(self, sample_rate: int) -> int:
        return int(round(self.frame_len_ms * sample_rate / 1000.0))

    def hop(self, sample_rate: int) -> int:
        return max(1, int(round(self.frame_len(sample_rate) * self.hop_fraction)))

    def replace(self, **changes) -> "AnalysisConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Short stable hash of every field."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_mapping(cls, values: dict) -> "AnalysisConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            name = key.strip().replace("-", "_")
            if name not in fields:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[name] = _coerce(name, raw)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "AnalysisConfig":
        """Parse a flat ``key = value`` text file; ``#`` starts a comment."""
        values = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        return cls.from_mapping(values)


_INT_FIELDS = {"vt_order", "glottis_fine_order", "max_iop_order"}
_STR_FIELDS = {"window"}


def _coerce(name, raw):
    if not isinstance(raw, str):
        return raw
    if name in _STR_FIELDS:
        return raw
    if name == "vt_order" and raw.lower() in ("", "none", "auto"):
        return None
    return int(raw) if name in _INT_FIELDS else float(raw)


@dataclass
class SourceFilterDecomposition:
    """Glottis, vocal tract and lip radiation estimated from one frame."""

    glottis: LpcModel
    vocal_tract: LpcModel
    lip_d: float
    glottal_flow: np.ndarray
    glottal_flow_derivative: np.ndarray
    method: Method
    gross_glottis: LpcModel | None = None
    start_index: int = 0

    def residual(self, x) -> np.ndarray:
        """Excitation left after removing lip radiation, vocal tract and glottis from ``x``."""
        return apply_fir(apply_fir(integrate(_samples(x), self.lip_d), self.vocal_tract), self.glottis)

    def reconstruct(self, residual) -> np.ndarray:
        """Run ``residual`` back through glottis, vocal tract and lip radiation."""
        y = apply_allpole(residual, self.glottis)
        y = apply_allpole(y, self.vocal_tract)
        return differentiate(y, self.lip_d)


def _samples(frame) -> np.ndarray:
    if isinstance(frame, Frame):
        return frame.raw
    return np.asarray(frame, dtype=float)


def _prepare(frame, cfg: AnalysisConfig, sample_rate):
    x = _samples(frame)
    if sample_rate is None and cfg.vt_order is None:
        raise ValueError("either sample_rate or cfg.vt_order is needed to size the vocal tract model")
    nv = cfg.vt_order if sample_rate is None else cfg.vt_order_for(sample_rate)
    if x.size < 4 * nv:
        raise ValueError(f"frame of {x.size} samples is shorter than 4 * vt_order = {4 * nv}")
    if not np.any(x):
        raise DegenerateFrameError("all-zero frame")
    return x, nv


def _first_order_chain(base, n_iter, window, stop_below=None):
    """Repeated order-1 LPC + inverse filtering of ``base``.

    Each stage is estimated on ``base`` filtered by the product of all
    previous stages. Returns the accumulated polynomial.
    """
    acc = np.array([1.0])
    residual = base
    for _ in range(n_iter):
        stage = lpc_analyze(residual, 1, window).coefficients
        acc = np.convolve(acc, stage)
        residual = apply_fir(base, acc)
        if stop_below is not None and abs(stage[1]) < stop_below:
            break
    return LpcModel.from_coefficients(acc)


def _finish(x, speech_int, vt_gross, cfg, nv, fine_order, method, gross, start):
    # fine glottis: vocal tract and lip removed
    g1 = apply_fir(speech_int, vt_gross)
    glottis = lpc_analyze(g1, fine_order, cfg.window)
    # fine vocal tract: glottis and lip removed
    v = apply_fir(speech_int, glottis)
    vocal_tract = lpc_analyze(v, nv, cfg.window)
    derivative = apply_fir(x, vocal_tract)
    return SourceFilterDecomposition(
        glottis=glottis,
        vocal_tract=vocal_tract,
        lip_d=cfg.lip_d,
        glottal_flow=integrate(derivative, cfg.lip_d),
        glottal_flow_derivative=derivative,
        method=method,
        gross_glottis=gross,
        start_index=start,
    )


def iaif_decompose(frame, cfg: AnalysisConfig = AnalysisConfig(), sample_rate=None) -> SourceFilterDecomposition:
    """Classic IAIF.

    A first-order LPC of the speech stands in for glottis plus lip
    radiation; the vocal tract and glottis are then refined in turn.
    """
    x, nv = _prepare(frame, cfg, sample_rate)
    gross = lpc_analyze(x, 1, cfg.window)
    vt_gross = lpc_analyze(apply_fir(x, gross), nv, cfg.window)
    speech_int = integrate(x, cfg.lip_d)
    return _finish(x, speech_int, vt_gross, cfg, nv, cfg.glottis_fine_order,
                   Method.IAIF, gross, getattr(frame, "start_index", 0))


def gfm_iaif_decompose(frame, cfg: AnalysisConfig = AnalysisConfig(), sample_rate=None) -> SourceFilterDecomposition:
    """IAIF with a third-order glottal flow model.

    The frame is integrated to cancel lip radiation. The gross glottis is the
    product of three successive first-order LPC stages, so it never models
    vocal tract formants; the fine glottis is an order-3 LPC.
    """
    if cfg.glottis_fine_order != GLOTTIS_MODEL_ORDER:
        raise ValueError(f"GFM-IAIF needs glottis_fine_order == 3, got {cfg.glottis_fine_order}")
    x, nv = _prepare(frame, cfg, sample_rate)
    speech_int = integrate(x, cfg.lip_d)
    gross = _first_order_chain(speech_int, GLOTTIS_MODEL_ORDER, cfg.window)
    vt_gross = lpc_analyze(apply_fir(speech_int, gross), nv, cfg.window)
    return _finish(x, speech_int, vt_gross, cfg, nv, GLOTTIS_MODEL_ORDER,
                   Method.GFM_IAIF, gross, getattr(frame, "start_index", 0))


def iop_iaif_decompose(frame, cfg: AnalysisConfig = AnalysisConfig(), sample_rate=None) -> SourceFilterDecomposition:
    """IAIF with iterative high-order pre-emphasis.

    First-order stages are stacked on the speech until a stage's
    coefficient magnitude drops below ``cfg.iop_gain_threshold`` (that stage
    is kept) or ``cfg.max_iop_order`` stages exist. The fine glottis is
    order 3 whatever the pre-emphasis order.
    """
    x, nv = _prepare(frame, cfg, sample_rate)
    gross = _first_order_chain(x, cfg.max_iop_order, cfg.window, stop_below=cfg.iop_gain_threshold)
    vt_gross = lpc_analyze(apply_fir(x, gross), nv, cfg.window)
    speech_int = integrate(x, cfg.lip_d)
    return _finish(x, speech_int, vt_gross, cfg, nv, GLOTTIS_MODEL_ORDER,
                   Method.IOP_IAIF, gross, getattr(frame, "start_index", 0))


DECOMPOSERS = {
    Method.IAIF: iaif_decompose,
    Method.GFM_IAIF: gfm_iaif_decompose,
    Method.IOP_IAIF: iop_iaif_decompose,
}


def decompose(frame, method, cfg: AnalysisConfig = AnalysisConfig(), sample_rate=None):
    return DECOMPOSERS[Method.parse(method)](frame, cfg, sample_rate)


@dataclass
class UtteranceDecomposition:
    """Frame-wise decompositions of one utterance plus the assembled source signals."""

    method: Method
    sample_rate: int
    frame_len: int
    hop: int
    frames: list[SourceFilterDecomposition]
    voiced: np.ndarray
    glottal_flow_derivative: np.ndarray
    glottal_flow: np.ndarray
    config: AnalysisConfig = field(default_factory=AnalysisConfig)

    @property
    def n_analyzed(self) -> int:
        return len(self.frames)


def voiced_mask(frames, sample_rate: int, cfg: AnalysisConfig) -> np.ndarray:
    """Voicing gate: level within ``voicing_floor_db`` of the loudest frame and periodic.

    Periodicity is the peak normalized autocorrelation over the pitch range.
    """
    levels = np.array([dsp.rms_db(f.raw) for f in frames])
    if not np.any(np.isfinite(levels)):
        return np.zeros(len(frames), dtype=bool)
    loud = levels > np.max(levels) - cfg.voicing_floor_db
    mask = np.zeros(len(frames), dtype=bool)
    for i, f in enumerate(frames):
        if loud[i]:
            _, strength = dsp.periodicity(f.raw, sample_rate, cfg.f0_min, cfg.f0_max)
            mask[i] = strength > cfg.voicing_threshold
    return mask


def decompose_utterance(buf: AudioBuffer, method, cfg: AnalysisConfig = AnalysisConfig()) -> UtteranceDecomposition:
    """Decompose every voiced frame of ``buf`` and assemble the source signals.

    The derivative of each voiced frame is its unwindowed samples
    inverse-filtered by that frame's fine vocal tract; the central
    hop-length segments are concatenated in time order.
    """
    method = Method.parse(method)
    fs = buf.sample_rate
    n = cfg.frame_len(fs)
    hop = cfg.hop(fs)
    if len(buf) <= n:
        raise ValueError(f"buffer of {len(buf)} samples is not longer than one frame ({n})")
    frames = dsp.frame_signal(buf, n, hop, cfg.window)
    mask = voiced_mask(frames, fs, cfg)
    if not mask.any():
        raise NoVoicedFramesError("no voiced frames found")

    fn = DECOMPOSERS[method]
    offset = (n - hop) // 2
    results, segments = [], []
    for frame, is_voiced in zip(frames, mask):
        if not is_voiced:
            continue
        dec = fn(frame, cfg, fs)
        results.append(dec)
        segments.append(dec.glottal_flow_derivative[offset:offset + hop])
    derivative = np.concatenate(segments)
    return UtteranceDecomposition(
        method=method,
        sample_rate=fs,
        frame_len=n,
        hop=hop,
        frames=results,
        voiced=mask,
        glottal_flow_derivative=derivative,
        glottal_flow=integrate(derivative, cfg.lip_d),
        config=cfg,
    )

