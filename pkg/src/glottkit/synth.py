"""Synthetic vowels with known glottis, vocal tract and lip radiation.

The chain is impulse train -> third-order glottis -> all-pole vocal tract
-> lip radiation ``1 - d z^-1`` -> additive white noise.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dsp import AudioBuffer, apply_allpole, differentiate, write_wav
from .features import GlottalParams
from .gif import SourceFilterDecomposition
from .lpc import LpcModel, poly_from_roots
from .manifest import EFFORT_LEVELS, CorpusManifest, StimulusRecord

#: Open vowel /a/ up to 10.5 kHz: (frequency, bandwidth) in Hz.
VOWEL_A = (
    (730.0, 80.0), (1090.0, 90.0), (2440.0, 120.0), (3400.0, 150.0),
    (4500.0, 200.0), (5500.0, 250.0), (6500.0, 300.0), (7500.0, 350.0),
    (8500.0, 400.0), (9500.0, 450.0), (10500.0, 500.0),
)

#: Fixture effort classes: formant rises and widens, tilt cutoff rises with effort.
EFFORT_CLASSES = {
    "soft": GlottalParams(120.0, 60.0, 500.0),
    "medium": GlottalParams(160.0, 110.0, 1200.0),
    "loud": GlottalParams(200.0, 160.0, 2500.0),
}


def pole_from_resonance(freq: float, bandwidth: float, sample_rate: float) -> complex:
    """Matched-z pole ``exp(-pi B / Fs) exp(j 2 pi F / Fs)``."""
    return np.exp(-np.pi * bandwidth / sample_rate) * np.exp(2j * np.pi * freq / sample_rate)


def glottis_from_params(params: GlottalParams, sample_rate: float) -> LpcModel:
    """Third-order glottis polynomial with pair ``(Fg, Bg)`` and real pole at ``Fst``."""
    nyquist = sample_rate / 2.0
    if not 0.0 < params.fg < nyquist:
        raise ValueError(f"Fg={params.fg} outside (0, {nyquist})")
    if not params.bg > 0.0:
        raise ValueError(f"Bg must be positive, got {params.bg}")
    if not 0.0 < params.fst <= nyquist:
        raise ValueError(f"Fst={params.fst} outside (0, {nyquist}]")
    a = pole_from_resonance(params.fg, params.bg, sample_rate)
    b = np.exp(-2.0 * np.pi * params.fst / sample_rate)
    return LpcModel.from_coefficients(poly_from_roots([a, np.conj(a), b]))


def vocal_tract_from_formants(formants, sample_rate: float) -> LpcModel:
    nyquist = sample_rate / 2.0
    poles = []
    for freq, bw in formants:
        if not 0.0 < freq < nyquist or bw <= 0.0:
            raise ValueError(f"invalid formant ({freq}, {bw}) at {sample_rate} Hz")
        p = pole_from_resonance(freq, bw, sample_rate)
        poles += [p, np.conj(p)]
    if not poles:
        raise ValueError("formant list is empty")
    return LpcModel.from_coefficients(poly_from_roots(poles))


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic vowel.

    ``noise_floor_db`` is the noise RMS relative to the clean signal RMS;
    ``-inf`` disables noise. ``trim_s`` seconds of start-up transient are
    synthesized and then discarded.
    """

    f0: float = 200.0
    params: GlottalParams = EFFORT_CLASSES["medium"]
    vt_formants: tuple = VOWEL_A
    lip_d: float = 0.99
    duration_s: float = 0.5
    sample_rate: int = 22050
    noise_floor_db: float = -60.0
    seed: int = 0
    trim_s: float = 0.05
    peak: float = 0.9

    def __post_init__(self):
        nyquist = self.sample_rate / 2.0
        if not 0.0 < self.f0 < nyquist:
            raise ValueError("f0 must lie below Nyquist")
        if not self.vt_formants:
            raise ValueError("vt_formants must not be empty")
        if not 0.0 < self.lip_d < 1.0:
            raise ValueError("lip_d must lie in (0, 1)")
        if self.duration_s <= 0 or self.trim_s < 0:
            raise ValueError("duration_s must be positive and trim_s non-negative")

    @property
    def period(self) -> int:
        return int(round(self.sample_rate / self.f0))

    def replace(self, **changes) -> "SynthSpec":
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class Rendering:
    """Every stage of a synthesized vowel, trimmed and scaled alike."""

    buffer: AudioBuffer
    truth: SourceFilterDecomposition
    excitation: np.ndarray
    clean: np.ndarray
    vocal_tract_output: np.ndarray
    scale: float
    onset: int = 0


def render(spec: SynthSpec) -> Rendering:
    fs = spec.sample_rate
    rng = np.random.default_rng(spec.seed)
    trim = int(round(spec.trim_s * fs))
    n = int(round(spec.duration_s * fs)) + trim
    period = spec.period
    onset = int(rng.integers(period))
    excitation = np.zeros(n)
    excitation[onset::period] = 1.0

    glottis = glottis_from_params(spec.params, fs)
    tract = vocal_tract_from_formants(spec.vt_formants, fs)
    flow = apply_allpole(excitation, glottis)
    tract_out = apply_allpole(flow, tract)
    speech = differentiate(tract_out, spec.lip_d)

    sl = slice(trim, None)
    speech = speech[sl]
    peak = np.max(np.abs(speech))
    scale = spec.peak / peak if peak > 0 else 1.0
    clean = speech * scale
    noisy = clean
    if np.isfinite(spec.noise_floor_db):
        level = np.sqrt(np.mean(clean ** 2)) * 10.0 ** (spec.noise_floor_db / 20.0)
        noisy = clean + level * rng.standard_normal(clean.size)

    flow = flow[sl] * scale
    truth = SourceFilterDecomposition(
        glottis=glottis,
        vocal_tract=tract,
        lip_d=spec.lip_d,
        glottal_flow=flow,
        glottal_flow_derivative=differentiate(flow, spec.lip_d),
        method=None,
    )
    return Rendering(
        buffer=AudioBuffer(noisy, fs),
        truth=truth,
        excitation=excitation[sl] * scale,
        clean=clean,
        vocal_tract_output=tract_out[sl] * scale,
        scale=scale,
        onset=onset,
    )


def synthesize(spec: SynthSpec) -> tuple[AudioBuffer, SourceFilterDecomposition]:
    """Synthesize a vowel; returns the signal and its exact decomposition."""
    r = render(spec)
    return r.buffer, r.truth


def _jittered(center: GlottalParams, jitter: float, rng, nyquist: float) -> GlottalParams:
    if jitter == 0:
        return GlottalParams(center.fg, center.bg, center.fst)
    f = center.as_array() * (1.0 + jitter * rng.standard_normal(3))
    fg = float(np.clip(f[0], 1.0, 0.95 * nyquist))
    bg = float(max(f[1], 1.0))
    fst = float(np.clip(f[2], 1.0, 0.95 * nyquist))
    return GlottalParams(fg, bg, fst)


def make_effort_corpus(out_dir, base: SynthSpec = SynthSpec(), classes: dict | None = None,
                       n_per_class: int = 20, jitter: float = 0.05, seed: int = 0,
                       vowel: str = "a", speaker: str = "synth") -> CorpusManifest:
    """Write ``n_per_class`` WAVs per effort class plus ``manifest.csv``.

    Glottal parameters of each stimulus are the class centre with Gaussian
    relative jitter; pulse onset and noise use a per-stimulus seed drawn from
    ``seed``.
    """
    classes = dict(EFFORT_CLASSES if classes is None else classes)
    if list(classes) != list(EFFORT_LEVELS):
        raise ValueError(f"classes must be given in order {EFFORT_LEVELS}, got {list(classes)}")
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    nyquist = base.sample_rate / 2.0
    records = []
    for effort, center in classes.items():
        for i in range(n_per_class):
            params = _jittered(center, jitter, rng, nyquist)
            spec = base.replace(params=params, seed=int(rng.integers(2 ** 31)))
            buf, _ = synthesize(spec)
            path = out_dir / f"{effort}_{i:03d}.wav"
            write_wav(path, buf, comment=f"glottkit {__version__} synth={spec.digest()} seed={spec.seed}")
            records.append(StimulusRecord(path, vowel, effort, speaker, params))
    manifest = CorpusManifest(records)
    manifest.write(out_dir / "manifest.csv", relative_to=out_dir,
                   header_comment=f"glottkit {__version__} base={base.digest()} seed={seed} "
                                  f"jitter={jitter} n_per_class={n_per_class}")
    return manifest
