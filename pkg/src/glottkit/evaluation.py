"""Corpus-scale comparison of inverse filtering methods.

Every stimulus is decomposed by each requested method; per-stimulus glottal
parameters and harmonic features are then compared across effort classes
with rank-sum statistics.
"""
from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import dsp
from .dsp import AudioBuffer
from .features import (GlottalParams, SpectralFeatures, estimate_f0, glottal_params_from_poles,
                       median_params, spectral_features)
from .gif import AnalysisConfig, Method, UtteranceDecomposition, decompose_utterance
from .manifest import EFFORT_LEVELS, CorpusManifest, StimulusRecord
from .stats import RankSumResult, rank_sum_test

logger = logging.getLogger(__name__)

SPECTRAL_FEATURES = ("h1h2", "hrf", "st")
GLOTTAL_FEATURES = ("fg", "bg", "fst")
ALL_FEATURES = GLOTTAL_FEATURES + SPECTRAL_FEATURES
EFFORT_PAIRS = (("soft", "medium"), ("medium", "loud"), ("soft", "loud"))
THREADS_ENV = "GLOTTKIT_THREADS"


class CorpusError(RuntimeError):
    pass


@dataclass
class StimulusAnalysis:
    utterance: UtteranceDecomposition
    params: GlottalParams
    features: SpectralFeatures
    f0: float
    frame_params: list[GlottalParams]


def analyze_buffer(buf: AudioBuffer, method, cfg: AnalysisConfig = AnalysisConfig()) -> StimulusAnalysis:
    """Decompose one stimulus and reduce it to per-stimulus descriptors.

    Glottal parameters are medians over voiced frames; harmonic features come
    from the assembled glottal flow derivative at the median f0.
    """
    f0 = estimate_f0(buf, (cfg.f0_min, cfg.f0_max), voicing_threshold=cfg.voicing_threshold,
                     floor_db=cfg.voicing_floor_db).median()
    utt = decompose_utterance(buf, method, cfg)
    frame_params = [glottal_params_from_poles(d.glottis, buf.sample_rate) for d in utt.frames]
    feats = spectral_features(utt.glottal_flow_derivative, f0, buf.sample_rate)
    return StimulusAnalysis(utt, median_params(frame_params), feats, f0, frame_params)


@dataclass
class ResultRow:
    path: str
    vowel: str
    effort: str
    speaker: str
    method: str
    ok: bool = False
    error: str = ""
    n_frames: int = 0
    f0: float = float("nan")
    fg: float = float("nan")
    bg: float = float("nan")
    fst: float = float("nan")
    degenerate: bool = False
    h1h2: float = float("nan")
    hrf: float = float("nan")
    st: float = float("nan")
    fg_true: float = float("nan")
    bg_true: float = float("nan")
    fst_true: float = float("nan")
    fg_abs_err: float = float("nan")
    bg_abs_err: float = float("nan")
    fst_abs_err: float = float("nan")

    def value(self, feature: str) -> float:
        return getattr(self, feature)


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]


def _stimulus_rows(record: StimulusRecord, methods, cfg: AnalysisConfig) -> list[ResultRow]:
    base = dict(path=str(record.path), vowel=record.vowel, effort=record.effort, speaker=record.speaker)
    truth = record.ground_truth
    if truth is not None:
        base.update(fg_true=truth.fg, bg_true=truth.bg, fst_true=truth.fst)
    try:
        buf = dsp.load_wav(record.path)
    except Exception as exc:  # noqa: BLE001 - any load failure is recorded per row
        return [ResultRow(method=m.value, error=f"{type(exc).__name__}: {exc}", **base) for m in methods]

    rows = []
    for m in methods:
        row = ResultRow(method=m.value, **base)
        try:
            res = analyze_buffer(buf, m, cfg)
        except Exception as exc:  # noqa: BLE001
            row.error = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        row.ok = True
        row.n_frames = res.utterance.n_analyzed
        row.f0 = res.f0
        row.fg, row.bg, row.fst = res.params.fg, res.params.bg, res.params.fst
        row.degenerate = res.params.degenerate
        row.h1h2, row.hrf, row.st = res.features.h1h2, res.features.hrf, res.features.st
        if truth is not None:
            row.fg_abs_err = abs(row.fg - truth.fg)
            row.bg_abs_err = abs(row.bg - truth.bg)
            row.fst_abs_err = abs(row.fst - truth.fst)
        rows.append(row)
    return rows


def _job(args):
    return _stimulus_rows(*args)


def worker_count(requested: int | None = None) -> int:
    """Worker processes to use: ``requested`` (default: CPU count), capped by ``GLOTTKIT_THREADS``."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    env = os.environ.get(THREADS_ENV)
    if env:
        n = min(n, int(env))
    return max(1, int(n))


def run_corpus(manifest: CorpusManifest, methods=tuple(Method), cfg: AnalysisConfig = AnalysisConfig(),
               workers: int | None = None) -> list[ResultRow]:
    """Analyze every stimulus with every method.

    Failures are kept as rows with ``ok=False`` and an error message. Row
    order follows the manifest, then ``methods``. Parallelism is capped by
    ``workers`` or the ``GLOTTKIT_THREADS`` environment variable.

    Raises
    ------
    CorpusError
        If the manifest is empty or no row succeeds.
    """
    if len(manifest) == 0:
        raise CorpusError("empty manifest")
    methods = [Method.parse(m) for m in methods]
    if not methods:
        raise CorpusError("no methods requested")
    jobs = [(rec, methods, cfg) for rec in manifest]
    n_workers = min(worker_count(workers), len(jobs))
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            nested = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * n_workers))))
    else:
        nested = [_job(j) for j in jobs]
    rows = [r for group in nested for r in group]
    if not any(r.ok for r in rows):
        raise CorpusError(f"all {len(rows)} rows failed; first error: {rows[0].error}")
    n_failed = sum(not r.ok for r in rows)
    if n_failed:
        logger.warning("%d of %d analyses failed", n_failed, len(rows))
    return rows


def write_results_csv(rows: list[ResultRow], path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            d = asdict(r)
            writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in d.items()})


def _values(rows, method: str, effort: str, feature: str) -> np.ndarray:
    v = [r.value(feature) for r in rows if r.ok and r.method == method and r.effort == effort]
    v = np.asarray(v, dtype=float)
    return v[np.isfinite(v)]


@dataclass
class ClassSummary:
    method: str
    feature: str
    effort: str
    n: int
    q1: float
    median: float
    q3: float


@dataclass
class DiscriminationReport:
    tests: list[RankSumResult]
    summaries: list[ClassSummary]
    excluded: dict[str, int] = field(default_factory=dict)

    def get(self, method, feature, pair) -> RankSumResult:
        method = Method.parse(method).value
        for t in self.tests:
            if t.method == method and t.feature == feature and t.pair == tuple(pair):
                return t
        raise KeyError((method, feature, pair))

    def median(self, method, feature, effort) -> float:
        method = Method.parse(method).value
        for s in self.summaries:
            if s.method == method and s.feature == feature and s.effort == effort:
                return s.median
        raise KeyError((method, feature, effort))

    def to_dict(self) -> dict:
        return {
            "tests": [
                {"method": t.method, "feature": t.feature, "pair": list(t.pair), "statistic": t.statistic,
                 "p_value": t.p_value, "normalized": t.normalized, "significant": t.significant}
                for t in self.tests
            ],
            "excluded": self.excluded,
        }


def class_summaries(rows, methods, features=ALL_FEATURES) -> list[ClassSummary]:
    out = []
    for m in methods:
        for feat in features:
            for effort in EFFORT_LEVELS:
                v = _values(rows, m, effort, feat)
                if v.size:
                    q1, med, q3 = np.percentile(v, [25, 50, 75])
                else:
                    q1 = med = q3 = float("nan")
                out.append(ClassSummary(m, feat, effort, int(v.size), float(q1), float(med), float(q3)))
    return out


def discrimination_report(rows: list[ResultRow], features=SPECTRAL_FEATURES, pairs=EFFORT_PAIRS,
                          methods=None) -> DiscriminationReport:
    """Rank-sum test and normalized overlap per method x feature x effort pair.

    Distribution summaries (quartiles per class) cover the glottal
    parameters and the spectral features. Failed rows are left out and
    counted per method.

    Raises
    ------
    ValueError
        If a class needed by ``pairs`` has fewer than 2 successful rows.
    """
    if methods is None:
        seen = []
        for r in rows:
            if r.method not in seen:
                seen.append(r.method)
        methods = seen
    methods = [Method.parse(m).value for m in methods]
    excluded = {m: sum(1 for r in rows if r.method == m and not r.ok) for m in methods}

    tests = []
    for m in methods:
        for feat in features:
            for a, b in pairs:
                xa = _values(rows, m, a, feat)
                xb = _values(rows, m, b, feat)
                for cls, v in ((a, xa), (b, xb)):
                    if v.size < 2:
                        raise ValueError(f"class {cls!r} has {v.size} usable {feat} values for {m}; need 2")
                tests.append(rank_sum_test(xa, xb, (a, b), feat, m))
    return DiscriminationReport(tests, class_summaries(rows, methods), excluded)


def ground_truth_errors(rows: list[ResultRow]) -> dict:
    """Absolute and relative error statistics per method and glottal parameter."""
    out = {}
    methods = sorted({r.method for r in rows})
    for m in methods:
        sel = [r for r in rows if r.method == m and r.ok and np.isfinite(r.fg_true)]
        if not sel:
            continue
        stats = {"n": len(sel)}
        for p in GLOTTAL_FEATURES:
            est = np.array([getattr(r, p) for r in sel])
            true = np.array([getattr(r, f"{p}_true") for r in sel])
            rel = np.abs(est - true) / true
            stats[p] = {
                "median_abs_error": float(np.median(np.abs(est - true))),
                "mean_abs_error": float(np.mean(np.abs(est - true))),
                "median_rel_error": float(np.median(rel)),
            }
        out[m] = stats
    return out
