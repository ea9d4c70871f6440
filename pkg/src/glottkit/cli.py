"""Command-line entry point: ``glottkit {analyze,synth-corpus,evaluate,inspect}``.

Exit codes: 0 success, 1 user or input error, 2 internal numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .dsp import AudioBuffer, UnstableFilterError, WavError, load_wav, write_wav
from .evaluation import (ALL_FEATURES, CorpusError, analyze_buffer, discrimination_report,
                         ground_truth_errors, run_corpus, write_results_csv)
from .features import FeatureError, GlottalParams
from .gif import AnalysisConfig, Method, NoVoicedFramesError
from .lpc import DegenerateFrameError, LpcModel, response_db
from .manifest import EFFORT_LEVELS, CorpusManifest, ManifestError
from .synth import EFFORT_CLASSES, SynthSpec, make_effort_corpus

logger = logging.getLogger("glottkit")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2
ENVELOPE_POINTS = 1024
_USER_ERRORS = (FileNotFoundError, IsADirectoryError, PermissionError, WavError, ManifestError,
                NoVoicedFramesError, DegenerateFrameError, FeatureError, CorpusError, ValueError)


class UsageError(Exception):
    pass


def _metadata(cfg: AnalysisConfig | None = None, seed=None, **extra) -> dict:
    meta = {"tool": "glottkit", "version": __version__,
            "config_hash": cfg.digest() if cfg is not None else None, "seed": seed}
    if cfg is not None:
        meta["config"] = cfg.to_dict()
    meta.update(extra)
    return meta


def _header(meta: dict) -> str:
    return " ".join(f"{k}={meta[k]}" for k in ("tool", "version", "config_hash", "seed"))


def _methods(value: str) -> list[Method]:
    if value.strip().lower() == "all":
        return list(Method)
    out = [Method.parse(v) for v in value.split(",") if v.strip()]
    if not out:
        raise UsageError("no methods given")
    return out


def _config(args) -> AnalysisConfig:
    cfg = AnalysisConfig.from_file(args.config) if getattr(args, "config", None) else AnalysisConfig()
    overrides = {}
    for flag, name in (("lip_d", "lip_d"), ("vt_order", "vt_order"), ("frame_ms", "frame_len_ms")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    return cfg.replace(**overrides) if overrides else cfg


def _mean_envelope(models: list[LpcModel], freqs, fs) -> np.ndarray:
    return np.mean([response_db(m, freqs, fs) for m in models], axis=0)


def _write_analysis(buf: AudioBuffer, stem: str, method: Method, cfg: AnalysisConfig, out: Path) -> list[Path]:
    res = analyze_buffer(buf, method, cfg)
    meta = _metadata(cfg, method=method.value, input=stem)
    tag = f"{stem}_{method.value}"
    fs = buf.sample_rate
    written = []

    frames_csv = out / f"{tag}_frames.csv"
    with frames_csv.open("w", newline="") as fh:
        fh.write(f"# {_header(meta)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "start_s", "fg_hz", "bg_hz", "fst_hz", "degenerate"])
        for i, (dec, p) in enumerate(zip(res.utterance.frames, res.frame_params)):
            w.writerow([i, f"{dec.start_index / fs:.6f}", f"{p.fg:.4f}", f"{p.bg:.4f}", f"{p.fst:.4f}",
                        int(p.degenerate)])
    written.append(frames_csv)

    deriv = res.utterance.glottal_flow_derivative
    peak = float(np.max(np.abs(deriv))) or 1.0
    scale = 0.9 / peak
    wav = out / f"{tag}_derivative.wav"
    write_wav(wav, AudioBuffer(deriv * scale, fs), comment=_header(meta))
    written.append(wav)

    freqs = np.linspace(0.0, fs / 2.0, ENVELOPE_POINTS)
    lip = 20.0 * np.log10(np.abs(1.0 - cfg.lip_d * np.exp(-2j * np.pi * freqs / fs)))
    env = out / f"{tag}_envelopes.csv"
    with env.open("w", newline="") as fh:
        fh.write(f"# {_header(meta)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "glottis_db", "vocal_tract_db", "lip_db"])
        g = _mean_envelope([d.glottis for d in res.utterance.frames], freqs, fs)
        v = _mean_envelope([d.vocal_tract for d in res.utterance.frames], freqs, fs)
        for row in zip(freqs, g, v, lip):
            w.writerow([f"{x:.6g}" for x in row])
    written.append(env)

    feats = out / f"{tag}_features.json"
    payload = {
        "metadata": meta,
        "f0_hz": res.f0,
        "n_frames": res.utterance.n_analyzed,
        "glottal_params": {"fg_hz": res.params.fg, "bg_hz": res.params.bg, "fst_hz": res.params.fst,
                           "degenerate": res.params.degenerate},
        "spectral_features": {"h1h2_db": res.features.h1h2, "hrf_db": res.features.hrf,
                              "st_db_per_decade": res.features.st},
        "derivative_wav_scale": scale,
    }
    feats.write_text(json.dumps(payload, indent=2))
    written.append(feats)
    return written


def cmd_analyze(args) -> int:
    methods = _methods(args.method)
    cfg = _config(args)
    src = Path(args.input)
    buf = load_wav(src)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".glottkit-", dir=out))
    try:
        for m in methods:
            _write_analysis(buf, src.stem, m, cfg, staging)
        for f in sorted(staging.iterdir()):
            f.replace(out / f.name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    print(f"analyzed {src} with {', '.join(m.value for m in methods)} -> {out}")
    return EXIT_OK


def _read_classes(path) -> dict[str, GlottalParams]:
    classes = dict(EFFORT_CLASSES)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(ln for ln in fh if ln.strip() and not ln.startswith("#")))
    for row in rows:
        effort = row.get("effort", "").strip()
        if effort not in EFFORT_LEVELS:
            raise UsageError(f"classes file: unknown effort {effort!r}")
        base = classes[effort]
        vals = {k: float(row[k]) if row.get(k) not in (None, "") else getattr(base, k)
                for k in ("fg", "bg", "fst")}
        classes[effort] = GlottalParams(**vals)
    return classes


def cmd_synth_corpus(args) -> int:
    if args.per_class < 1:
        raise UsageError("--per-class must be >= 1")
    if args.jitter < 0:
        raise UsageError("--jitter must be >= 0")
    classes = _read_classes(args.classes) if args.classes else None
    base = SynthSpec(f0=args.f0, duration_s=args.duration)
    manifest = make_effort_corpus(args.out, base=base, classes=classes, n_per_class=args.per_class,
                                  jitter=args.jitter, seed=args.seed)
    print(f"wrote {len(manifest)} stimuli and manifest.csv to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    methods = _methods(args.methods)
    cfg = _config(args)
    manifest = CorpusManifest.read(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_corpus(manifest, methods, cfg, workers=args.workers)
    meta = _metadata(cfg, manifest=str(args.manifest), methods=[m.value for m in methods])
    report = discrimination_report(rows, methods=methods)

    write_results_csv(rows, out / "results.csv", header_comment=_header(meta))
    with (out / "summary.csv").open("w", newline="") as fh:
        fh.write(f"# {_header(meta)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "feature", "effort", "n", "q1", "median", "q3"])
        for s in report.summaries:
            w.writerow([s.method, s.feature, s.effort, s.n, f"{s.q1:.6g}", f"{s.median:.6g}", f"{s.q3:.6g}"])
    payload = {"metadata": meta, **report.to_dict()}
    if manifest.has_ground_truth:
        payload["ground_truth_errors"] = ground_truth_errors(rows)
    (out / "discrimination.json").write_text(json.dumps(payload, indent=2))
    n_ok = sum(r.ok for r in rows)
    print(f"{n_ok}/{len(rows)} analyses succeeded; {len(report.tests)} rank-sum tests -> {out}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    methods = _methods(args.method)
    cfg = _config(args)
    buf = load_wav(args.input)
    info = {"metadata": _metadata(cfg), "path": str(args.input), "sample_rate": buf.sample_rate,
            "duration_s": buf.duration, "methods": {}}
    for m in methods:
        res = analyze_buffer(buf, m, cfg)
        info["f0_hz"] = res.f0
        info["methods"][m.value] = {
            "n_frames": res.utterance.n_analyzed,
            "voiced_fraction": float(res.utterance.voiced.mean()),
            "fg_hz": res.params.fg, "bg_hz": res.params.bg, "fst_hz": res.params.fst,
            "h1h2_db": res.features.h1h2, "hrf_db": res.features.hrf, "st_db_per_decade": res.features.st,
        }
    print(json.dumps(info, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="glottkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"glottkit {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def analysis_flags(sp):
        sp.add_argument("--config", help="flat key = value file with AnalysisConfig fields")
        sp.add_argument("--lip-d", type=float, dest="lip_d")
        sp.add_argument("--vt-order", type=int, dest="vt_order")
        sp.add_argument("--frame-ms", type=float, dest="frame_ms")

    a = sub.add_parser("analyze", help="decompose one WAV file")
    a.add_argument("--input", required=True)
    a.add_argument("--method", default="all", help="iaif, gfm-iaif, iop-iaif, a comma list, or all")
    a.add_argument("--out", required=True)
    analysis_flags(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth-corpus", help="write a synthetic effort corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--per-class", type=int, default=20, dest="per_class")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--classes", help="CSV with columns effort[,fg,bg,fst] overriding class centres")
    s.add_argument("--jitter", type=float, default=0.05)
    s.add_argument("--f0", type=float, default=200.0)
    s.add_argument("--duration", type=float, default=0.5)
    s.set_defaults(func=cmd_synth_corpus)

    e = sub.add_parser("evaluate", help="run the method comparison on a manifest")
    e.add_argument("--manifest", required=True)
    e.add_argument("--methods", default="all")
    e.add_argument("--out", required=True)
    e.add_argument("--workers", type=int, default=None)
    analysis_flags(e)
    e.set_defaults(func=cmd_evaluate)

    i = sub.add_parser("inspect", help="print a JSON summary of one WAV file")
    i.add_argument("--input", required=True)
    i.add_argument("--method", default="gfm-iaif")
    analysis_flags(i)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USER
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (UnstableFilterError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"internal numerical failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        logger.debug("unhandled", exc_info=True)
        print(f"internal failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
