"""Corpus manifests: labeled stimulus lists stored as CSV."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .features import GlottalParams

EFFORT_LEVELS = ("soft", "medium", "loud")
BASE_COLUMNS = ["path", "vowel", "effort", "speaker"]
TRUTH_COLUMNS = ["fg_true", "bg_true", "fst_true"]


class ManifestError(ValueError):
    pass


@dataclass
class StimulusRecord:
    path: Path
    vowel: str
    effort: str
    speaker: str
    ground_truth: GlottalParams | None = None

    def __post_init__(self):
        self.path = Path(self.path)
        if self.effort not in EFFORT_LEVELS:
            raise ManifestError(f"effort {self.effort!r} not in {EFFORT_LEVELS}")


@dataclass
class CorpusManifest:
    records: list[StimulusRecord] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            key = str(rec.path)
            if key in seen:
                raise ManifestError(f"duplicate path {key}")
            seen.add(key)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def has_ground_truth(self) -> bool:
        return bool(self.records) and all(r.ground_truth is not None for r in self.records)

    def by_effort(self) -> dict[str, list[StimulusRecord]]:
        out = {e: [] for e in EFFORT_LEVELS}
        for r in self.records:
            out[r.effort].append(r)
        return out

    def write(self, path, relative_to=None, header_comment: str | None = None) -> None:
        """Write the manifest; paths are stored relative to ``relative_to`` when given."""
        path = Path(path)
        truth = self.has_ground_truth
        with path.open("w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(BASE_COLUMNS + (TRUTH_COLUMNS if truth else []))
            for r in self.records:
                p = r.path
                if relative_to is not None:
                    try:
                        p = p.relative_to(relative_to)
                    except ValueError:
                        pass
                row = [p.as_posix(), r.vowel, r.effort, r.speaker]
                if truth:
                    g = r.ground_truth
                    row += [f"{g.fg:.6f}", f"{g.bg:.6f}", f"{g.fst:.6f}"]
                writer.writerow(row)

    @classmethod
    def read(cls, path) -> "CorpusManifest":
        """Parse a manifest CSV; relative paths resolve against the manifest's folder.

        Lines starting with ``#`` are ignored.
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise ManifestError(f"{path}: empty manifest")
        reader = csv.DictReader(lines)
        missing = [c for c in BASE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ManifestError(f"{path}: missing columns {missing}")
        has_truth = all(c in reader.fieldnames for c in TRUTH_COLUMNS)
        records = []
        for lineno, row in enumerate(reader, 2):
            p = Path(row["path"])
            if not p.is_absolute():
                p = path.parent / p
            truth = None
            if has_truth and all(row[c] not in (None, "") for c in TRUTH_COLUMNS):
                try:
                    truth = GlottalParams(float(row["fg_true"]), float(row["bg_true"]), float(row["fst_true"]))
                except ValueError as exc:
                    raise ManifestError(f"{path}:{lineno}: bad ground truth: {exc}") from exc
            try:
                records.append(StimulusRecord(p, row["vowel"], row["effort"], row["speaker"], truth))
            except ManifestError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
        if not records:
            raise ManifestError(f"{path}: manifest has no rows")
        return cls(records)
