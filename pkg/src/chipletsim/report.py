"""Result tables and the files written for them.

Every run directory holds:

* one CSV per table (header always present, even with no rows),
* ``plot/*.dat``: whitespace-separated two-column series, one per curve
  or heatmap row,
* extra JSON/text artifacts (device files, calibration snapshots),
* ``summary.txt`` and ``manifest.json``.

Numbers are written with 12 significant digits so that files are
byte-stable across runs and platforms.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".12g")
    return str(x)


@dataclass
class Table:
    name: str
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([fmt(v) for v in r])
        return buf.getvalue()


@dataclass
class Series:
    """Two-column plot data: ``x y`` per line, with a ``#`` header."""

    name: str
    x_label: str
    y_label: str
    points: list[tuple] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"# {self.x_label} {self.y_label}"]
        lines += [f"{fmt(x)} {fmt(y)}" for x, y in self.points]
        return "\n".join(lines) + "\n"


@dataclass
class Report:
    tables: list[Table] = field(default_factory=list)
    series: list[Series] = field(default_factory=list)
    files: dict[str, str] = field(default_factory=dict)     # relative path -> text
    summary: list[str] = field(default_factory=list)
    status: int = 0

    def table(self, name: str, header: list[str]) -> Table:
        t = Table(name, header)
        self.tables.append(t)
        return t


def _rendered(report: Report) -> dict[str, str]:
    out = {f"{t.name}.csv": t.to_csv() for t in report.tables}
    out.update({f"plot/{s.name}.dat": s.to_text() for s in report.series})
    out.update(report.files)
    out["summary.txt"] = "\n".join(report.summary) + "\n"
    return out


def emit_report(report: Report, out_dir: str | Path, manifest: dict | None = None) -> list[Path]:
    """Write every artifact of ``report`` into ``out_dir``.

    Files are staged in a sibling temporary directory and moved into place
    only once all of them are written, so a failure leaves no partial run.
    The manifest lists every file with its SHA-256.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir} is not writable")
    texts = _rendered(report)
    stage = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    try:
        for rel, text in texts.items():
            p = stage / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text)
        if manifest is not None:
            m = dict(manifest)
            m["files"] = {
                rel: hashlib.sha256(texts[rel].encode()).hexdigest() for rel in sorted(texts)
            }
            (stage / "manifest.json").write_text(json.dumps(m, indent=1, sort_keys=True) + "\n")
        written = []
        for p in sorted(stage.rglob("*")):
            if p.is_file():
                dest = out_dir / p.relative_to(stage)
                dest.parent.mkdir(parents=True, exist_ok=True)
                os.replace(p, dest)
                written.append(dest)
        return written
    finally:
        shutil.rmtree(stage, ignore_errors=True)
