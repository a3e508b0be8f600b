"""Gap tables against published baseline objectives."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .core import LengthMismatch

MISSING = ("", "-", "na", "n/a")


@dataclass(frozen=True)
class GapRow:
    label: str
    ours: float
    baseline: float | None
    gap: float | None  # percent, negative when ours is lower

    @classmethod
    def of(cls, label: str, ours: float, baseline: float | None) -> "GapRow":
        if baseline is None:
            return cls(label, ours, None, None)
        if baseline <= 0:
            raise ValueError(f"baseline objective for {label!r} must be positive")
        return cls(label, ours, baseline, 100.0 * (ours - baseline) / baseline)


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


@dataclass
class GapTable:
    labels: list
    ours: list
    columns: dict  # baseline name -> list of GapRow

    def mean_gap(self, name: str) -> float | None:
        """Mean of the per-row gaps (not the gap of the means); missing rows are skipped."""
        return _mean(r.gap for r in self.columns[name])

    def mean_baseline(self, name: str) -> float | None:
        return _mean(r.baseline for r in self.columns[name])

    def mean_ours(self) -> float:
        return sum(self.ours) / len(self.ours)

    def _cells(self) -> list:
        names = list(self.columns)
        head = ["instance", *names, "ours", *(f"{n} gap" for n in names)]
        body = []
        for i, label in enumerate(self.labels):
            rows = [self.columns[n][i] for n in names]
            body.append([label, *(_fmt(r.baseline) for r in rows), _fmt(self.ours[i]),
                         *(_fmt(r.gap) for r in rows)])
        body.append(["mean", *(_fmt(self.mean_baseline(n)) for n in names), _fmt(self.mean_ours()),
                     *(_fmt(self.mean_gap(n)) for n in names)])
        return [head] + body

    def to_text(self) -> str:
        cells = self._cells()
        widths = [max(len(row[c]) for row in cells) for c in range(len(cells[0]))]
        lines = []
        for n, row in enumerate(cells):
            lines.append("  ".join(v.ljust(w) if c == 0 else v.rjust(w) for c, (v, w) in enumerate(zip(row, widths))))
            if n == 0 or n == len(cells) - 2:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self._cells())
        return buf.getvalue()


def _fmt(v: float | None) -> str:
    return "-" if v is None else f"{v:.2f}"


def gap_table(labels: Sequence[str], ours: Sequence[float], baselines: Mapping[str, Sequence]) -> GapTable:
    """Per-row gaps 100*(ours - baseline)/baseline for every named baseline column."""
    if len(labels) != len(ours):
        raise LengthMismatch(f"{len(labels)} labels but {len(ours)} objectives")
    columns = {}
    for name, values in baselines.items():
        if len(values) != len(ours):
            raise LengthMismatch(f"baseline {name!r} has {len(values)} values, expected {len(ours)}")
        columns[name] = [GapRow.of(str(l), float(o), None if b is None else float(b))
                         for l, o, b in zip(labels, ours, values)]
    return GapTable([str(l) for l in labels], [float(o) for o in ours], columns)


def read_table(path) -> tuple:
    """Read a CSV with an ``instance`` column; ``#`` lines are comments.

    Returns (labels, {column: values}); missing values ("-") become None.
    """
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip() and not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows or "instance" not in rows[0]:
        raise ValueError(f"{path}: expected a header with an 'instance' column")
    labels = [r["instance"].strip() for r in rows]
    cols = {}
    for name in rows[0]:
        if name == "instance":
            continue
        vals = []
        for r in rows:
            v = (r[name] or "").strip()
            vals.append(None if v.lower() in MISSING else float(v))
        cols[name.strip()] = vals
    return labels, cols


def gap_table_from_files(ours_path, baseline_path, column: str | None = None) -> GapTable:
    labels, ours_cols = read_table(ours_path)
    base_labels, base_cols = read_table(baseline_path)
    if labels != base_labels:
        raise LengthMismatch(f"instance labels differ between {ours_path} and {baseline_path}")
    name = column or ("objective" if "objective" in ours_cols else next(iter(ours_cols)))
    ours = ours_cols[name]
    if any(v is None or not math.isfinite(v) for v in ours):
        raise ValueError(f"{ours_path}: every instance needs an objective")
    return gap_table(labels, ours, base_cols)
