"""System-level metric averages and metric-vs-human Pearson correlations.

Report layouts (TSV, one row per system, systems sorted):

* system scores: ``system`` then one column per metric;
* correlations: ``system`` then ``r_<metric>_vs_human`` per metric.

Empty cells (no scores, or a degenerate correlation) are written as ``NA`` in
TSV and ``null`` in JSON. JSON reports additionally carry segment counts and
the list of degenerate cells.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from matra.corpus import EvalSegment, MetricScore

POOLED = "ALL"


class DegenerateCorrelation(ArithmeticError):
    """One of the series is constant, so Pearson's r is undefined."""


class JoinError(ValueError):
    pass


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise ValueError(f"pearson of series with lengths {len(x)} and {len(y)}")
    n = len(x)
    if n < 2:
        raise ValueError("pearson needs at least two points")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    dx = [a - mx for a in x]
    dy = [b - my for b in y]
    for name, d in (("x", dx), ("y", dy)):
        if not any(d):
            raise DegenerateCorrelation(f"zero variance in {name}")
    # r is scale-free; rescaling keeps tiny deviations from underflowing
    sx = max(map(abs, dx))
    sy = max(map(abs, dy))
    dx = [a / sx for a in dx]
    dy = [b / sy for b in dy]
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def _metric_order(scores: Iterable[MetricScore], metrics: Optional[Sequence[str]]) -> list[str]:
    if metrics is not None:
        return list(metrics)
    seen = {}
    for s in scores:
        seen.setdefault(s.metric_name, None)
    return list(seen)


@dataclass
class SystemReport:
    metrics: list[str]
    systems: list[str]
    # means[system][metric] is None when the system has no scores for the metric
    means: dict[str, dict[str, Optional[float]]]
    counts: dict[str, dict[str, int]]
    segments: dict[str, int] = field(default_factory=dict)


def system_average(scores: Sequence[MetricScore], segments: Iterable[EvalSegment],
                   metrics: Optional[Sequence[str]] = None) -> SystemReport:
    """Mean segment score per (system, metric).

    Segments lacking a score for a metric are left out of that metric's mean;
    ``counts`` records how many segments each mean covers.
    """
    system_of = {}
    per_system = defaultdict(int)
    for seg in segments:
        system_of[seg.segment_id] = seg.system_id
        per_system[seg.system_id] += 1
    metric_names = _metric_order(scores, metrics)
    values = defaultdict(list)
    for s in scores:
        if s.segment_id not in system_of:
            raise JoinError(f"score for unknown segment {s.segment_id!r}")
        if s.metric_name in metric_names:
            values[(system_of[s.segment_id], s.metric_name)].append(s.score)
    systems = sorted(per_system)
    means, counts = {}, {}
    for sysname in systems:
        means[sysname], counts[sysname] = {}, {}
        for m in metric_names:
            # sorted before summing so input order cannot change the last bit
            v = sorted(values.get((sysname, m), []))
            counts[sysname][m] = len(v)
            means[sysname][m] = math.fsum(v) / len(v) if v else None
    return SystemReport(metric_names, systems, means, counts, dict(per_system))


@dataclass
class CorrelationReport:
    metrics: list[str]
    systems: list[str]
    r: dict[str, dict[str, Optional[float]]]
    n: dict[str, dict[str, int]]
    degenerate: list[tuple[str, str]] = field(default_factory=list)


def correlate_with_human(scores: Sequence[MetricScore], human: Mapping[str, float],
                         segments: Iterable[EvalSegment], group_by_system: bool = True,
                         metrics: Optional[Sequence[str]] = None) -> CorrelationReport:
    """Pearson r between each metric and the human target.

    Scores and human targets are joined on segment_id. With
    ``group_by_system`` one r per system; otherwise a single pooled row
    named ``ALL``. Constant series are flagged in ``degenerate`` rather than
    reported as 0.
    """
    system_of = {seg.segment_id: seg.system_id for seg in segments}
    metric_names = _metric_order(scores, metrics)
    pairs = defaultdict(list)
    for s in scores:
        if s.metric_name not in metric_names or s.segment_id not in human:
            continue
        if s.segment_id not in system_of:
            raise JoinError(f"score for unknown segment {s.segment_id!r}")
        group = system_of[s.segment_id] if group_by_system else POOLED
        pairs[(group, s.metric_name)].append((s.segment_id, s.score, human[s.segment_id]))

    if group_by_system:
        systems = sorted({system_of[sid] for sid in human if sid in system_of})
    else:
        systems = [POOLED]
    report = CorrelationReport(metric_names, systems, {}, {})
    for group in systems:
        report.r[group], report.n[group] = {}, {}
        for m in metric_names:
            joined = sorted(pairs.get((group, m), []))
            if len(joined) < 2:
                raise JoinError(f"system {group!r}, metric {m!r}: only {len(joined)} "
                                f"segment(s) with both metric and human scores")
            report.n[group][m] = len(joined)
            try:
                report.r[group][m] = pearson([j[1] for j in joined], [j[2] for j in joined])
            except DegenerateCorrelation:
                report.r[group][m] = None
                report.degenerate.append((group, m))
    return report


# -- emission ---------------------------------------------------------------

def _cell(v: Optional[float]) -> str:
    return "NA" if v is None else repr(float(v))


def _columns(report) -> list[str]:
    if isinstance(report, CorrelationReport):
        return [f"r_{m}_vs_human" for m in report.metrics]
    return list(report.metrics)


def _table(report):
    return report.r if isinstance(report, CorrelationReport) else report.means


def report_to_json(report) -> dict:
    table = _table(report)
    rows = []
    for sysname in report.systems:
        row = {"system": sysname}
        for col, m in zip(_columns(report), report.metrics):
            row[col] = table[sysname][m]
        rows.append(row)
    counts = report.n if isinstance(report, CorrelationReport) else report.counts
    doc = {
        "kind": "correlation" if isinstance(report, CorrelationReport) else "system_scores",
        "columns": ["system", *_columns(report)],
        "rows": rows,
        "counts": {s: [counts[s][m] for m in report.metrics] for s in report.systems},
    }
    if isinstance(report, CorrelationReport):
        doc["degenerate"] = [list(d) for d in report.degenerate]
    return doc


def emit_report(report, format: str, path) -> None:
    """Write a report as TSV or JSON; output is byte-identical for equal reports."""
    if format == "json":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report_to_json(report), fh, indent=1, ensure_ascii=False)
            fh.write("\n")
    elif format == "tsv":
        table = _table(report)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\t".join(["system", *_columns(report)]) + "\n")
            for sysname in report.systems:
                cells = [_cell(table[sysname][m]) for m in report.metrics]
                fh.write("\t".join([sysname, *cells]) + "\n")
    else:
        raise ValueError(f"unknown report format {format!r}")


def read_report_tsv(path) -> tuple[list[str], dict[str, list[Optional[float]]]]:
    """Parse a TSV report back into (columns, {system: values})."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        rows = {}
        for line in fh:
            cols = line.rstrip("\n").split("\t")
            rows[cols[0]] = [None if c == "NA" else float(c) for c in cols[1:]]
    return header, rows
