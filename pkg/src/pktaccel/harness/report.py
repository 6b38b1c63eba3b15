"""Run report serialisation (flat JSON, or CSV with one file per series)."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Union

from .pipeline import COUNTER_FIELDS, RunReport

SERIES_FIELDS = ("period_index", "ted_thr", "congested", "forwarded", "dropped_tail", "dropped_shunted")


def report_dict(report: RunReport, include_wall: bool = False) -> dict:
    d = report.counters()
    if include_wall and report.wall_s is not None:
        d["wall_s"] = report.wall_s
    d["ted_thr_series"] = [dict(r) for r in report.ted_thr_series]
    return d


def to_json(report: RunReport, include_wall: bool = False) -> str:
    return json.dumps(report_dict(report, include_wall), indent=2) + "\n"


def series_path(path: Union[str, Path]) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".ted_thr.csv")


def emit_report(report: RunReport, fmt: str, path, include_wall: bool = False) -> list:
    """Write ``report``; returns the list of files written."""
    path = Path(path)
    if fmt == "json":
        path.write_text(to_json(report, include_wall))
        return [path]
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    row = report.counters()
    if include_wall and report.wall_s is not None:
        row["wall_s"] = report.wall_s
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(row))
        w.writerow(list(row.values()))
    sp = series_path(path)
    with open(sp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_FIELDS)
        for r in report.ted_thr_series:
            w.writerow([int(r[k]) if isinstance(r[k], bool) else r[k] for k in SERIES_FIELDS])
    return [path, sp]


def load_report(path) -> RunReport:
    """Read a JSON report written by :func:`emit_report`."""
    d = json.loads(Path(path).read_text())
    missing = [k for k in COUNTER_FIELDS if k not in d]
    if missing:
        raise ValueError(f"report is missing fields: {missing}")
    rep = RunReport(**{k: d[k] for k in COUNTER_FIELDS})
    rep.ted_thr_series = list(d.get("ted_thr_series", []))
    rep.wall_s = d.get("wall_s")
    return rep
