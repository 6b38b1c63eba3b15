import csv
import json
from pathlib import Path

import pytest

from pktaccel.harness.pipeline import COUNTER_FIELDS, PipelineConfig, RunReport, run_pipeline
from pktaccel.harness.report import SERIES_FIELDS, emit_report, load_report, series_path, to_json
from pktaccel.harness.trace import TrafficMixConfig, generate_packets

GOLDEN = Path(__file__).parent / "data" / "golden_report.json"


def golden_run():
    pk = generate_packets(TrafficMixConfig(max_packets=5000, seed=42, rate_bps=80e6))
    cfg = PipelineConfig(num_app_threads=4, service_time_s=5e-4, lsr_capacity_pkts=64, usq_capacity_pkts=128,
                         lbq_capacity_pkts=64, lfn_slots=1 << 16, ted_thr0=64, ted_min=8,
                         capture_times=(0.2,), capture_bursts=(16,), seed=42)
    return run_pipeline(cfg, pk)


def test_empty_report_serializes(tmp_path):
    rep = RunReport()
    d = json.loads(to_json(rep))
    assert all(d[k] == 0 for k in COUNTER_FIELDS)
    assert d["ted_thr_series"] == []
    files = emit_report(rep, "csv", tmp_path / "e.csv")
    assert [f.name for f in files] == ["e.csv", "e.ted_thr.csv"]
    assert (tmp_path / "e.ted_thr.csv").read_text().strip() == ",".join(SERIES_FIELDS)


def test_json_round_trip_is_idempotent(tmp_path):
    rep = golden_run()
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    emit_report(rep, "json", a)
    emit_report(load_report(a), "json", b)
    assert a.read_bytes() == b.read_bytes()


def test_json_is_flat_with_series():
    d = json.loads(to_json(golden_run()))
    assert list(d)[: len(COUNTER_FIELDS)] == list(COUNTER_FIELDS)
    assert all(not isinstance(d[k], (dict, list)) for k in COUNTER_FIELDS)
    assert set(d["ted_thr_series"][0]) == set(SERIES_FIELDS)


def test_csv_files(tmp_path):
    rep = golden_run()
    emit_report(rep, "csv", tmp_path / "r.csv")
    rows = list(csv.reader((tmp_path / "r.csv").open()))
    assert tuple(rows[0]) == COUNTER_FIELDS and len(rows) == 2
    assert int(rows[1][0]) == rep.arrived
    series = list(csv.DictReader(series_path(tmp_path / "r.csv").open()))
    assert len(series) == len(rep.ted_thr_series)
    assert [int(r["ted_thr"]) for r in series] == [r["ted_thr"] for r in rep.ted_thr_series]


def test_golden_file():
    assert to_json(golden_run()) == GOLDEN.read_text()


def test_bad_format_and_path(tmp_path):
    with pytest.raises(ValueError):
        emit_report(RunReport(), "xml", tmp_path / "x")
    with pytest.raises(OSError):
        emit_report(RunReport(), "json", tmp_path / "missing" / "x.json")


def test_load_rejects_incomplete(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"arrived": 1}))
    with pytest.raises(ValueError):
        load_report(p)
