import json
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from matra.corpus import EvalSegment, MetricScore, heval_target
from matra.evalharness import (POOLED, CorrelationReport, DegenerateCorrelation, JoinError,
                               correlate_with_human, emit_report, pearson, read_report_tsv,
                               report_to_json, system_average)

from conftest import GOLDEN, system_scores_fixture, correlation_fixture


def seg(sid, system):
    return EvalSegment(sid, system, "d", "s", "c", "r")


def test_pearson_examples():
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)
    assert pearson([1, 2, 3], [2, 4, 6]) == 1.0
    assert pearson([1, 2, 3], [3, 2, 1]) == -1.0
    with pytest.raises(DegenerateCorrelation):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1], [1])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])


series = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=20)


@given(series, st.data())
def test_pearson_symmetric_and_bounded(x, data):
    y = data.draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=len(x),
                           max_size=len(x)))
    try:
        r = pearson(x, y)
    except DegenerateCorrelation:
        return
    assert r == pearson(y, x)
    assert -1.0 <= r <= 1.0


def test_pearson_matches_numpy():
    rnd = random.Random(3)
    for _ in range(100):
        x = [rnd.random() for _ in range(10)]
        y = [rnd.random() for _ in range(10)]
        assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)


def test_system_average():
    segs = [seg("a", "X"), seg("b", "X"), seg("c", "Y")]
    scores = [MetricScore("a", "m", 0.2), MetricScore("b", "m", 0.4), MetricScore("c", "m", 1.0),
              MetricScore("a", "k", 0.5)]
    rep = system_average(scores, segs)
    assert rep.systems == ["X", "Y"] and rep.metrics == ["m", "k"]
    assert rep.means["X"]["m"] == pytest.approx(0.3, abs=1e-15)
    assert rep.means["Y"] == {"m": 1.0, "k": None}
    assert rep.counts["X"] == {"m": 2, "k": 1}
    with pytest.raises(JoinError):
        system_average([MetricScore("zz", "m", 0.1)], segs)


def test_system_average_partition_and_permutation():
    rnd = random.Random(9)
    segs = [seg(f"s{i}", f"sys{i % 3}") for i in range(30)]
    scores = [MetricScore(s.segment_id, "m", rnd.random()) for s in segs]
    rep = system_average(scores, segs)
    # the mean of system means weighted by counts is the overall mean
    total = sum(rep.means[s]["m"] * rep.counts[s]["m"] for s in rep.systems)
    assert total / 30 == pytest.approx(sum(x.score for x in scores) / 30, abs=1e-12)
    shuffled = scores[:]
    rnd.shuffle(shuffled)
    assert system_average(shuffled, segs[::-1]).means == rep.means


def test_correlation_four_point_fixture():
    segs = [seg(f"s{i}", "X") for i in range(4)]
    scores = [MetricScore(f"s{i}", "m", v) for i, v in enumerate([1, 2, 3, 4])]
    human = {f"s{i}": v for i, v in enumerate([1, 3, 2, 4])}
    rep = correlate_with_human(scores, human, segs)
    assert rep.r["X"]["m"] == pytest.approx(0.8, abs=1e-12)
    assert rep.n["X"]["m"] == 4


def test_correlation_linear_and_antilinear():
    segs = [seg(f"s{i}", "X") for i in range(5)]
    human = {f"s{i}": i / 10 for i in range(5)}
    up = [MetricScore(f"s{i}", "up", 0.5 + 0.1 * i) for i in range(5)]
    down = [MetricScore(f"s{i}", "down", 1 - 0.2 * i) for i in range(5)]
    rep = correlate_with_human(up + down, human, segs)
    assert rep.r["X"] == {"up": 1.0, "down": -1.0}


def test_correlation_brute_force_three_systems():
    rnd = random.Random(21)
    segs = [seg(f"s{i}", "ABC"[i % 3]) for i in range(45)]
    human = {s.segment_id: rnd.random() for s in segs}
    scores = [MetricScore(s.segment_id, "m", human[s.segment_id] + rnd.gauss(0, 0.2)) for s in segs]
    rep = correlate_with_human(scores, human, segs)
    for system in "ABC":
        ids = [s.segment_id for s in segs if s.system_id == system]
        x = [next(sc.score for sc in scores if sc.segment_id == i) for i in ids]
        y = [human[i] for i in ids]
        mx, my = sum(x) / len(x), sum(y) / len(y)
        cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
        r = cov / (sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y)) ** 0.5
        assert rep.r[system]["m"] == pytest.approx(r, abs=1e-12)
    pooled = correlate_with_human(scores, human, segs, group_by_system=False)
    assert pooled.systems == [POOLED]
    assert pooled.r[POOLED]["m"] == pytest.approx(
        np.corrcoef([s.score for s in scores], [human[s.segment_id] for s in scores])[0, 1],
        abs=1e-12)


def test_degenerate_group_is_flagged():
    segs = [seg(f"s{i}", "X") for i in range(3)]
    scores = [MetricScore(f"s{i}", "m", 0.5) for i in range(3)]
    rep = correlate_with_human(scores, {f"s{i}": i for i in range(3)}, segs)
    assert rep.r["X"]["m"] is None
    assert rep.degenerate == [("X", "m")]


def test_too_few_pairs():
    segs = [seg("a", "X"), seg("b", "X")]
    with pytest.raises(JoinError, match="only 1"):
        correlate_with_human([MetricScore("a", "m", 0.1)], {"a": 0.2, "b": 0.3}, segs)


def test_empty_report_is_header_only(tmp_path):
    rep = system_average([], [], metrics=["BLEU"])
    emit_report(rep, "tsv", tmp_path / "r.tsv")
    assert (tmp_path / "r.tsv").read_text(encoding="utf-8") == "system\tBLEU\n"
    empty = CorrelationReport(["m"], [], {}, {})
    emit_report(empty, "tsv", tmp_path / "c.tsv")
    assert (tmp_path / "c.tsv").read_text(encoding="utf-8") == "system\tr_m_vs_human\n"
    with pytest.raises(ValueError):
        emit_report(rep, "csv", tmp_path / "x")


def emit_both(report, tmp_path, stem):
    for fmt in ("tsv", "json"):
        emit_report(report, fmt, tmp_path / f"{stem}.{fmt}")
    return (tmp_path / f"{stem}.tsv").read_bytes(), (tmp_path / f"{stem}.json").read_bytes()


def test_system_scores_golden(tmp_path):
    segments, scores, metrics, expected = system_scores_fixture()
    rep = system_average(scores, segments, metrics)
    tsv, js = emit_both(rep, tmp_path, "system_scores")
    assert tsv == (GOLDEN / "system_scores.tsv").read_bytes()
    assert js == (GOLDEN / "system_scores.json").read_bytes()
    header, rows = read_report_tsv(tmp_path / "system_scores.tsv")
    assert header == ["system", *metrics]
    assert len(rows) == 7 and all(len(v) == 7 for v in rows.values())
    assert rows == expected


def test_correlation_golden(tmp_path):
    segments, scores, records = correlation_fixture()
    human = {r.segment_id: heval_target(r) for r in records}
    rep = correlate_with_human(scores, human, segments, metrics=["MaTrA-1", "MaTrA-2"])
    tsv, js = emit_both(rep, tmp_path, "correlation")
    assert tsv == (GOLDEN / "correlation.tsv").read_bytes()
    assert js == (GOLDEN / "correlation.json").read_bytes()
    header, rows = read_report_tsv(tmp_path / "correlation.tsv")
    assert header == ["system", "r_MaTrA-1_vs_human", "r_MaTrA-2_vs_human"]
    for system, values in rows.items():
        ids = [s.segment_id for s in segments if s.system_id == system]
        for m, got in zip(("MaTrA-1", "MaTrA-2"), values):
            x = [s.score for s in scores if s.segment_id in ids and s.metric_name == m]
            assert got == pytest.approx(np.corrcoef(x, [human[i] for i in ids])[0, 1], abs=1e-12)


def test_reports_byte_deterministic(tmp_path):
    segments, scores, records = correlation_fixture()
    human = {r.segment_id: heval_target(r) for r in records}
    a = emit_both(correlate_with_human(scores, human, segments), tmp_path, "a")
    assert emit_both(correlate_with_human(scores, human, segments), tmp_path, "b") == a
    # input order only matters through the first-seen metric order
    metrics = ["MaTrA-1", "MaTrA-2"]
    c = emit_both(correlate_with_human(scores[::-1], human, segments[::-1], metrics=metrics),
                  tmp_path, "c")
    assert c == a


def test_json_and_tsv_agree(tmp_path):
    segments, scores, records = correlation_fixture()
    human = {r.segment_id: heval_target(r) for r in records}
    for rep in (system_average(scores, segments),
                correlate_with_human(scores, human, segments)):
        emit_both(rep, tmp_path, "x")
        header, rows = read_report_tsv(tmp_path / "x.tsv")
        doc = json.loads((tmp_path / "x.json").read_text(encoding="utf-8"))
        assert doc["columns"] == header
        assert {r["system"]: [r[c] for c in header[1:]] for r in doc["rows"]} == rows
        assert doc == report_to_json(rep)
