import math

import numpy as np
import pytest

from core.event_log import EventLog
from core.metrics import CSV_COLUMNS, MetricsError, finalize, jain_fairness, percentile


def test_percentile_examples():
    assert all(percentile([5.0], p) == 5.0 for p in (0, 1, 50, 99, 100))
    assert percentile([1, 2, 3, 4], 50) == 2
    assert percentile([4, 1, 3, 2], 0) == 1
    assert percentile([4, 1, 3, 2], 100) == 4


def test_percentile_errors():
    with pytest.raises(MetricsError):
        percentile([], 50)
    with pytest.raises(MetricsError):
        percentile([1.0], 101)


def test_percentile_matches_sort_and_index_oracle():
    rng = np.random.default_rng(0)
    for _ in range(300):
        samples = list(rng.exponential(1.0, size=int(rng.integers(1, 60))))
        p = float(rng.uniform(0, 100))
        ordered = sorted(samples)
        rank = max(1, math.ceil(p / 100 * len(ordered)))
        assert percentile(samples, p) == ordered[rank - 1]


def test_percentile_is_monotone():
    rng = np.random.default_rng(1)
    samples = list(rng.normal(size=200))
    values = [percentile(samples, p) for p in range(101)]
    assert values == sorted(values)


def test_jain_examples():
    for k in (1, 7, 1000):
        assert jain_fairness([k, k, k]) == pytest.approx(1.0)
    assert jain_fairness([1, 0, 0]) == pytest.approx(1 / 3)
    assert jain_fairness([1, 2, 3]) == pytest.approx(6 / 7)
    with pytest.raises(MetricsError):
        jain_fairness([0, 0, 0])
    with pytest.raises(MetricsError):
        jain_fairness([])


def test_jain_bounds():
    rng = np.random.default_rng(2)
    for _ in range(500):
        n = int(rng.integers(1, 10))
        counts = rng.integers(0, 50, size=n)
        if counts.sum() == 0:
            continue
        value = jain_fairness(list(counts))
        assert 1 / n - 1e-12 <= value <= 1 + 1e-12


def _begin(log, horizon, servers=("A",)):
    log.append(0.0, "begin", detail={
        "run_id": "abc", "mode": "push", "policy": "RR", "seed": 1, "horizon": horizon,
        "servers": {sid: {"base_rate": 1.0, "concurrency": 1} for sid in servers},
        "queues": ["q"], "credits": {sid: 0 for sid in servers},
    })


def test_zero_traffic_report_uses_absent_markers():
    log = EventLog()
    _begin(log, 10.0)
    log.append(10.0, "end", detail={"horizon": 10.0, "credits": {"A": 0}})
    report = finalize(log.records)
    assert (report.generated, report.completed, report.dropped, report.throughput) == (0, 0, 0, 0.0)
    assert report.response_time is None
    assert report.distribution_time is None
    assert report.jain is None
    assert report.little_l is None
    row = report.csv_values()
    assert list(row) == list(CSV_COLUMNS)
    assert row["rt_mean"] is None and row["jain"] is None


def test_throughput_and_response_stats():
    log = EventLog()
    _begin(log, 5.0, servers=("A", "B"))
    for i in range(10):
        sid = "AB"[i % 2]
        log.append(0.1 * i, "arrival", request=i)
        log.append(0.1 * i, "dispatch", server=sid, request=i, detail={"connections": 1})
        log.append(0.1 * i + 1.0, "complete", server=sid, request=i, detail={
            "arrival": 0.1 * i, "assigned": 0.1 * i, "processing": 1.0, "response": float(i + 1),
        })
    log.append(5.0, "end", detail={"horizon": 5.0, "credits": {"A": 0, "B": 0}})
    report = finalize(log.records)
    assert report.throughput == 2.0
    assert report.response_time["mean"] == 5.5
    assert report.response_time["p50"] == 5.0
    assert report.response_time["p99"] == 10.0
    assert report.response_time["max"] == 10.0
    assert report.assigned == {"A": 5, "B": 5}
    assert report.skew == 0
    assert report.jain == pytest.approx(1.0)
    assert report.utilization == {"A": 1.0, "B": 1.0}
    assert report.distribution_time == {"mean": 0.0, "p95": 0.0}


def test_pull_mode_bookkeeping():
    log = EventLog()
    _begin(log, 4.0, servers=("A", "B"))
    for i in range(3):
        log.append(0.0, "arrival", request=i)
        log.append(0.0, "enqueue", request=i, detail={"queue": "q", "enqueue_time": 0.0})
    log.append(0.5, "arrival", request=3)
    log.append(0.5, "overflow", request=3, detail={"queue": "q", "enqueue_time": 0.5})
    log.append(1.0, "pull", server="A", detail={"requested": 2, "queues": ["q", "q"], "requests": [0, 1], "waits": [1.0, 1.0]})
    log.append(2.0, "evict", server="A", detail={"streak": 5})
    log.append(4.0, "end", detail={"horizon": 4.0, "credits": {"A": 0, "B": 12}})
    report = finalize(log.records)
    assert report.dropped == 1
    assert report.max_depth == {"q": 3}
    assert report.assigned == {"A": 2, "B": 0}
    assert report.skew == 2
    assert report.stranded == 2
    assert report.evictions == [["A", 2.0]]
    assert report.final_credits == {"A": 0, "B": 12}
    assert report.distribution_time["mean"] == 1.0


def test_finalize_requires_begin():
    with pytest.raises(MetricsError):
        finalize([])
    with pytest.raises(MetricsError):
        finalize([{"t": 0.0, "seq": 0, "kind": "end", "server": None, "request": None, "detail": {}}])
