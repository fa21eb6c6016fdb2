"""
End-to-end checks on the bundled scenarios: queueing theory, conservation,
fault handling and report replay.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from cli.commands import EVENTS_FILE, REPORT_JSON_FILE, run_command
from core.config import build_scenario, load_scenario, with_mode, with_seed
from core.engine import run
from core.event_log import read_log
from core.metrics import finalize
from core.state import PolicyTag

SCENARIOS_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="module")
def mm1_report():
    report, _ = run(load_scenario(SCENARIOS_DIR / "mm1.json"))
    return report


def test_mm1_mean_response_time(mm1_report):
    # lambda = 0.5, mu = 1: W = 1 / (mu - lambda) = 2
    assert mm1_report.response_time["mean"] == pytest.approx(2.0, rel=0.10)
    assert mm1_report.throughput == pytest.approx(0.5, rel=0.05)
    assert mm1_report.utilization["S"] == pytest.approx(0.5, rel=0.05)


def test_mm1_littles_law(mm1_report):
    expected = mm1_report.throughput * mm1_report.response_time["mean"]
    assert mm1_report.little_l == pytest.approx(expected, rel=0.10)


def _random_tree(rng, index):
    n_queues = int(rng.integers(1, 4))
    queue_ids = [f"q{j}" for j in range(n_queues)]
    servers = []
    for j in range(int(rng.integers(1, 5))):
        servers.append({
            "id": f"s{j}",
            "base_rate": float(rng.uniform(0.3, 4.0)),
            "concurrency": int(rng.integers(1, 3)),
            "backlog_limit": int(rng.integers(1, 5)),
            "weight": int(rng.integers(1, 4)),
            "subscription": [str(q) for q in rng.permutation(queue_ids)],
        })
    tree = {
        "seed": int(rng.integers(0, 10_000)),
        "horizon": 20.0,
        "workload": {
            "arrival": {"process": "poisson", "rate": float(rng.uniform(0.5, 8.0))},
            "secured_fraction": float(rng.uniform(0, 1)),
        },
        "queues": [{"id": q, "capacity": int(rng.integers(1, 30))} for q in queue_ids],
        "rules": [
            {"order": 1, "queue": queue_ids[0], "priorities": [0]},
            {"order": 9, "queue": queue_ids[-1]},
        ],
        "admission": {"ssl_offload_delay": float(rng.uniform(0, 0.05))},
        "farm": {"servers": servers},
        "faults": [{"time": float(rng.uniform(0, 20)), "server": servers[0]["id"],
                    "factor": float(rng.uniform(0.05, 1.0))}],
        "metrics": {"sample_interval": 0.5},
    }
    if index % 3 == 0:
        tree.update({"mode": "push", "policy": str(rng.choice([t.value for t in PolicyTag]))})
    else:
        tree["supervisor"] = {"stipulated_time": float(rng.uniform(0.2, 2.0)),
                              "evict_patience": int(rng.integers(1, 4))}
    return tree


def test_conservation_over_random_scenarios():
    rng = np.random.default_rng(2024)
    for index in range(50):
        report, log = run(build_scenario(_random_tree(rng, index)))
        samples = list(log.of_kind("sample"))
        assert len(samples) == 39
        for sample in samples:
            d = sample["detail"]
            assert d["generated"] == (d["completed"] + d["admitting"] + d["queued"]
                                      + d["backlog"] + d["in_service"] + d["dropped"])
        assert report.completed + report.dropped <= report.generated
        assert sum(report.assigned.values()) + report.dropped <= report.generated


@pytest.fixture(scope="module")
def degradation_run():
    return run(load_scenario(SCENARIOS_DIR / "degradation.json"))


def test_degraded_server_is_evicted(degradation_run):
    report, _ = degradation_run
    assert len(report.evictions) == 1
    server, when = report.evictions[0]
    assert server == "C"
    assert when > 100.0
    assert report.final_credits["A"] > 0 and report.final_credits["B"] > 0


def test_evicted_server_stays_quiet(degradation_run):
    _, log = degradation_run
    evicted_at = next(log.of_kind("evict"))["seq"]
    later = [r for r in log.records[evicted_at + 1:] if r["server"] == "C"]
    assert later == []
    for tick in log.of_kind("tick"):
        if tick["seq"] > evicted_at:
            assert "C" not in [r["server"] for r in tick["detail"]["reports"]]


def test_report_replays_from_the_event_log(scenario_file, tmp_path):
    assert run_command(str(scenario_file)) == 0
    out = tmp_path / "out"
    written = json.loads((out / REPORT_JSON_FILE).read_text(encoding="utf-8"))
    replayed = finalize(read_log(out / EVENTS_FILE))
    assert json.loads(json.dumps(replayed.to_dict())) == written


@pytest.fixture(scope="module")
def baseline_sweep():
    tree = json.loads((SCENARIOS_DIR / "baseline.json").read_text(encoding="utf-8"))
    tree["horizon"] = 300.0
    cfg = build_scenario(tree)
    reports = {"pull_rl": [], "RANDOM": [], "RR": []}
    for seed in range(1, 21):
        for token, runs in reports.items():
            report, _ = run(with_seed(with_mode(cfg, token), seed))
            runs.append(report)
    return reports


def test_healthy_baseline_farm_keeps_every_server(baseline_sweep):
    for report in baseline_sweep["pull_rl"]:
        assert report.evictions == [], f"seed {report.seed}"
        assert report.stranded == 0


def test_pull_beats_random_and_spreads_load_like_round_robin(baseline_sweep):
    rt = {token: np.mean([r.response_time["mean"] for r in runs]) for token, runs in baseline_sweep.items()}
    fairness = {token: np.mean([r.jain_utilization for r in runs]) for token, runs in baseline_sweep.items()}
    assert rt["pull_rl"] <= 0.9 * rt["RANDOM"]
    assert fairness["pull_rl"] >= fairness["RR"]
