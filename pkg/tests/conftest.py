import copy
import json
from pathlib import Path

import pytest

from core.config import build_scenario
from core.state import RequestType
from core.workload import Request

SCENARIOS_DIR = Path(__file__).resolve().parent.parent / "scenarios"

# Small two-queue farm that runs in well under a second.
SMALL_SCENARIO = {
    "name": "small",
    "seed": 11,
    "horizon": 30.0,
    "mode": "pull_rl",
    "workload": {
        "arrival": {"process": "poisson", "rate": 3.0},
        "demand": {"default": {"dist": "exponential", "mean": 0.5}},
        "secured_fraction": 0.3,
    },
    "queues": [
        {"id": "q_fast", "capacity": 50},
        {"id": "q_slow", "capacity": 50},
    ],
    "rules": [
        {"order": 1, "queue": "q_fast", "priorities": [0, 1]},
        {"order": 5, "queue": "q_slow"},
    ],
    "admission": {"ssl_offload_delay": 0.01},
    "farm": {
        "servers": [
            {"id": "A", "base_rate": 1.0, "weight": 1},
            {"id": "B", "base_rate": 2.0, "weight": 2},
        ]
    },
}


@pytest.fixture
def make_request():
    """Factory for requests with overridable fields."""
    def _make(id=0, arrival_time=0.0, rtype=RequestType.GET, priority=1,
              source_ip=0x0A000001, url_path="/api/0", service_demand=1.0, secured=False):
        return Request(id, arrival_time, rtype, priority, source_ip, url_path, service_demand, secured)
    return _make


@pytest.fixture
def small_tree():
    """A fresh, mutable copy of the small scenario document."""
    return copy.deepcopy(SMALL_SCENARIO)


@pytest.fixture
def small_scenario(small_tree):
    return build_scenario(small_tree)


@pytest.fixture
def scenario_file(tmp_path, small_tree):
    """The small scenario written to disk, with outputs under tmp_path."""
    small_tree["outputs"] = {"dir": str(tmp_path / "out"), "formats": ["json", "csv", "events"]}
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_tree, indent=4), encoding="utf-8")
    return path
