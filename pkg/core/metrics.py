"""
Run metrics.

Computes throughput, response and distribution times, assignment skew and
fairness, utilization and the RL outcomes (credits, evictions) from an event
log. Reports are a pure function of the log, so a persisted log reproduces
its report exactly.
"""

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

CSV_COLUMNS = (
    "run_id", "mode", "policy", "seed", "generated", "completed", "dropped",
    "throughput", "rt_mean", "rt_p50", "rt_p95", "rt_p99", "dt_mean", "dt_p95",
    "skew", "jain", "evictions",
)


class MetricsError(ValueError):
    """Raised for statistics undefined on the given samples."""
    pass


def percentile(samples: Sequence[float], p: float) -> float:
    """
    Nearest-rank percentile: the ceil(p/100 * n)-th smallest sample
    (1-based); p = 0 gives the minimum. No interpolation.

    Raises:
        MetricsError: If samples is empty or p is outside [0, 100]
    """
    if len(samples) == 0:
        raise MetricsError("percentile of an empty sample")
    if not 0 <= p <= 100:
        raise MetricsError(f"percentile rank must be within [0, 100], got {p}")
    ordered = np.sort(np.asarray(samples, dtype=float))
    rank = max(1, math.ceil(p * len(ordered) / 100))
    return float(ordered[rank - 1])


def jain_fairness(values: Sequence[float]) -> float:
    """
    Jain's index (sum x)^2 / (n * sum x^2); 1 for an even split, 1/n when one
    server gets everything.

    Raises:
        MetricsError: For an empty or all-zero input, or negative values
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise MetricsError("Jain index needs at least one value")
    if np.any(x < 0):
        raise MetricsError("Jain index is undefined for negative values")
    squares = float(np.sum(x * x))
    if squares == 0:
        raise MetricsError("Jain index is undefined when every value is zero")
    return float(np.sum(x)) ** 2 / (x.size * squares)


@dataclass
class MetricsReport:
    run_id: str
    mode: str
    policy: str
    seed: int
    horizon: float
    generated: int = 0
    completed: int = 0
    dropped: int = 0
    stranded: int = 0
    throughput: float = 0.0
    response_time: Optional[Dict[str, float]] = None
    distribution_time: Optional[Dict[str, float]] = None
    assigned: Dict[str, int] = field(default_factory=dict)
    skew: int = 0
    jain: Optional[float] = None
    utilization: Dict[str, float] = field(default_factory=dict)
    jain_utilization: Optional[float] = None
    final_credits: Dict[str, int] = field(default_factory=dict)
    evictions: List[List[Any]] = field(default_factory=list)
    max_depth: Dict[str, int] = field(default_factory=dict)
    little_l: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def csv_values(self) -> Dict[str, Any]:
        """Raw values for CSV_COLUMNS; None marks an absent statistic."""
        rt = self.response_time or {}
        dt = self.distribution_time or {}
        return {
            "run_id": self.run_id,
            "mode": self.mode,
            "policy": self.policy,
            "seed": self.seed,
            "generated": self.generated,
            "completed": self.completed,
            "dropped": self.dropped,
            "throughput": self.throughput,
            "rt_mean": rt.get("mean"),
            "rt_p50": rt.get("p50"),
            "rt_p95": rt.get("p95"),
            "rt_p99": rt.get("p99"),
            "dt_mean": dt.get("mean"),
            "dt_p95": dt.get("p95"),
            "skew": self.skew,
            "jain": self.jain,
            "evictions": len(self.evictions),
        }


def _optional_jain(values: Iterable[float]) -> Optional[float]:
    values = list(values)
    if not values or not any(values):
        return None
    return jain_fairness(values)


def finalize(records: Iterable[Dict[str, Any]]) -> MetricsReport:
    """
    Build the report of one run from its event log records.

    Args:
        records: Log records in log order, starting with the `begin` record

    Returns:
        MetricsReport; statistics over empty samples are None
    """
    records = list(records)
    if not records or records[0]["kind"] != "begin":
        raise MetricsError("Event log must start with a begin record")
    begin = records[0]["detail"]
    horizon = float(begin["horizon"])
    servers = list(begin["servers"])

    arrivals: Dict[int, float] = {}
    responses: List[float] = []
    distribution: List[float] = []
    assigned = {sid: 0 for sid in servers}
    completed_on = {sid: 0 for sid in servers}
    busy = {sid: 0.0 for sid in servers}
    depth: Dict[str, int] = {qid: 0 for qid in begin.get("queues", [])}
    max_depth: Dict[str, int] = dict(depth)
    evictions: List[List[Any]] = []
    in_system: List[int] = []
    final_credits: Dict[str, int] = dict(begin.get("credits", {}))
    dropped = 0

    for record in records[1:]:
        kind = record["kind"]
        detail = record["detail"]
        if kind == "arrival":
            arrivals[record["request"]] = record["t"]
        elif kind == "enqueue":
            qid = detail["queue"]
            depth[qid] += 1
            max_depth[qid] = max(max_depth[qid], depth[qid])
        elif kind == "overflow":
            dropped += 1
        elif kind == "pull":
            assigned[record["server"]] += len(detail["requests"])
            for rid, qid in zip(detail["requests"], detail["queues"]):
                depth[qid] -= 1
                distribution.append(record["t"] - arrivals[rid])
        elif kind == "dispatch":
            assigned[record["server"]] += 1
            distribution.append(record["t"] - arrivals[record["request"]])
        elif kind == "complete":
            responses.append(detail["response"])
            completed_on[record["server"]] += 1
            busy[record["server"]] += detail["processing"]
        elif kind == "evict":
            evictions.append([record["server"], record["t"]])
        elif kind == "sample":
            in_system.append(detail["admitting"] + detail["queued"]
                             + detail["backlog"] + detail["in_service"])
        elif kind == "end":
            final_credits = dict(detail.get("credits", final_credits))

    evicted = {sid for sid, _ in evictions}
    concurrency = {sid: spec["concurrency"] for sid, spec in begin["servers"].items()}
    utilization = {
        sid: (busy[sid] / (horizon * concurrency[sid]) if horizon > 0 else 0.0)
        for sid in servers
    }
    counts = list(assigned.values())

    return MetricsReport(
        run_id=begin["run_id"],
        mode=begin["mode"],
        policy=begin["policy"],
        seed=begin["seed"],
        horizon=horizon,
        generated=len(arrivals),
        completed=len(responses),
        dropped=dropped,
        stranded=sum(assigned[sid] - completed_on[sid] for sid in evicted),
        throughput=len(responses) / horizon if horizon > 0 else 0.0,
        response_time=_response_stats(responses),
        distribution_time=_distribution_stats(distribution),
        assigned=assigned,
        skew=(max(counts) - min(counts)) if counts else 0,
        jain=_optional_jain(counts),
        utilization=utilization,
        jain_utilization=_optional_jain(utilization.values()),
        final_credits=final_credits,
        evictions=evictions,
        max_depth=max_depth,
        little_l=float(np.mean(in_system)) if in_system else None,
    )


def _response_stats(samples: List[float]) -> Optional[Dict[str, float]]:
    if not samples:
        return None
    return {
        "mean": float(np.mean(samples)),
        "p50": percentile(samples, 50),
        "p95": percentile(samples, 95),
        "p99": percentile(samples, 99),
        "max": float(np.max(samples)),
    }


def _distribution_stats(samples: List[float]) -> Optional[Dict[str, float]]:
    if not samples:
        return None
    return {"mean": float(np.mean(samples)), "p95": percentile(samples, 95)}
