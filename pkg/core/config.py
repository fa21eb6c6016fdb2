"""
Scenario configuration.

Scenarios are JSON documents deep-merged over DEFAULT_SCENARIO and then
validated as a whole: every problem is reported, each prefixed with the
dotted path of the offending field. A parsed scenario dumps back to a
normalized document (all defaults filled) that parses to an equal config.
"""

import copy
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from core.queue_tier import (
    DEFAULT_QUEUE_CAPACITY,
    AdmissionConfig,
    ClassificationRule,
    QueueTierError,
    RuleSet,
)
from core.state import REQUEST_TYPES, Mode, PolicyTag, RequestType
from core.supervisor import SupervisorConfig
from core.target_group import DEFAULT_BACKLOG_LIMIT, DEFAULT_EPOCH, DEFAULT_KAPPA
from core.workload import (
    DEFAULT_CLIENT_COUNT,
    DEFAULT_PRIORITIES,
    DEFAULT_URL_PATHS,
    ArrivalProcess,
    DemandDist,
    WorkloadConfig,
    WorkloadError,
)

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("json", "csv", "events")

DEFAULT_SCENARIO: Dict[str, Any] = {
    "name": "scenario",
    "seed": 1,
    "horizon": 600.0,
    "mode": "pull_rl",        # "pull_rl" or "push"
    "policy": None,           # push only: RR, WRR, LC, WLC, ADAPTIVE, WRT, IP_HASH, URL_HASH, RANDOM
    "workload": {
        "arrival": {"process": "poisson", "rate": 4.9},
        "type_mix": {
            "GET": 0.30, "POST": 0.10, "PUT": 0.05, "EMAIL": 0.15,
            "CHAT": 0.15, "UPLOAD": 0.10, "DOWNLOAD": 0.10, "SYNC": 0.05,
        },
        "demand": {"default": {"dist": "exponential", "mean": 1.0}},
        "secured_fraction": 0.2,
        "priorities": {rtype.value: p for rtype, p in DEFAULT_PRIORITIES.items()},
        "url_paths": list(DEFAULT_URL_PATHS),
        "client_count": DEFAULT_CLIENT_COUNT,
    },
    # Declaration order is priority order (default subscriptions follow it).
    "queues": [
        {"id": "q_realtime", "capacity": DEFAULT_QUEUE_CAPACITY},
        {"id": "q_web", "capacity": DEFAULT_QUEUE_CAPACITY},
        {"id": "q_mail", "capacity": DEFAULT_QUEUE_CAPACITY},
        {"id": "q_bulk", "capacity": DEFAULT_QUEUE_CAPACITY},
    ],
    "rules": [
        {"order": 1, "queue": "q_realtime", "priorities": [0]},
        {"order": 2, "queue": "q_web", "priorities": [1]},
        {"order": 3, "queue": "q_mail", "priorities": [2]},
        {"order": 9, "queue": "q_bulk"},
    ],
    "admission": {"ssl_offload_delay": 0.002},
    "farm": {
        "kappa": DEFAULT_KAPPA,
        "epoch": DEFAULT_EPOCH,
        "ewma_alpha": 0.2,
        "servers": [
            {"id": "A", "base_rate": 1.0, "concurrency": 1, "weight": 1},
            {"id": "B", "base_rate": 2.0, "concurrency": 1, "weight": 2},
            {"id": "C", "base_rate": 4.0, "concurrency": 1, "weight": 4},
        ],
    },
    "faults": [],
    "metrics": {"sample_interval": 1.0},
    "outputs": {"dir": "out", "formats": list(OUTPUT_FORMATS)},
}

DEFAULT_SUPERVISOR: Dict[str, Any] = {
    "stipulated_time": 1.0,
    "reward_grant": 1,
    "penalty": 1,
    "credit_cap": 20,
    "evict_floor": 0,
    "evict_patience": 5,
    "tick_interval": 1.0,
    "q_alpha": 0.1,
    "q_gamma": 0.9,
    "epsilon_initial": 0.2,
    "epsilon_decay": 0.99,
    "epsilon_floor": 0.01,
    "initial_credits": None,
}

_SERVER_KEYS = {"id", "base_rate", "concurrency", "backlog_limit", "weight", "subscription", "initial_credits"}
_RULE_KEYS = {"order", "queue", "rtypes", "priorities", "url_prefix"}
_QUEUE_KEYS = {"id", "capacity"}
_FAULT_KEYS = {"time", "server", "factor"}


class ScenarioError(ValueError):
    """Scenario syntax or validation failure; carries every message found."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class QueueSpec:
    queue_id: str
    capacity: Optional[int]


@dataclass(frozen=True)
class ServerSpec:
    server_id: str
    base_rate: float
    concurrency: int = 1
    backlog_limit: int = DEFAULT_BACKLOG_LIMIT
    weight: int = 1
    subscription: Tuple[str, ...] = ()
    initial_credits: Optional[int] = None


@dataclass(frozen=True)
class FaultSpec:
    time: float
    server_id: str
    factor: float


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully validated scenario."""
    name: str
    seed: int
    horizon: float
    mode: Mode
    policy: Optional[PolicyTag]
    workload: WorkloadConfig
    queues: Tuple[QueueSpec, ...]
    rules: Tuple[ClassificationRule, ...]
    admission: AdmissionConfig
    servers: Tuple[ServerSpec, ...]
    kappa: float = DEFAULT_KAPPA
    epoch: float = DEFAULT_EPOCH
    ewma_alpha: float = 0.2
    supervisor: Optional[SupervisorConfig] = None
    faults: Tuple[FaultSpec, ...] = ()
    sample_interval: float = 1.0
    output_dir: str = "out"
    output_formats: Tuple[str, ...] = OUTPUT_FORMATS

    @property
    def policy_label(self) -> str:
        """Label used in reports: the push policy tag, or PULL_RL."""
        return self.policy.value if self.mode is Mode.PUSH else "PULL_RL"

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get a value of the normalized tree using dot notation.

        Examples:
            cfg.get("farm.kappa")                   # 0.05
            cfg.get("supervisor.stipulated_time")   # 1.0
        """
        value: Any = to_tree(self)
        for k in key.split('.'):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value


def deep_update(base: Dict, updates: Dict) -> Dict:
    """Recursively merge `updates` into `base`; lists are replaced whole."""
    for key, value in updates.items():
        if isinstance(value, dict) and key in base and isinstance(base[key], dict):
            base[key] = deep_update(base[key].copy(), value)
        else:
            base[key] = value
    return base


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


class _Validator:
    """Collects errors while converting the merged tree into typed config."""

    def __init__(self):
        self.errors: List[str] = []

    def error(self, path: str, message: str) -> None:
        self.errors.append(f"{path}: {message}")

    def unknown_keys(self, path: str, tree: Dict, allowed) -> None:
        for key in sorted(set(tree) - set(allowed)):
            self.error(f"{path}.{key}" if path else key, "unknown key")

    def number(self, path: str, value: Any, *, minimum: Optional[float] = None,
               exclusive: bool = False, maximum: Optional[float] = None,
               default: float = 0.0) -> float:
        if not _is_number(value):
            self.error(path, f"must be a number, got {value!r}")
            return default
        if minimum is not None and (value <= minimum if exclusive else value < minimum):
            self.error(path, f"must be {'>' if exclusive else '>='} {minimum}, got {value!r}")
        if maximum is not None and value > maximum:
            self.error(path, f"must be <= {maximum}, got {value!r}")
        return float(value)

    def integer(self, path: str, value: Any, *, minimum: Optional[int] = None,
                default: int = 0) -> int:
        if not _is_int(value):
            self.error(path, f"must be an integer, got {value!r}")
            return default
        if minimum is not None and value < minimum:
            self.error(path, f"must be >= {minimum}, got {value!r}")
        return value

    def string(self, path: str, value: Any, default: str = "") -> str:
        if not isinstance(value, str) or not value:
            self.error(path, f"must be a non-empty string, got {value!r}")
            return default
        return value

    def mapping(self, path: str, value: Any) -> Dict:
        if not isinstance(value, dict):
            self.error(path, f"must be an object, got {type(value).__name__}")
            return {}
        return value

    def sequence(self, path: str, value: Any) -> List:
        if not isinstance(value, list):
            self.error(path, f"must be a list, got {type(value).__name__}")
            return []
        return value

    def request_type(self, path: str, value: Any) -> Optional[RequestType]:
        try:
            return RequestType.parse(value)
        except ValueError:
            self.error(path, f"unknown request type {value!r}")
            return None


def _build_arrival(v: _Validator, tree: Dict) -> ArrivalProcess:
    kind = tree.get("process")
    fields = ArrivalProcess(kind=kind).required_fields()
    if not fields:
        v.error("workload.arrival.process", f"unknown process {kind!r}")
        return ArrivalProcess()
    values = {
        name: v.number(f"workload.arrival.{name}", tree.get(name), minimum=0, exclusive=True, default=1.0)
        for name in fields
    }
    return ArrivalProcess(kind=kind, **values)


def _build_dist(v: _Validator, path: str, tree: Any) -> DemandDist:
    tree = v.mapping(path, tree)
    kind = tree.get("dist")
    if kind == "constant":
        return DemandDist.constant(v.number(f"{path}.value", tree.get("value"), minimum=0, exclusive=True, default=1.0))
    if kind == "exponential":
        return DemandDist.exponential(v.number(f"{path}.mean", tree.get("mean"), minimum=0, exclusive=True, default=1.0))
    if kind == "lognormal":
        return DemandDist.lognormal(
            v.number(f"{path}.mu", tree.get("mu")),
            v.number(f"{path}.sigma", tree.get("sigma"), minimum=0),
        )
    v.error(f"{path}.dist", f"unknown distribution {kind!r}")
    return DemandDist.exponential(1.0)


def _build_workload(v: _Validator, tree: Dict, horizon: float, seed: int) -> WorkloadConfig:
    v.unknown_keys("workload", tree, DEFAULT_SCENARIO["workload"])
    arrival = _build_arrival(v, v.mapping("workload.arrival", tree.get("arrival")))

    type_mix = {rtype: 0.0 for rtype in REQUEST_TYPES}
    for key, weight in v.mapping("workload.type_mix", tree.get("type_mix")).items():
        rtype = v.request_type(f"workload.type_mix.{key}", key)
        if rtype is not None:
            type_mix[rtype] = v.number(f"workload.type_mix.{key}", weight, minimum=0)
    if not any(type_mix.values()):
        v.error("workload.type_mix", "weights must not all be zero")

    demand_tree = v.mapping("workload.demand", tree.get("demand"))
    default_dist = _build_dist(v, "workload.demand.default", demand_tree.get("default", {"dist": "exponential", "mean": 1.0}))
    demand = {rtype: default_dist for rtype in REQUEST_TYPES}
    for key, dist_tree in demand_tree.items():
        if key == "default":
            continue
        rtype = v.request_type(f"workload.demand.{key}", key)
        if rtype is not None:
            demand[rtype] = _build_dist(v, f"workload.demand.{key}", dist_tree)

    priorities = dict(DEFAULT_PRIORITIES)
    for key, priority in v.mapping("workload.priorities", tree.get("priorities")).items():
        rtype = v.request_type(f"workload.priorities.{key}", key)
        if rtype is not None:
            priorities[rtype] = v.integer(f"workload.priorities.{key}", priority, minimum=0)

    url_paths = v.sequence("workload.url_paths", tree.get("url_paths"))
    if not url_paths:
        v.error("workload.url_paths", "at least one path is required")
    for i, path in enumerate(url_paths):
        v.string(f"workload.url_paths[{i}]", path)

    workload = WorkloadConfig(
        horizon=horizon,
        arrival=arrival,
        type_mix=type_mix,
        demand=demand,
        secured_fraction=v.number("workload.secured_fraction", tree.get("secured_fraction"), minimum=0, maximum=1),
        seed=seed,
        priorities=priorities,
        url_paths=tuple(p for p in url_paths if isinstance(p, str)) or DEFAULT_URL_PATHS,
        client_count=v.integer("workload.client_count", tree.get("client_count"), minimum=1, default=1),
    )
    if not v.errors:
        try:
            # A zero horizon is legal for a scenario (empty run).
            replace(workload, horizon=horizon or 1.0).validate()
        except WorkloadError as e:
            v.error("workload", str(e))
    return workload


def _build_queues(v: _Validator, items: List) -> Tuple[QueueSpec, ...]:
    if not items:
        v.error("queues", "at least one queue is required")
    queues = []
    seen = set()
    for i, item in enumerate(items):
        path = f"queues[{i}]"
        item = v.mapping(path, item)
        v.unknown_keys(path, item, _QUEUE_KEYS)
        queue_id = v.string(f"{path}.id", item.get("id"), default=f"queue{i}")
        if queue_id in seen:
            v.error(f"{path}.id", f"duplicate queue id {queue_id!r}")
        seen.add(queue_id)
        capacity = item.get("capacity", DEFAULT_QUEUE_CAPACITY)
        if capacity is not None:
            capacity = v.integer(f"{path}.capacity", capacity, minimum=1, default=1)
        queues.append(QueueSpec(queue_id, capacity))
    return tuple(queues)


def _build_rules(v: _Validator, items: List, queue_ids: set) -> Tuple[ClassificationRule, ...]:
    rules = []
    for i, item in enumerate(items):
        item = v.mapping(f"rules[{i}]", item)
        order = v.integer(f"rules[{i}].order", item.get("order"), default=i)
        path = f"rules[{i}] (order {order})"
        v.unknown_keys(path, item, _RULE_KEYS)
        queue_id = v.string(f"{path}.queue", item.get("queue"))
        if queue_id and queue_id not in queue_ids:
            v.error(f"{path}.queue", f"unknown queue {queue_id!r}")

        rtypes = None
        if item.get("rtypes") is not None:
            parsed = [v.request_type(f"{path}.rtypes", t) for t in v.sequence(f"{path}.rtypes", item["rtypes"])]
            rtypes = frozenset(t for t in parsed if t is not None)
        priorities = None
        if item.get("priorities") is not None:
            priorities = frozenset(
                v.integer(f"{path}.priorities", p, minimum=0)
                for p in v.sequence(f"{path}.priorities", item["priorities"])
            )
        url_prefix = item.get("url_prefix")
        if url_prefix is not None:
            url_prefix = v.string(f"{path}.url_prefix", url_prefix)
        rules.append(ClassificationRule(order, queue_id, rtypes, priorities, url_prefix))

    try:
        RuleSet(rules)
    except QueueTierError as e:
        v.error("rules", str(e))
    return tuple(sorted(rules, key=lambda r: r.order))


def _build_servers(v: _Validator, items: List, queue_order: List[str]) -> Tuple[ServerSpec, ...]:
    if not items:
        v.error("farm.servers", "at least one server is required")
    servers = []
    seen = set()
    for i, item in enumerate(items):
        path = f"farm.servers[{i}]"
        item = v.mapping(path, item)
        v.unknown_keys(path, item, _SERVER_KEYS)
        server_id = v.string(f"{path}.id", item.get("id"), default=f"server{i}")
        if server_id in seen:
            v.error(f"{path}.id", f"duplicate server id {server_id!r}")
        seen.add(server_id)

        subscription = item.get("subscription")
        if subscription is None:
            subscription = list(queue_order)
        subscription = v.sequence(f"{path}.subscription", subscription)
        if not subscription:
            v.error(f"{path}.subscription", "must name at least one queue")
        for queue_id in subscription:
            if queue_id not in queue_order:
                v.error(f"{path}.subscription", f"unknown queue {queue_id!r}")

        initial_credits = item.get("initial_credits")
        if initial_credits is not None:
            initial_credits = v.integer(f"{path}.initial_credits", initial_credits, minimum=0)

        servers.append(ServerSpec(
            server_id=server_id,
            base_rate=v.number(f"{path}.base_rate", item.get("base_rate"), minimum=0, exclusive=True, default=1.0),
            concurrency=v.integer(f"{path}.concurrency", item.get("concurrency", 1), minimum=1, default=1),
            backlog_limit=v.integer(f"{path}.backlog_limit", item.get("backlog_limit", DEFAULT_BACKLOG_LIMIT),
                                    minimum=0, default=DEFAULT_BACKLOG_LIMIT),
            weight=v.integer(f"{path}.weight", item.get("weight", 1), minimum=1, default=1),
            subscription=tuple(q for q in subscription if isinstance(q, str)),
            initial_credits=initial_credits,
        ))
    return tuple(servers)


def _build_supervisor(v: _Validator, tree: Dict) -> SupervisorConfig:
    v.unknown_keys("supervisor", tree, DEFAULT_SUPERVISOR)
    ints = {"reward_grant", "penalty", "credit_cap", "evict_floor", "evict_patience"}
    values: Dict[str, Any] = {}
    for key, default in DEFAULT_SUPERVISOR.items():
        value = tree.get(key, default)
        path = f"supervisor.{key}"
        if key == "initial_credits":
            values[key] = None if value is None else v.integer(path, value, minimum=0)
        elif key in ints:
            values[key] = v.integer(path, value, default=default)
        else:
            values[key] = v.number(path, value, default=default)
    cfg = SupervisorConfig(**values)
    for problem in cfg.errors():
        v.error("supervisor", problem)
    return cfg


def _build_faults(v: _Validator, items: List, server_ids: set) -> Tuple[FaultSpec, ...]:
    faults = []
    for i, item in enumerate(items):
        path = f"faults[{i}]"
        item = v.mapping(path, item)
        v.unknown_keys(path, item, _FAULT_KEYS)
        server_id = v.string(f"{path}.server", item.get("server"))
        if server_id and server_id not in server_ids:
            v.error(f"{path}.server", f"unknown server {server_id!r}")
        faults.append(FaultSpec(
            time=v.number(f"{path}.time", item.get("time"), minimum=0),
            server_id=server_id,
            factor=v.number(f"{path}.factor", item.get("factor"), minimum=0, exclusive=True, maximum=1, default=1.0),
        ))
    return tuple(sorted(faults, key=lambda f: f.time))


def build_scenario(loaded: Dict[str, Any]) -> ScenarioConfig:
    """
    Merge a loaded document over the defaults and validate it.

    Raises:
        ScenarioError: Listing every problem found
    """
    v = _Validator()
    loaded = v.mapping("", loaded) if not isinstance(loaded, dict) else loaded
    v.unknown_keys("", loaded, list(DEFAULT_SCENARIO) + ["supervisor"])

    tree = deep_update(copy.deepcopy(DEFAULT_SCENARIO), {k: v_ for k, v_ in loaded.items() if k != "supervisor"})
    # A given type mix replaces the default one instead of merging into it.
    loaded_workload = loaded.get("workload")
    if isinstance(loaded_workload, dict) and "type_mix" in loaded_workload:
        tree["workload"]["type_mix"] = loaded_workload["type_mix"]

    try:
        mode = Mode(tree.get("mode"))
    except ValueError:
        v.error("mode", f"must be 'pull_rl' or 'push', got {tree.get('mode')!r}")
        mode = Mode.PULL_RL

    policy = None
    if mode is Mode.PUSH:
        if tree.get("policy") is None:
            v.error("policy", "required in push mode")
        else:
            try:
                policy = PolicyTag(str(tree["policy"]).upper())
            except ValueError:
                v.error("policy", f"unknown policy {tree['policy']!r}")
        if "supervisor" in loaded:
            v.error("supervisor", "only valid in pull_rl mode")
    elif tree.get("policy") is not None:
        v.error("policy", "only valid in push mode")

    supervisor = None
    if mode is Mode.PULL_RL:
        sup_tree = deep_update(copy.deepcopy(DEFAULT_SUPERVISOR), v.mapping("supervisor", loaded.get("supervisor", {})))
        supervisor = _build_supervisor(v, sup_tree)

    seed = v.integer("seed", tree.get("seed"), minimum=0)
    if seed >= 2 ** 64:
        v.error("seed", "must fit in 64 bits")
    horizon = v.number("horizon", tree.get("horizon"), minimum=0)

    workload = _build_workload(v, v.mapping("workload", tree.get("workload")), horizon, seed)
    queues = _build_queues(v, v.sequence("queues", tree.get("queues")))
    queue_order = [q.queue_id for q in queues]
    rules = _build_rules(v, v.sequence("rules", tree.get("rules")), set(queue_order))

    admission_tree = v.mapping("admission", tree.get("admission"))
    v.unknown_keys("admission", admission_tree, DEFAULT_SCENARIO["admission"])
    admission = AdmissionConfig(
        v.number("admission.ssl_offload_delay", admission_tree.get("ssl_offload_delay"), minimum=0)
    )

    farm = v.mapping("farm", tree.get("farm"))
    v.unknown_keys("farm", farm, DEFAULT_SCENARIO["farm"])
    servers = _build_servers(v, v.sequence("farm.servers", farm.get("servers")), queue_order)
    if supervisor is not None:
        for i, server in enumerate(servers):
            credits = server.initial_credits
            if credits is not None and not (supervisor.evict_floor <= credits <= supervisor.credit_cap):
                v.error(f"farm.servers[{i}].initial_credits", "must lie within [evict_floor, credit_cap]")

    faults = _build_faults(v, v.sequence("faults", tree.get("faults")), {s.server_id for s in servers})

    metrics_tree = v.mapping("metrics", tree.get("metrics"))
    v.unknown_keys("metrics", metrics_tree, DEFAULT_SCENARIO["metrics"])
    outputs = v.mapping("outputs", tree.get("outputs"))
    v.unknown_keys("outputs", outputs, DEFAULT_SCENARIO["outputs"])
    formats = v.sequence("outputs.formats", outputs.get("formats"))
    for fmt in formats:
        if fmt not in OUTPUT_FORMATS:
            v.error("outputs.formats", f"unknown format {fmt!r}")

    config = ScenarioConfig(
        name=v.string("name", tree.get("name"), default="scenario"),
        seed=seed,
        horizon=horizon,
        mode=mode,
        policy=policy,
        workload=workload,
        queues=queues,
        rules=rules,
        admission=admission,
        servers=servers,
        kappa=v.number("farm.kappa", farm.get("kappa"), minimum=0),
        epoch=v.number("farm.epoch", farm.get("epoch"), minimum=0, exclusive=True, default=DEFAULT_EPOCH),
        ewma_alpha=v.number("farm.ewma_alpha", farm.get("ewma_alpha"), minimum=0, exclusive=True, maximum=1,
                            default=0.2),
        supervisor=supervisor,
        faults=faults,
        sample_interval=v.number("metrics.sample_interval", metrics_tree.get("sample_interval"),
                                 minimum=0, exclusive=True, default=1.0),
        output_dir=v.string("outputs.dir", outputs.get("dir"), default="out"),
        output_formats=tuple(f for f in formats if f in OUTPUT_FORMATS),
    )

    if v.errors:
        raise ScenarioError(v.errors)
    return config


def parse_scenario(text: str) -> ScenarioConfig:
    """
    Parse and validate scenario text.

    Raises:
        ScenarioError: On a JSON syntax error (with line and column) or on
            any semantic error (all of them, with field paths)
    """
    try:
        loaded = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError([f"line {e.lineno}, column {e.colno}: {e.msg}"]) from e
    if not isinstance(loaded, dict):
        raise ScenarioError([f"scenario must be a JSON object, got {type(loaded).__name__}"])
    return build_scenario(loaded)


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """Read and parse a scenario file. OSError propagates to the caller."""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    config = parse_scenario(text)
    logger.info("✅ Scenario loaded from %s", path)
    return config


def _dist_tree(dist: DemandDist) -> Dict[str, Any]:
    if dist.dist == "constant":
        return {"dist": "constant", "value": dist.value}
    if dist.dist == "exponential":
        return {"dist": "exponential", "mean": dist.mean}
    return {"dist": "lognormal", "mu": dist.mu, "sigma": dist.sigma}


def to_tree(cfg: ScenarioConfig) -> Dict[str, Any]:
    """The normalized document of a scenario (every default made explicit)."""
    wl = cfg.workload
    arrival = {"process": wl.arrival.kind}
    arrival.update({name: getattr(wl.arrival, name) for name in wl.arrival.required_fields()})

    rules = []
    for rule in cfg.rules:
        entry: Dict[str, Any] = {"order": rule.order, "queue": rule.queue_id}
        if rule.rtypes is not None:
            entry["rtypes"] = sorted(t.value for t in rule.rtypes)
        if rule.priorities is not None:
            entry["priorities"] = sorted(rule.priorities)
        if rule.url_prefix is not None:
            entry["url_prefix"] = rule.url_prefix
        rules.append(entry)

    servers = []
    for server in cfg.servers:
        entry = {
            "id": server.server_id,
            "base_rate": server.base_rate,
            "concurrency": server.concurrency,
            "backlog_limit": server.backlog_limit,
            "weight": server.weight,
            "subscription": list(server.subscription),
        }
        if server.initial_credits is not None:
            entry["initial_credits"] = server.initial_credits
        servers.append(entry)

    tree: Dict[str, Any] = {
        "name": cfg.name,
        "seed": cfg.seed,
        "horizon": cfg.horizon,
        "mode": cfg.mode.value,
        "workload": {
            "arrival": arrival,
            "type_mix": {t.value: wl.type_mix[t] for t in REQUEST_TYPES},
            "demand": {t.value: _dist_tree(wl.demand[t]) for t in REQUEST_TYPES},
            "secured_fraction": wl.secured_fraction,
            "priorities": {t.value: wl.priorities[t] for t in REQUEST_TYPES},
            "url_paths": list(wl.url_paths),
            "client_count": wl.client_count,
        },
        "queues": [{"id": q.queue_id, "capacity": q.capacity} for q in cfg.queues],
        "rules": rules,
        "admission": {"ssl_offload_delay": cfg.admission.ssl_offload_delay},
        "farm": {
            "kappa": cfg.kappa,
            "epoch": cfg.epoch,
            "ewma_alpha": cfg.ewma_alpha,
            "servers": servers,
        },
        "faults": [{"time": f.time, "server": f.server_id, "factor": f.factor} for f in cfg.faults],
        "metrics": {"sample_interval": cfg.sample_interval},
        "outputs": {"dir": cfg.output_dir, "formats": list(cfg.output_formats)},
    }
    if cfg.mode is Mode.PUSH:
        tree["policy"] = cfg.policy.value
    if cfg.supervisor is not None:
        tree["supervisor"] = {key: getattr(cfg.supervisor, key) for key in DEFAULT_SUPERVISOR}
    return tree


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Normalized scenario text; parse_scenario(dump_scenario(cfg)) == cfg."""
    return json.dumps(to_tree(cfg), indent=4, sort_keys=True, ensure_ascii=False) + "\n"


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    """Same scenario with a different run seed (workload included)."""
    return replace(cfg, seed=seed, workload=replace(cfg.workload, seed=seed))


def with_mode(cfg: ScenarioConfig, token: str) -> ScenarioConfig:
    """
    Same scenario run under another mode: "pull_rl" (any case) or a push
    policy tag.

    Raises:
        ScenarioError: If the token names neither
    """
    if token.lower() == Mode.PULL_RL.value:
        supervisor = cfg.supervisor or _build_supervisor(_Validator(), copy.deepcopy(DEFAULT_SUPERVISOR))
        return replace(cfg, mode=Mode.PULL_RL, policy=None, supervisor=supervisor)
    try:
        tag = PolicyTag(token.upper())
    except ValueError:
        raise ScenarioError([f"policies: unknown policy or mode {token!r}"]) from None
    return replace(cfg, mode=Mode.PUSH, policy=tag, supervisor=None)
