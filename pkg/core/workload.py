"""
Synthetic workload generation.

Produces seeded, reproducible request streams: arrival times from a
poisson, deterministic or bursty process, request types from a weighted
mix, and per-type service demands.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.rng import make_stream
from core.state import REQUEST_TYPES, RequestType

logger = logging.getLogger(__name__)

DEFAULT_PRIORITIES: Dict[RequestType, int] = {
    RequestType.CHAT: 0,
    RequestType.GET: 1,
    RequestType.POST: 1,
    RequestType.PUT: 1,
    RequestType.EMAIL: 2,
    RequestType.UPLOAD: 3,
    RequestType.DOWNLOAD: 3,
    RequestType.SYNC: 3,
}

DEFAULT_URL_PATHS: Tuple[str, ...] = tuple(
    f"/{section}/{k}"
    for section in ("api", "static", "mail", "files")
    for k in range(4)
)

DEFAULT_CLIENT_COUNT = 256
# Source identities are drawn from 10.0.0.0/8.
_CLIENT_BASE_IP = 0x0A000000


class WorkloadError(ValueError):
    """Raised when a workload configuration is invalid."""
    pass


@dataclass(frozen=True)
class Request:
    """One unit of work offered to the load balancer."""
    id: int
    arrival_time: float
    rtype: RequestType
    priority: int
    source_ip: int
    url_path: str
    service_demand: float
    secured: bool = False


@dataclass(frozen=True)
class ArrivalProcess:
    """
    Arrival process parameters.

    kind is "poisson" (rate), "deterministic" (interval) or "bursty"
    (base_rate during gaps of gap_len seconds, burst_rate during bursts of
    burst_len seconds; each cycle starts with a gap).
    """
    kind: str = "poisson"
    rate: Optional[float] = None
    interval: Optional[float] = None
    base_rate: Optional[float] = None
    burst_rate: Optional[float] = None
    burst_len: Optional[float] = None
    gap_len: Optional[float] = None

    @classmethod
    def poisson(cls, rate: float) -> "ArrivalProcess":
        return cls(kind="poisson", rate=rate)

    @classmethod
    def deterministic(cls, interval: float) -> "ArrivalProcess":
        return cls(kind="deterministic", interval=interval)

    @classmethod
    def bursty(cls, base_rate: float, burst_rate: float,
               burst_len: float, gap_len: float) -> "ArrivalProcess":
        return cls(kind="bursty", base_rate=base_rate, burst_rate=burst_rate,
                   burst_len=burst_len, gap_len=gap_len)

    def required_fields(self) -> Tuple[str, ...]:
        return {
            "poisson": ("rate",),
            "deterministic": ("interval",),
            "bursty": ("base_rate", "burst_rate", "burst_len", "gap_len"),
        }.get(self.kind, ())


@dataclass(frozen=True)
class DemandDist:
    """Service-demand distribution: constant(value), exponential(mean) or lognormal(mu, sigma)."""
    dist: str = "exponential"
    value: Optional[float] = None
    mean: Optional[float] = 1.0
    mu: Optional[float] = None
    sigma: Optional[float] = None

    @classmethod
    def constant(cls, value: float) -> "DemandDist":
        return cls(dist="constant", value=value, mean=None)

    @classmethod
    def exponential(cls, mean: float) -> "DemandDist":
        return cls(dist="exponential", mean=mean)

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "DemandDist":
        return cls(dist="lognormal", mu=mu, sigma=sigma, mean=None)


def _default_demand() -> Dict[RequestType, DemandDist]:
    return {rtype: DemandDist.exponential(1.0) for rtype in REQUEST_TYPES}


def _uniform_mix() -> Dict[RequestType, float]:
    return {rtype: 1.0 / len(REQUEST_TYPES) for rtype in REQUEST_TYPES}


@dataclass(frozen=True)
class WorkloadConfig:
    """Everything needed to reproduce a request stream."""
    horizon: float
    arrival: ArrivalProcess = field(default_factory=ArrivalProcess)
    type_mix: Dict[RequestType, float] = field(default_factory=_uniform_mix)
    demand: Dict[RequestType, DemandDist] = field(default_factory=_default_demand)
    secured_fraction: float = 0.0
    seed: int = 0
    priorities: Dict[RequestType, int] = field(default_factory=lambda: dict(DEFAULT_PRIORITIES))
    url_paths: Tuple[str, ...] = DEFAULT_URL_PATHS
    client_count: int = DEFAULT_CLIENT_COUNT

    def validate(self) -> None:
        """
        Check the configuration invariants.

        Raises:
            WorkloadError: Naming the first offending field
        """
        if not _positive(self.horizon):
            raise WorkloadError(f"horizon: must be > 0, got {self.horizon!r}")

        arrival = self.arrival
        if arrival.kind not in ("poisson", "deterministic", "bursty"):
            raise WorkloadError(f"arrival.process: unknown process {arrival.kind!r}")
        for name in arrival.required_fields():
            value = getattr(arrival, name)
            if not _positive(value):
                raise WorkloadError(f"arrival.{name}: must be > 0, got {value!r}")

        weights = [self.type_mix.get(rtype, 0.0) for rtype in REQUEST_TYPES]
        for rtype, weight in zip(REQUEST_TYPES, weights):
            if not (math.isfinite(weight) and weight >= 0):
                raise WorkloadError(f"type_mix.{rtype.value}: weight must be >= 0, got {weight!r}")
        if sum(weights) <= 0:
            raise WorkloadError("type_mix: weights must not all be zero")

        for rtype in REQUEST_TYPES:
            if self.type_mix.get(rtype, 0.0) > 0 and rtype not in self.demand:
                raise WorkloadError(f"demand.{rtype.value}: no demand distribution")
        for rtype, dist in self.demand.items():
            _validate_demand(f"demand.{rtype.value}", dist)

        if not (0.0 <= self.secured_fraction <= 1.0):
            raise WorkloadError(
                f"secured_fraction: must be within [0, 1], got {self.secured_fraction!r}"
            )
        if not self.url_paths:
            raise WorkloadError("url_paths: at least one path is required")
        if self.client_count < 1:
            raise WorkloadError(f"client_count: must be >= 1, got {self.client_count!r}")
        for rtype in REQUEST_TYPES:
            if self.priorities.get(rtype, 0) < 0:
                raise WorkloadError(f"priorities.{rtype.value}: must be >= 0")

    def mix_vector(self) -> np.ndarray:
        """Normalized type weights in RequestType declaration order."""
        weights = np.array([self.type_mix.get(rtype, 0.0) for rtype in REQUEST_TYPES], dtype=float)
        return weights / weights.sum()


def _positive(value) -> bool:
    return value is not None and math.isfinite(value) and value > 0


def _validate_demand(path: str, dist: DemandDist) -> None:
    if dist.dist == "constant":
        if not _positive(dist.value):
            raise WorkloadError(f"{path}.value: must be > 0, got {dist.value!r}")
    elif dist.dist == "exponential":
        if not _positive(dist.mean):
            raise WorkloadError(f"{path}.mean: must be > 0, got {dist.mean!r}")
    elif dist.dist == "lognormal":
        if dist.mu is None or not math.isfinite(dist.mu):
            raise WorkloadError(f"{path}.mu: must be a finite number, got {dist.mu!r}")
        if dist.sigma is None or not math.isfinite(dist.sigma) or dist.sigma < 0:
            raise WorkloadError(f"{path}.sigma: must be >= 0, got {dist.sigma!r}")
    else:
        raise WorkloadError(f"{path}.dist: unknown distribution {dist.dist!r}")


def sample_demand(rtype: RequestType, cfg: WorkloadConfig, rng: np.random.Generator) -> float:
    """
    Draw one service demand for a request of type `rtype`.

    Args:
        rtype: Request type whose distribution is used
        cfg: Workload configuration holding the per-type distributions
        rng: Generator advanced by the draw (constant draws nothing)

    Returns:
        Work units, always > 0
    """
    dist = cfg.demand[rtype]
    if dist.dist == "constant":
        return float(dist.value)
    if dist.dist == "exponential":
        value = float(rng.exponential(dist.mean))
    else:
        value = float(rng.lognormal(dist.mu, dist.sigma))
    # Exponential can return exactly 0.0; demand must stay positive.
    return value if value > 0 else float(np.finfo(float).tiny)


def _poisson_times(rng: np.random.Generator, rate: float, start: float, end: float) -> List[float]:
    """Arrival instants of a rate-`rate` Poisson process on [start, end)."""
    times: List[float] = []
    t = start
    chunk = max(16, int(rate * (end - start) * 1.1) + 16)
    while True:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        for instant in t + np.cumsum(gaps):
            if instant >= end:
                return times
            times.append(float(instant))
        t = times[-1]
        chunk = max(16, chunk // 2)


def _arrival_times(cfg: WorkloadConfig, rng: np.random.Generator) -> List[float]:
    arrival = cfg.arrival
    horizon = cfg.horizon

    if arrival.kind == "deterministic":
        count = math.ceil(horizon / arrival.interval) - 1
        times = [k * arrival.interval for k in range(1, count + 2)]
        return [t for t in times if t < horizon]

    if arrival.kind == "poisson":
        return _poisson_times(rng, arrival.rate, 0.0, horizon)

    # Bursty: piecewise-constant rate; memorylessness lets each phase restart
    # its exponential clock at the phase boundary.
    times: List[float] = []
    phase_start = 0.0
    in_burst = False
    while phase_start < horizon:
        length = arrival.burst_len if in_burst else arrival.gap_len
        rate = arrival.burst_rate if in_burst else arrival.base_rate
        phase_end = min(phase_start + length, horizon)
        times.extend(_poisson_times(rng, rate, phase_start, phase_end))
        phase_start = phase_end
        in_burst = not in_burst
    return times


def generate_arrivals(cfg: WorkloadConfig) -> List[Request]:
    """
    Generate the full request stream for a workload.

    Equal configurations (seed included) produce identical sequences.

    Args:
        cfg: Workload configuration

    Returns:
        Requests sorted by arrival time, ids 0..n-1

    Raises:
        WorkloadError: If the configuration is invalid
    """
    cfg.validate()

    times = _arrival_times(cfg, make_stream(cfg.seed, "arrivals"))
    n = len(times)
    if n == 0:
        return []

    type_idx = make_stream(cfg.seed, "types").choice(len(REQUEST_TYPES), size=n, p=cfg.mix_vector())
    secured = make_stream(cfg.seed, "secured").random(n) < cfg.secured_fraction
    clients = make_stream(cfg.seed, "clients").integers(cfg.client_count, size=n)
    paths = make_stream(cfg.seed, "urls").integers(len(cfg.url_paths), size=n)
    demand_rng = make_stream(cfg.seed, "demand")

    requests = []
    for i in range(n):
        rtype = REQUEST_TYPES[int(type_idx[i])]
        requests.append(Request(
            id=i,
            arrival_time=times[i],
            rtype=rtype,
            priority=cfg.priorities.get(rtype, DEFAULT_PRIORITIES[rtype]),
            source_ip=_CLIENT_BASE_IP + int(clients[i]),
            url_path=cfg.url_paths[int(paths[i])],
            service_demand=sample_demand(rtype, cfg, demand_rng),
            secured=bool(secured[i]),
        ))

    logger.debug("Generated %d requests over %.1fs (%s)", n, cfg.horizon, cfg.arrival.kind)
    return requests
