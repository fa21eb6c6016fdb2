"""
Target group: heterogeneous backend servers and their queue-client agents.

A server holds pulled (or dispatched) requests in a local FIFO backlog and
serves up to `concurrency_limit` of them at once at its effective rate.
The agent running on it observes queue depths, its backlog and its credits,
and decides how many requests to pull each epoch.
"""

import bisect
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from operator import itemgetter
from typing import Deque, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from core.queue_tier import PulledRequest, QueueTier
from core.supervisor import PolicyState, choose_action
from core.workload import Request

logger = logging.getLogger(__name__)

PULL_ACTIONS: Tuple[int, ...] = (0, 1, 2, 4, 8)
DEFAULT_KAPPA = 0.05
DEFAULT_EPOCH = 0.1
DEFAULT_BACKLOG_LIMIT = 0

# Depth/backlog buckets: 0, 1-3, 4-10, >10.  Credit buckets: thirds of [0, cap].
DEPTH_BUCKETS = 4
CREDIT_BUCKETS = 3
N_OBSERVATIONS = DEPTH_BUCKETS * DEPTH_BUCKETS * CREDIT_BUCKETS


class ServerError(RuntimeError):
    """Raised on operations that a dead or saturated server cannot perform."""
    pass


@dataclass
class InService:
    request: Request
    started: float
    completion: float


@dataclass
class ServerState:
    """One backend server and the bookkeeping its agent reports from."""
    server_id: str
    base_rate: float
    concurrency_limit: int = 1
    subscription: List[str] = field(default_factory=list)
    backlog_limit: int = DEFAULT_BACKLOG_LIMIT
    weight: int = 1
    credits: int = 0
    alive: bool = True
    degrade_factor: float = 1.0
    local_backlog: Deque[Tuple[Request, float]] = field(default_factory=deque)
    in_service: Dict[int, InService] = field(default_factory=dict)

    received: int = 0
    completed: int = 0
    # (time, processing_time) per completion; (time, batch, max_wait) per pull.
    completion_log: List[Tuple[float, float]] = field(default_factory=list)
    pull_log: List[Tuple[float, int, float]] = field(default_factory=list)

    @property
    def pull_room(self) -> int:
        """Free service slots plus free local backlog places."""
        free_slots = self.concurrency_limit - len(self.in_service)
        return max(0, free_slots + self.backlog_limit - len(self.local_backlog))

    @property
    def has_free_slot(self) -> bool:
        return len(self.in_service) < self.concurrency_limit

    def accept_pulled(self, batch: Sequence[PulledRequest], now: float) -> None:
        """Append a pulled batch to the local backlog and note the pull."""
        if not self.alive:
            raise ServerError(f"Server {self.server_id} is dead and cannot pull")
        for pulled in batch:
            self.local_backlog.append((pulled.request, now))
        self.received += len(batch)
        self.pull_log.append((now, len(batch), max((p.wait for p in batch), default=0.0)))

    def accept_dispatched(self, request: Request, now: float) -> None:
        """Push mode: the balancer hands a single request to this server."""
        if not self.alive:
            raise ServerError(f"Server {self.server_id} is dead")
        self.local_backlog.append((request, now))
        self.received += 1

    def complete(self, request_id: int, now: float) -> InService:
        """Finish a request in service and record its processing time."""
        if not self.alive:
            raise ServerError(f"Server {self.server_id} is dead")
        try:
            entry = self.in_service.pop(request_id)
        except KeyError:
            raise ServerError(f"Request {request_id} is not in service on {self.server_id}") from None
        self.completed += 1
        self.completion_log.append((now, now - entry.started))
        return entry

    def conserved(self) -> bool:
        """received = completed + backlog + in_service."""
        return self.received == self.completed + len(self.local_backlog) + len(self.in_service)


def effective_rate(server: ServerState, kappa: float = DEFAULT_KAPPA) -> float:
    """
    base_rate * degrade_factor * (1 + kappa * credits).

    Raises:
        ServerError: If the server is dead
    """
    if not server.alive:
        raise ServerError(f"Server {server.server_id} is dead")
    return server.base_rate * server.degrade_factor * (1.0 + kappa * server.credits)


def start_service(server: ServerState, request: Request, now: float,
                  kappa: float = DEFAULT_KAPPA) -> float:
    """
    Move `request` from the local backlog into service.

    The rate is fixed when service starts; later credit changes do not
    stretch or shrink a running request.

    Returns:
        Completion time, now + demand / effective rate

    Raises:
        ServerError: If the server is dead, full, or the request is not waiting
    """
    if not server.alive:
        raise ServerError(f"Server {server.server_id} is dead")
    if not server.has_free_slot:
        raise ServerError(
            f"Server {server.server_id} is at its concurrency limit ({server.concurrency_limit})"
        )
    for index, (waiting, _) in enumerate(server.local_backlog):
        if waiting.id == request.id:
            del server.local_backlog[index]
            break
    else:
        raise ServerError(f"Request {request.id} is not in the backlog of {server.server_id}")

    completion = now + request.service_demand / effective_rate(server, kappa)
    if not completion > now:
        # Guard against a demand so small it vanishes in float addition.
        completion = math.nextafter(now, math.inf)
    server.in_service[request.id] = InService(request, now, completion)
    return completion


class Observation(NamedTuple):
    """Discretized agent state."""
    depth_bucket: int
    backlog_bucket: int
    credit_bucket: int

    @property
    def index(self) -> int:
        return (self.depth_bucket * DEPTH_BUCKETS + self.backlog_bucket) * CREDIT_BUCKETS + self.credit_bucket


def depth_bucket(count: int) -> int:
    """0 -> 0, 1-3 -> 1, 4-10 -> 2, >10 -> 3."""
    if count <= 0:
        return 0
    if count <= 3:
        return 1
    if count <= 10:
        return 2
    return 3


def credit_bucket(credits: int, credit_cap: int) -> int:
    """0 = low, 1 = mid, 2 = high thirds of [0, credit_cap]."""
    if 3 * credits < credit_cap:
        return 0
    if 3 * credits < 2 * credit_cap:
        return 1
    return 2


def agent_observe(server: ServerState, tier: QueueTier, credit_cap: int) -> Observation:
    """Bucketed (subscribed LB depth, local backlog, credits). Pure read."""
    return Observation(
        depth_bucket(tier.total_depth(server.subscription)),
        depth_bucket(len(server.local_backlog)),
        credit_bucket(server.credits, credit_cap),
    )


def agent_decide(observation: Observation, policy: PolicyState,
                 rng: np.random.Generator) -> int:
    """Epsilon-greedy pull batch size from PULL_ACTIONS."""
    return PULL_ACTIONS[choose_action(policy, observation.index, rng)]


def new_agent_policy(epsilon: float) -> PolicyState:
    return PolicyState(N_OBSERVATIONS, len(PULL_ACTIONS), epsilon)


@dataclass(frozen=True)
class AgentReport:
    """What an agent tells the supervisor about one window."""
    server_id: str
    window_start: float
    window_end: float
    completed: int
    mean_processing_time: float
    max_pull_wait: float
    pulls: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "server": self.server_id,
            "window_start": self.window_start,
            "window_end": self.window_end,
            "completed": self.completed,
            "mean_processing_time": self.mean_processing_time,
            "max_pull_wait": self.max_pull_wait,
            "pulls": self.pulls,
        }


def _window(log: List[tuple], start: float, end: float) -> List[tuple]:
    """Slice of a time-ordered log with time in [start, end)."""
    lo = bisect.bisect_left(log, start, key=itemgetter(0))
    hi = bisect.bisect_left(log, end, key=itemgetter(0))
    return log[lo:hi]


def build_report(server: ServerState, window_start: float, window_end: float) -> AgentReport:
    """
    Aggregate completions and pulls with time in [window_start, window_end).

    Raises:
        ServerError: If the window is empty or inverted
    """
    if not window_end > window_start:
        raise ServerError(f"Inverted report window [{window_start}, {window_end})")

    processing = [p for _, p in _window(server.completion_log, window_start, window_end)]
    pulls = [(b, w) for _, b, w in _window(server.pull_log, window_start, window_end)]
    return AgentReport(
        server_id=server.server_id,
        window_start=window_start,
        window_end=window_end,
        completed=len(processing),
        mean_processing_time=sum(processing) / len(processing) if processing else 0.0,
        max_pull_wait=max((w for _, w in pulls), default=0.0),
        pulls=len(pulls),
    )
