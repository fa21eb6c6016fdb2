"""
Load-balancer queue tier.

Classifies admitted requests into in-memory FIFO queues with static rules
and serves pull requests from the server agents.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from core.state import EnqueueResult, RequestType
from core.workload import Request

logger = logging.getLogger(__name__)

DEFAULT_QUEUE_CAPACITY = 10_000


class QueueTierError(ValueError):
    """Raised for invalid rule sets and unknown queue ids."""
    pass


@dataclass(frozen=True)
class ClassificationRule:
    """
    Static routing rule. Unset predicates match anything, so a rule with
    no predicates at all is a catch-all.
    """
    order: int
    queue_id: str
    rtypes: Optional[FrozenSet[RequestType]] = None
    priorities: Optional[FrozenSet[int]] = None
    url_prefix: Optional[str] = None

    @property
    def is_catch_all(self) -> bool:
        return self.rtypes is None and self.priorities is None and self.url_prefix is None

    def matches(self, request: Request) -> bool:
        if self.rtypes is not None and request.rtype not in self.rtypes:
            return False
        if self.priorities is not None and request.priority not in self.priorities:
            return False
        if self.url_prefix is not None and not request.url_path.startswith(self.url_prefix):
            return False
        return True


class RuleSet:
    """Rules sorted by rank; validated once at construction."""

    def __init__(self, rules: Iterable[ClassificationRule]):
        """
        Args:
            rules: Classification rules in any order

        Raises:
            QueueTierError: On duplicate ranks or a missing catch-all
        """
        self.rules: Tuple[ClassificationRule, ...] = tuple(sorted(rules, key=lambda r: r.order))
        orders = [rule.order for rule in self.rules]
        if len(set(orders)) != len(orders):
            raise QueueTierError(f"Rule ranks must be unique, got {orders}")
        if not any(rule.is_catch_all for rule in self.rules):
            raise QueueTierError("Rule set needs at least one catch-all rule")

    def __iter__(self):
        return iter(self.rules)


def classify(request: Request, rules: RuleSet) -> str:
    """Queue id of the lowest-rank rule matching `request`."""
    for rule in rules:
        if rule.matches(request):
            return rule.queue_id
    # Unreachable: RuleSet guarantees a catch-all.
    raise QueueTierError("No classification rule matched")


@dataclass(frozen=True)
class AdmissionConfig:
    """Front-door processing applied before a request is routed."""
    ssl_offload_delay: float = 0.0


def admit(request: Request, cfg: AdmissionConfig, now: float) -> float:
    """
    Effective enqueue time after admission.

    Secured requests pay the SSL offload delay; everything else is
    admitted at `now`.
    """
    return now + cfg.ssl_offload_delay if request.secured else now


@dataclass(frozen=True)
class PulledRequest:
    """A request handed to an agent, with its queue wait at pull time."""
    request: Request
    queue_id: str
    enqueue_time: float
    wait: float


class LbQueue:
    """Bounded (or unbounded) FIFO of (request, enqueue_time)."""

    def __init__(self, queue_id: str, capacity: Optional[int] = DEFAULT_QUEUE_CAPACITY):
        """
        Args:
            queue_id: Queue identifier
            capacity: Maximum entries, or None for unbounded
        """
        if capacity is not None and capacity < 1:
            raise QueueTierError(f"Queue {queue_id!r}: capacity must be positive or unbounded")
        self.queue_id = queue_id
        self.capacity = capacity
        self.entries: Deque[Tuple[Request, float]] = deque()

        self.offered = 0
        self.pulled = 0
        self.overflowed = 0

    def is_full(self) -> bool:
        return self.capacity is not None and len(self.entries) >= self.capacity

    def __len__(self) -> int:
        return len(self.entries)


class QueueTier:
    """The set of classified queues plus the dropped-request ledger."""

    def __init__(self, queues: Sequence[LbQueue]):
        """
        Args:
            queues: Queues in declaration (priority) order
        """
        self.queues: Dict[str, LbQueue] = {}
        for queue in queues:
            if queue.queue_id in self.queues:
                raise QueueTierError(f"Duplicate queue id {queue.queue_id!r}")
            self.queues[queue.queue_id] = queue
        self.dropped: List[Tuple[int, str, float]] = []

    @property
    def queue_ids(self) -> List[str]:
        return list(self.queues)

    def _queue(self, queue_id: str) -> LbQueue:
        try:
            return self.queues[queue_id]
        except KeyError:
            raise QueueTierError(f"Unknown queue id {queue_id!r}") from None

    def enqueue(self, queue_id: str, request: Request, enqueue_time: float) -> EnqueueResult:
        """
        Append a request at the tail of a queue.

        A full queue rejects the new request and records it in the dropped
        ledger.

        Raises:
            QueueTierError: If queue_id is unknown
        """
        queue = self._queue(queue_id)
        queue.offered += 1
        if queue.is_full():
            queue.overflowed += 1
            self.dropped.append((request.id, queue_id, enqueue_time))
            logger.debug("Queue %s full, dropped request %d", queue_id, request.id)
            return EnqueueResult.OVERFLOWED

        queue.entries.append((request, enqueue_time))
        return EnqueueResult.ACCEPTED

    def pull(self, subscription: Sequence[str], max_batch: int, now: float) -> List[PulledRequest]:
        """
        Remove up to `max_batch` requests, draining queues in subscription
        order and FIFO within each queue.

        Args:
            subscription: Queue ids in priority order
            max_batch: Upper bound on the batch size (>= 1)
            now: Current simulated time

        Returns:
            Pulled requests with their waits; possibly empty

        Raises:
            QueueTierError: On an unknown queue id or max_batch < 1
        """
        if max_batch < 1:
            raise QueueTierError(f"max_batch must be >= 1, got {max_batch}")
        queues = [self._queue(queue_id) for queue_id in subscription]

        batch: List[PulledRequest] = []
        for queue in queues:
            while queue.entries and len(batch) < max_batch:
                request, enqueue_time = queue.entries.popleft()
                queue.pulled += 1
                batch.append(PulledRequest(request, queue.queue_id, enqueue_time, now - enqueue_time))
            if len(batch) == max_batch:
                break
        return batch

    def depth(self, queue_id: str) -> int:
        """Current number of entries in a queue."""
        return len(self._queue(queue_id))

    def total_depth(self, subscription: Optional[Sequence[str]] = None) -> int:
        """Sum of depths over `subscription` (all queues when None)."""
        ids = self.queues if subscription is None else subscription
        return sum(self.depth(queue_id) for queue_id in ids)

    def conserved(self) -> bool:
        """offered = pulled + in_queue + overflowed, for every queue."""
        return all(
            q.offered == q.pulled + len(q.entries) + q.overflowed
            for q in self.queues.values()
        )
