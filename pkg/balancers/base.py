"""
Base Balancer Interface.

Defines the balancer state shared by all push-mode policies and the
abstract interface every selection policy implements.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

from core.state import PolicyTag
from core.workload import Request

DEFAULT_EWMA_ALPHA = 0.2


class BalancerError(RuntimeError):
    """Raised on empty server sets and inconsistent dispatch bookkeeping."""
    pass


@dataclass
class BalancerState:
    """
    Balancer-local view of the farm.

    Server ids are kept sorted; "lowest id" tie-breaks compare ids as
    strings.
    """
    servers: List[str]
    weights: Dict[str, int] = field(default_factory=dict)
    rr_cursor: int = 0
    smooth_wrr_counters: Dict[str, int] = field(default_factory=dict)
    connections: Dict[str, int] = field(default_factory=dict)
    ewma_response: Dict[str, Optional[float]] = field(default_factory=dict)
    ewma_util: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def for_servers(cls, server_ids: Iterable[str],
                    weights: Optional[Dict[str, int]] = None) -> "BalancerState":
        """Fresh state: zero connections, unit weights unless given."""
        ids = sorted(server_ids)
        weights = weights or {}
        for sid, weight in weights.items():
            if weight < 1:
                raise BalancerError(f"Weight of {sid!r} must be >= 1, got {weight}")
        return cls(
            servers=ids,
            weights={sid: int(weights.get(sid, 1)) for sid in ids},
            smooth_wrr_counters={sid: 0 for sid in ids},
            connections={sid: 0 for sid in ids},
            ewma_response={sid: None for sid in ids},
            ewma_util={sid: 0.0 for sid in ids},
        )

    def _require(self, server_id: str) -> None:
        if server_id not in self.connections or server_id not in self.servers:
            raise BalancerError(f"Unknown or dead server {server_id!r}")

    def note_dispatch(self, server_id: str) -> "BalancerState":
        """Count a request handed to `server_id`."""
        self._require(server_id)
        self.connections[server_id] += 1
        return self

    def note_completion(self, server_id: str, response_time: float,
                        ewma_alpha: float = DEFAULT_EWMA_ALPHA) -> "BalancerState":
        """
        Count a completion and fold its response time into the EWMA.

        The first observation initializes the average.

        Raises:
            BalancerError: If nothing is in flight on the server
        """
        if self.connections.get(server_id, 0) < 1:
            raise BalancerError(f"Completion on {server_id!r} without a dispatch")
        self.connections[server_id] -= 1
        old = self.ewma_response.get(server_id)
        if old is None:
            self.ewma_response[server_id] = response_time
        else:
            self.ewma_response[server_id] = (1 - ewma_alpha) * old + ewma_alpha * response_time
        return self

    def note_utilization(self, server_id: str, utilization: float,
                         ewma_alpha: float = DEFAULT_EWMA_ALPHA) -> "BalancerState":
        """Fold a sampled utilization in [0, 1] into the EWMA."""
        self._require(server_id)
        old = self.ewma_util[server_id]
        self.ewma_util[server_id] = (1 - ewma_alpha) * old + ewma_alpha * utilization
        return self


class Balancer(ABC):
    """Abstract base class for push-mode selection policies."""

    tag: PolicyTag

    @property
    def content_aware(self) -> bool:
        return self.tag.content_aware

    def select(self, state: BalancerState, request: Request) -> str:
        """
        Pick the server for `request`, updating cursors/counters in `state`.

        Raises:
            BalancerError: If no live server exists
        """
        if not state.servers:
            raise BalancerError("No live servers to select from")
        return self._select(state, request)

    @abstractmethod
    def _select(self, state: BalancerState, request: Request) -> str:
        pass

    def get_name(self) -> str:
        return self.tag.value
