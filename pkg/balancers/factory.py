"""
Balancer factory plus the RANDOM comparison control.
"""

from typing import Optional

import numpy as np

from core.state import PolicyTag
from core.workload import Request

from .base import Balancer, BalancerError, BalancerState
from .hashing import SourceIpHashBalancer, UrlHashBalancer
from .least_load import (
    AdaptiveBalancer,
    LeastConnectionBalancer,
    WeightedLeastConnectionBalancer,
    WeightedResponseTimeBalancer,
)
from .round_robin import RoundRobinBalancer, SmoothWeightedRoundRobinBalancer


class RandomBalancer(Balancer):
    """Uniform over live servers. A control, not one of the classic eight."""

    tag = PolicyTag.RANDOM

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def _select(self, state: BalancerState, request: Request) -> str:
        return state.servers[int(self.rng.integers(len(state.servers)))]


_BALANCERS = {
    PolicyTag.RR: RoundRobinBalancer,
    PolicyTag.WRR: SmoothWeightedRoundRobinBalancer,
    PolicyTag.LC: LeastConnectionBalancer,
    PolicyTag.WLC: WeightedLeastConnectionBalancer,
    PolicyTag.ADAPTIVE: AdaptiveBalancer,
    PolicyTag.WRT: WeightedResponseTimeBalancer,
    PolicyTag.IP_HASH: SourceIpHashBalancer,
    PolicyTag.URL_HASH: UrlHashBalancer,
}


def create_balancer(tag: PolicyTag, rng: Optional[np.random.Generator] = None) -> Balancer:
    """
    Factory function to create the balancer for a policy tag.

    Args:
        tag: Policy to instantiate
        rng: Generator for RANDOM (required there, ignored elsewhere)

    Returns:
        Balancer instance

    Raises:
        BalancerError: If RANDOM is requested without a generator
    """
    if tag is PolicyTag.RANDOM:
        if rng is None:
            raise BalancerError("RANDOM policy needs a random stream")
        return RandomBalancer(rng)
    return _BALANCERS[tag]()


def select(tag: PolicyTag, state: BalancerState, request: Request,
           rng: Optional[np.random.Generator] = None) -> str:
    """One-shot selection; stateless policies keep all their state in `state`."""
    return create_balancer(tag, rng).select(state, request)
