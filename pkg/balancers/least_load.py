"""
Argmin policies over balancer-local load signals.

All ties break by lowest server id (servers are kept sorted, and min()
returns the first minimum).
"""

from fractions import Fraction

from core.state import PolicyTag
from core.workload import Request

from .base import Balancer, BalancerState


class LeastConnectionBalancer(Balancer):
    tag = PolicyTag.LC

    def _select(self, state: BalancerState, request: Request) -> str:
        return min(state.servers, key=lambda sid: state.connections[sid])


class WeightedLeastConnectionBalancer(Balancer):
    """argmin connections / weight, compared exactly."""

    tag = PolicyTag.WLC

    def _select(self, state: BalancerState, request: Request) -> str:
        return min(state.servers,
                   key=lambda sid: Fraction(state.connections[sid], state.weights.get(sid, 1)))


class AdaptiveBalancer(Balancer):
    """Resource based: argmin of the sampled utilization EWMA."""

    tag = PolicyTag.ADAPTIVE

    def _select(self, state: BalancerState, request: Request) -> str:
        return min(state.servers, key=lambda sid: state.ewma_util.get(sid, 0.0))


class WeightedResponseTimeBalancer(Balancer):
    """argmin of the response-time EWMA; unobserved servers count as 0."""

    tag = PolicyTag.WRT

    def _select(self, state: BalancerState, request: Request) -> str:
        return min(state.servers, key=lambda sid: state.ewma_response.get(sid) or 0.0)
