"""
Round-robin policies: plain cyclic and smooth weighted.
"""

from core.state import PolicyTag
from core.workload import Request

from .base import Balancer, BalancerState


class RoundRobinBalancer(Balancer):
    """Servers in cyclic order; the cursor advances once per call."""

    tag = PolicyTag.RR

    def _select(self, state: BalancerState, request: Request) -> str:
        index = state.rr_cursor % len(state.servers)
        state.rr_cursor = (index + 1) % len(state.servers)
        return state.servers[index]


class SmoothWeightedRoundRobinBalancer(Balancer):
    """
    Smooth weighted round robin.

    Every call adds each server's weight to its counter, picks the largest
    counter (lowest id on ties) and subtracts the total weight from the
    winner. Over sum(weights) calls server i wins exactly weight_i times,
    interleaved rather than in bursts.
    """

    tag = PolicyTag.WRR

    def _select(self, state: BalancerState, request: Request) -> str:
        total = 0
        best = None
        for sid in state.servers:
            weight = state.weights.get(sid, 1)
            total += weight
            state.smooth_wrr_counters[sid] = state.smooth_wrr_counters.get(sid, 0) + weight
            if best is None or state.smooth_wrr_counters[sid] > state.smooth_wrr_counters[best]:
                best = sid
        state.smooth_wrr_counters[best] -= total
        return best
