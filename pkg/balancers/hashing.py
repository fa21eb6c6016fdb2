"""
Hash policies: source IP (content unaware) and URL path (content aware).

Both take FNV-1a 64 of the key bytes modulo the number of live servers,
indexing the id-sorted live list.
"""

from core.rng import fnv1a_64
from core.state import PolicyTag
from core.workload import Request

from .base import Balancer, BalancerState


def ip_key(source_ip: int) -> bytes:
    """Four big-endian bytes of a 32-bit source identity."""
    return (source_ip & 0xFFFFFFFF).to_bytes(4, "big")


class SourceIpHashBalancer(Balancer):
    tag = PolicyTag.IP_HASH

    def _select(self, state: BalancerState, request: Request) -> str:
        return state.servers[fnv1a_64(ip_key(request.source_ip)) % len(state.servers)]


class UrlHashBalancer(Balancer):
    tag = PolicyTag.URL_HASH

    def _select(self, state: BalancerState, request: Request) -> str:
        return state.servers[fnv1a_64(request.url_path.encode("utf-8")) % len(state.servers)]
