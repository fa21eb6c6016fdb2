"""
Shared enumerations for the simulator.

Defines request types, run modes, balancing policy tags and event kinds.
"""

import enum


class RequestType(enum.Enum):
    """The eight request types the load balancer classifies."""
    GET = "GET"
    POST = "POST"
    PUT = "PUT"
    EMAIL = "EMAIL"
    CHAT = "CHAT"
    UPLOAD = "UPLOAD"
    DOWNLOAD = "DOWNLOAD"
    SYNC = "SYNC"

    @classmethod
    def parse(cls, text: str) -> "RequestType":
        """
        Parse a request type tag (case-insensitive).

        Raises:
            ValueError: If the tag is not one of the eight known types
        """
        try:
            return cls(str(text).upper())
        except ValueError:
            raise ValueError(f"Unknown request type: {text!r}") from None


# Declaration order is the canonical order for weight vectors.
REQUEST_TYPES = tuple(RequestType)


class Mode(enum.Enum):
    """Run mode: queue-based pull with RL supervision, or classic push."""
    PULL_RL = "pull_rl"
    PUSH = "push"


class PolicyTag(enum.Enum):
    """Push-mode selection policies."""
    RR = "RR"
    WRR = "WRR"
    LC = "LC"
    WLC = "WLC"
    ADAPTIVE = "ADAPTIVE"
    WRT = "WRT"
    IP_HASH = "IP_HASH"
    URL_HASH = "URL_HASH"
    RANDOM = "RANDOM"

    @property
    def content_aware(self) -> bool:
        """Only URL hashing needs layer-7 parsing."""
        return self is PolicyTag.URL_HASH


class EventKind(enum.Enum):
    """Kinds of events in the pending-event set."""
    ARRIVAL = "arrival"
    ADMISSION = "admission"
    AGENT_EPOCH = "agent_epoch"
    SERVICE_COMPLETION = "service_completion"
    SUPERVISOR_TICK = "supervisor_tick"
    FAULT = "fault"
    METRICS_SAMPLE = "metrics_sample"
    END_OF_RUN = "end_of_run"


class EnqueueResult(enum.Enum):
    """Outcome of offering a request to a load-balancer queue."""
    ACCEPTED = "accepted"
    OVERFLOWED = "overflowed"
