"""
RL supervisor.

Judges agent pulls against the stipulated time, settles credits with a hard
cap and floor, runs the tabular Q-learning update for the agents, and evicts
servers that sit at the credit floor for too long.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Tuple

import numpy as np

if TYPE_CHECKING:
    from core.target_group import ServerState

logger = logging.getLogger(__name__)


class SupervisorError(RuntimeError):
    """Raised on invalid supervisor configuration or settles on evicted servers."""
    pass


@dataclass(frozen=True)
class SupervisorConfig:
    """Supervisor and learning parameters; every field is a scenario key."""
    stipulated_time: float = 1.0
    reward_grant: int = 1
    penalty: int = 1
    credit_cap: int = 20
    evict_floor: int = 0
    evict_patience: int = 5
    tick_interval: float = 1.0
    q_alpha: float = 0.1
    q_gamma: float = 0.9
    epsilon_initial: float = 0.2
    epsilon_decay: float = 0.99
    epsilon_floor: float = 0.01
    initial_credits: Optional[int] = None

    @property
    def start_credits(self) -> int:
        """Credits a server starts with (half the cap unless configured)."""
        if self.initial_credits is None:
            return max(self.evict_floor, self.credit_cap // 2)
        return self.initial_credits

    def errors(self) -> List[str]:
        """All invariant violations, as `field: message` strings."""
        problems = []
        if not (math.isfinite(self.stipulated_time) and self.stipulated_time > 0):
            problems.append("stipulated_time: must be > 0")
        if self.reward_grant < 0:
            problems.append("reward_grant: must be >= 0")
        if self.penalty < 0:
            problems.append("penalty: must be >= 0")
        if self.credit_cap <= self.evict_floor:
            problems.append("credit_cap: must exceed evict_floor")
        if self.evict_floor < 0:
            problems.append("evict_floor: must be >= 0")
        if self.evict_patience < 1:
            problems.append("evict_patience: must be >= 1")
        if not (math.isfinite(self.tick_interval) and self.tick_interval > 0):
            problems.append("tick_interval: must be > 0")
        if not (0 < self.q_alpha <= 1):
            problems.append("q_alpha: must be within (0, 1]")
        if not (0 <= self.q_gamma < 1):
            problems.append("q_gamma: must be within [0, 1)")
        if not (0 <= self.epsilon_floor <= self.epsilon_initial <= 1):
            problems.append("epsilon_initial: need 0 <= epsilon_floor <= epsilon_initial <= 1")
        if not (0 < self.epsilon_decay <= 1):
            problems.append("epsilon_decay: must be within (0, 1]")
        if self.initial_credits is not None and not (
                self.evict_floor <= self.initial_credits <= self.credit_cap):
            problems.append("initial_credits: must lie within [evict_floor, credit_cap]")
        return problems

    def validate(self) -> None:
        problems = self.errors()
        if problems:
            raise SupervisorError("; ".join(problems))


class PolicyState:
    """Tabular action values, visit counts and exploration rate of one agent."""

    def __init__(self, n_states: int, n_actions: int, epsilon: float = 0.0):
        self.q = np.zeros((n_states, n_actions), dtype=float)
        self.visits = np.zeros((n_states, n_actions), dtype=np.int64)
        self.epsilon = epsilon

    @property
    def n_actions(self) -> int:
        return self.q.shape[1]

    def greedy_action(self, state: int) -> int:
        """argmax_a Q(state, a); np.argmax returns the lowest index on ties."""
        return int(np.argmax(self.q[state]))


def choose_action(policy: PolicyState, state: int, rng: np.random.Generator) -> int:
    """
    Epsilon-greedy action index.

    Always draws one uniform first so the stream advances the same way
    whatever epsilon is; a second draw picks the random action.
    """
    if rng.random() < policy.epsilon:
        return int(rng.integers(policy.n_actions))
    return policy.greedy_action(state)


def q_update(policy: PolicyState, s: int, a: int, reward: float, s_next: int,
             q_alpha: float, q_gamma: float) -> PolicyState:
    """
    Q(s,a) <- Q(s,a) + alpha * (reward + gamma * max_a' Q(s',a') - Q(s,a)).

    Only the (s, a) entry changes.
    """
    target = reward + q_gamma * float(np.max(policy.q[s_next]))
    policy.q[s, a] += q_alpha * (target - policy.q[s, a])
    policy.visits[s, a] += 1
    return policy


def qualify(batch: int, max_wait: float, cfg: SupervisorConfig) -> bool:
    """
    A pull qualifies when its oldest request waited no longer than the
    stipulated time (inclusive).

    Raises:
        SupervisorError: For empty pulls, which are never judged
    """
    if batch < 1:
        raise SupervisorError("Zero-batch pulls are not judged")
    return max_wait <= cfg.stipulated_time


@dataclass
class CreditLedger:
    """Per-server credit balances, floor streaks and the eviction log."""
    balances: Dict[str, int] = field(default_factory=dict)
    floor_streaks: Dict[str, int] = field(default_factory=dict)
    evictions: List[Tuple[str, float]] = field(default_factory=list)

    @classmethod
    def open(cls, server_ids: Iterable[str], cfg: SupervisorConfig) -> "CreditLedger":
        ids = list(server_ids)
        return cls(
            balances={sid: cfg.start_credits for sid in ids},
            floor_streaks={sid: 0 for sid in ids},
        )

    def is_evicted(self, server_id: str) -> bool:
        return any(sid == server_id for sid, _ in self.evictions)


def settle_credits(ledger: CreditLedger, server_id: str, qualified: bool,
                   cfg: SupervisorConfig) -> int:
    """
    Grant or revoke credits for one judged pull.

    Returns:
        The credit delta actually applied after clamping to
        [evict_floor, credit_cap]

    Raises:
        SupervisorError: If the server has been evicted
    """
    if ledger.is_evicted(server_id):
        raise SupervisorError(f"Cannot settle credits for evicted server {server_id!r}")
    old = ledger.balances[server_id]
    if qualified:
        new = min(cfg.credit_cap, old + cfg.reward_grant)
    else:
        new = max(cfg.evict_floor, old - cfg.penalty)
    ledger.balances[server_id] = new
    return new - old


def supervisor_tick(ledger: CreditLedger, farm: Iterable["ServerState"],
                    policies: Dict[str, PolicyState], cfg: SupervisorConfig,
                    now: float) -> List[str]:
    """
    Periodic supervision: update floor streaks, evict, decay exploration.

    Args:
        ledger: Credit ledger (mutated)
        farm: Servers; evicted ones get alive = False
        policies: Agent policies by server id; epsilon decays in place
        cfg: Supervisor configuration
        now: Tick time

    Returns:
        Ids of servers evicted at this tick, in farm order
    """
    evicted = []
    for server in farm:
        if not server.alive:
            continue
        sid = server.server_id
        if ledger.balances[sid] == cfg.evict_floor:
            ledger.floor_streaks[sid] += 1
        else:
            ledger.floor_streaks[sid] = 0
        if ledger.floor_streaks[sid] >= cfg.evict_patience:
            server.alive = False
            ledger.evictions.append((sid, now))
            evicted.append(sid)
            logger.info("🗑️ Evicted server %s at t=%.3f after %d ticks at the floor",
                        sid, now, ledger.floor_streaks[sid])

    for policy in policies.values():
        policy.epsilon = max(cfg.epsilon_floor, policy.epsilon * cfg.epsilon_decay)
    return evicted
