"""
Discrete-event engine.

Advances simulated time over a heap of pending events ordered by
(time, seq) and drives one run end to end, either in pull mode (queue tier,
agents, RL supervisor) or in classic push mode (one balancer policy).
Every state change is written to the event log; the report is computed
from the log alone.
"""

import heapq
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from balancers.base import BalancerError, BalancerState
from balancers.factory import create_balancer
from core.config import ScenarioConfig, dump_scenario
from core.event_log import EventLog
from core.metrics import MetricsReport, finalize
from core.queue_tier import LbQueue, QueueTier, QueueTierError, RuleSet, admit, classify
from core.rng import fnv1a_64, make_stream
from core.state import EnqueueResult, EventKind, Mode
from core.supervisor import (
    CreditLedger,
    PolicyState,
    SupervisorError,
    q_update,
    qualify,
    settle_credits,
    supervisor_tick,
)
from core.target_group import (
    PULL_ACTIONS,
    Observation,
    ServerError,
    ServerState,
    agent_decide,
    agent_observe,
    build_report,
    new_agent_policy,
    start_service,
)
from core.workload import Request, generate_arrivals

logger = logging.getLogger(__name__)


class InvariantViolation(RuntimeError):
    """A run broke one of its invariants; the run is aborted."""

    def __init__(self, invariant: str, message: str):
        self.invariant = invariant
        super().__init__(f"{invariant}: {message}")


@dataclass(order=True)
class Event:
    time: float
    seq: int
    kind: EventKind = field(compare=False)
    server: Optional[str] = field(default=None, compare=False)
    request: Optional[Request] = field(default=None, compare=False)
    factor: Optional[float] = field(default=None, compare=False)


def compute_run_id(cfg: ScenarioConfig) -> str:
    """FNV-1a 64 hex digest of the normalized scenario (seed included)."""
    return format(fnv1a_64(dump_scenario(cfg).encode("utf-8")), "016x")


class Simulation:
    """
    One run of one scenario.

    All state is owned by the instance; independent runs share nothing.
    """

    def __init__(self, cfg: ScenarioConfig):
        """
        Args:
            cfg: Validated scenario
        """
        self.cfg = cfg
        self.mode = cfg.mode
        self.clock = 0.0
        self.pending: List[Event] = []
        self._seq = 0
        self.log = EventLog()
        self.finished = False

        self.tier = QueueTier([LbQueue(q.queue_id, q.capacity) for q in cfg.queues])
        self.rules = RuleSet(cfg.rules)
        self.farm: Dict[str, ServerState] = {
            spec.server_id: ServerState(
                server_id=spec.server_id,
                base_rate=spec.base_rate,
                concurrency_limit=spec.concurrency,
                subscription=list(spec.subscription),
                backlog_limit=spec.backlog_limit,
                weight=spec.weight,
            )
            for spec in cfg.servers
        }

        self.ledger: Optional[CreditLedger] = None
        self.policies: Dict[str, PolicyState] = {}
        self.agent_rngs = {}
        self._periods: Dict[str, float] = {}
        self._phases: Dict[str, float] = {}
        self.balancer = None
        self.balancer_state: Optional[BalancerState] = None

        if self.mode is Mode.PULL_RL:
            sup = cfg.supervisor
            self.ledger = CreditLedger.open(self.farm, sup)
            for spec in cfg.servers:
                if spec.initial_credits is not None:
                    self.ledger.balances[spec.server_id] = spec.initial_credits
                self.farm[spec.server_id].credits = self.ledger.balances[spec.server_id]
                self.policies[spec.server_id] = new_agent_policy(sup.epsilon_initial)
                self.agent_rngs[spec.server_id] = make_stream(cfg.seed, f"agent:{spec.server_id}")
            # Period scales inversely with base rate; phase is keyed by server id.
            fastest = max(s.base_rate for s in self.farm.values())
            for sid, server in self.farm.items():
                self._periods[sid] = cfg.epoch * fastest / server.base_rate
                self._phases[sid] = self._periods[sid] * float(make_stream(cfg.seed, f"phase:{sid}").random())
        else:
            self.balancer = create_balancer(cfg.policy, make_stream(cfg.seed, "balancer"))
            self.balancer_state = BalancerState.for_servers(
                self.farm, {sid: s.weight for sid, s in self.farm.items()}
            )

        self.arrivals: List[Request] = []
        self._next_arrival = 0
        self.generated = 0
        self.completed = 0
        self.admitting = 0
        self._assigned_at: Dict[int, float] = {}
        self._last_tick = 0.0
        self._ticks = 0
        self._samples = 0
        self._epochs: Dict[str, int] = {sid: 0 for sid in self.farm}

    # -- event set -----------------------------------------------------------

    def schedule(self, time: float, kind: EventKind, server: Optional[str] = None,
                 request: Optional[Request] = None, factor: Optional[float] = None) -> Event:
        """
        Insert a future event.

        Raises:
            InvariantViolation: If `time` lies before the clock
        """
        if time < self.clock:
            raise InvariantViolation(
                "causality", f"{kind.value} scheduled at {time} before clock {self.clock}"
            )
        event = Event(time, self._seq, kind, server, request, factor)
        self._seq += 1
        heapq.heappush(self.pending, event)
        return event

    def start(self) -> None:
        """Log the begin record and seed the pending set."""
        cfg = self.cfg
        self.log.append(0.0, "begin", detail={
            "run_id": compute_run_id(cfg),
            "mode": self.mode.value,
            "policy": cfg.policy_label,
            "seed": cfg.seed,
            "horizon": cfg.horizon,
            "servers": {sid: {"base_rate": s.base_rate, "concurrency": s.concurrency_limit}
                        for sid, s in self.farm.items()},
            "queues": self.tier.queue_ids,
            "credits": self._credits(),
        })
        # First in, so nothing else at the horizon runs before it.
        self.schedule(cfg.horizon, EventKind.END_OF_RUN)
        if cfg.horizon <= 0:
            return

        self.arrivals = generate_arrivals(cfg.workload)
        if self.arrivals:
            self.schedule(self.arrivals[0].arrival_time, EventKind.ARRIVAL, request=self.arrivals[0])
            self._next_arrival = 1

        if self.mode is Mode.PULL_RL:
            for sid in self.farm:
                if self._phases[sid] < cfg.horizon:
                    self.schedule(self._phases[sid], EventKind.AGENT_EPOCH, server=sid)
            if cfg.supervisor.tick_interval < cfg.horizon:
                self.schedule(cfg.supervisor.tick_interval, EventKind.SUPERVISOR_TICK)
        for fault in cfg.faults:
            if fault.time < cfg.horizon:
                self.schedule(fault.time, EventKind.FAULT, server=fault.server_id, factor=fault.factor)
        if cfg.sample_interval < cfg.horizon:
            self.schedule(cfg.sample_interval, EventKind.METRICS_SAMPLE)

    def step(self) -> Optional[Event]:
        """
        Pop the minimum (time, seq) event and apply its handler.

        Returns:
            The processed event, or None when it was a cancelled event of
            an evicted server

        Raises:
            InvariantViolation: If no event is pending or a handler breaks
                an invariant
        """
        if not self.pending:
            raise InvariantViolation("pending_nonempty", "step() on an empty event set")
        event = heapq.heappop(self.pending)
        if event.time < self.clock:
            raise InvariantViolation("clock_monotonic", f"event at {event.time} behind clock {self.clock}")

        server = self.farm.get(event.server) if event.server is not None else None
        if (server is not None and not server.alive
                and event.kind in (EventKind.AGENT_EPOCH, EventKind.SERVICE_COMPLETION)):
            return None

        self.clock = event.time
        handler = self._handlers[event.kind]
        try:
            handler(self, event)
        except (ServerError, QueueTierError, BalancerError, SupervisorError) as e:
            raise InvariantViolation(type(e).__name__, f"{event.kind.value} at t={event.time}: {e}") from e
        return event

    def run(self) -> Tuple[MetricsReport, EventLog]:
        """Run to the horizon and build the report from the log."""
        self.start()
        while not self.finished:
            self.step()
        report = finalize(self.log.records)
        logger.info("✅ Run %s complete: %d generated, %d completed, %d dropped",
                    report.run_id, report.generated, report.completed, report.dropped)
        return report, self.log

    # -- shared helpers ------------------------------------------------------

    def _credits(self) -> Dict[str, int]:
        if self.ledger is None:
            return {sid: 0 for sid in self.farm}
        return dict(self.ledger.balances)

    def _route(self, request: Request) -> None:
        """Hand an admitted request to the queue tier or the balancer."""
        if self.mode is Mode.PULL_RL:
            queue_id = classify(request, self.rules)
            result = self.tier.enqueue(queue_id, request, self.clock)
            kind = "enqueue" if result is EnqueueResult.ACCEPTED else "overflow"
            self.log.append(self.clock, kind, request=request.id,
                            detail={"queue": queue_id, "enqueue_time": self.clock})
            return

        sid = self.balancer.select(self.balancer_state, request)
        self.log.append(self.clock, "select", server=sid, request=request.id,
                        detail={"policy": self.cfg.policy.value,
                                "content_aware": self.balancer.content_aware})
        self.balancer_state.note_dispatch(sid)
        server = self.farm[sid]
        server.accept_dispatched(request, self.clock)
        self._assigned_at[request.id] = self.clock
        self.log.append(self.clock, "dispatch", server=sid, request=request.id,
                        detail={"connections": self.balancer_state.connections[sid]})
        self._start_waiting(server)

    def _start_waiting(self, server: ServerState) -> None:
        """Start backlog heads while the server has free slots."""
        while server.alive and server.has_free_slot and server.local_backlog:
            request = server.local_backlog[0][0]
            completion = start_service(server, request, self.clock, self.cfg.kappa)
            self.log.append(self.clock, "start", server=server.server_id, request=request.id,
                            detail={"completion": completion})
            self.schedule(completion, EventKind.SERVICE_COMPLETION,
                          server=server.server_id, request=request)

    def _check_conservation(self) -> Dict[str, int]:
        queued = self.tier.total_depth()
        backlog = sum(len(s.local_backlog) for s in self.farm.values())
        in_service = sum(len(s.in_service) for s in self.farm.values())
        dropped = len(self.tier.dropped)
        counts = {
            "generated": self.generated,
            "completed": self.completed,
            "admitting": self.admitting,
            "queued": queued,
            "backlog": backlog,
            "in_service": in_service,
            "dropped": dropped,
        }
        accounted = self.completed + self.admitting + queued + backlog + in_service + dropped
        if accounted != self.generated:
            raise InvariantViolation("global_conservation", f"t={self.clock}: {counts}")
        if not self.tier.conserved():
            raise InvariantViolation("queue_conservation", f"t={self.clock}")
        for sid, server in self.farm.items():
            if not server.conserved():
                raise InvariantViolation("server_conservation", f"t={self.clock}: server {sid}")
        return counts

    # -- handlers ------------------------------------------------------------

    def _on_arrival(self, event: Event) -> None:
        request = event.request
        self.generated += 1
        self.log.append(self.clock, "arrival", request=request.id, detail={
            "rtype": request.rtype.value,
            "priority": request.priority,
            "secured": request.secured,
            "source_ip": request.source_ip,
            "url_path": request.url_path,
            "demand": request.service_demand,
        })
        if self._next_arrival < len(self.arrivals):
            upcoming = self.arrivals[self._next_arrival]
            self._next_arrival += 1
            self.schedule(upcoming.arrival_time, EventKind.ARRIVAL, request=upcoming)

        admitted_at = admit(request, self.cfg.admission, self.clock)
        if admitted_at > self.clock:
            self.admitting += 1
            self.schedule(admitted_at, EventKind.ADMISSION, request=request)
        else:
            self._route(request)

    def _on_admission(self, event: Event) -> None:
        self.admitting -= 1
        self._route(event.request)

    def _on_agent_epoch(self, event: Event) -> None:
        sid = event.server
        server = self.farm[sid]
        sup = self.cfg.supervisor

        observation = agent_observe(server, self.tier, sup.credit_cap)
        decided = agent_decide(observation, self.policies[sid], self.agent_rngs[sid])
        room = min(decided, server.pull_room)
        batch = self.tier.pull(server.subscription, room, self.clock) if room >= 1 else []

        if batch:
            server.accept_pulled(batch, self.clock)
            for pulled in batch:
                self._assigned_at[pulled.request.id] = self.clock
            waits = [p.wait for p in batch]
            self.log.append(self.clock, "pull", server=sid, detail={
                "requested": decided,
                "queues": [p.queue_id for p in batch],
                "requests": [p.request.id for p in batch],
                "waits": waits,
            })
            max_wait = max(waits)
            qualified = qualify(len(batch), max_wait, sup)
            delta = self._settle(server, qualified)
            self.log.append(self.clock, "settle", server=sid, detail={
                "qualified": qualified,
                "max_wait": max_wait,
                "delta": delta,
                "credits": server.credits,
            })
            self._learn(server, observation, decided, delta)
        elif decided == 0 and server.pull_room >= 1:
            waiting = self.tier.total_depth(server.subscription)
            if waiting:
                # Idle with room while work waits: never qualified.
                delta = self._settle(server, False)
                self.log.append(self.clock, "hold", server=sid, detail={
                    "waiting": waiting,
                    "delta": delta,
                    "credits": server.credits,
                })
                self._learn(server, observation, decided, delta)

        self._start_waiting(server)

        self._epochs[sid] += 1
        next_epoch = self._phases[sid] + self._epochs[sid] * self._periods[sid]
        if next_epoch < self.cfg.horizon:
            self.schedule(next_epoch, EventKind.AGENT_EPOCH, server=sid)

    def _settle(self, server: ServerState, qualified: bool) -> int:
        sup = self.cfg.supervisor
        delta = settle_credits(self.ledger, server.server_id, qualified, sup)
        server.credits = self.ledger.balances[server.server_id]
        if not sup.evict_floor <= server.credits <= sup.credit_cap:
            raise InvariantViolation("credit_bounds", f"server {server.server_id} at {server.credits}")
        return delta

    def _learn(self, server: ServerState, observation: Observation, decided: int, delta: int) -> None:
        """Reward is the applied (clamped) credit delta."""
        sup = self.cfg.supervisor
        policy = self.policies[server.server_id]
        next_observation = agent_observe(server, self.tier, sup.credit_cap)
        action = PULL_ACTIONS.index(decided)
        q_update(policy, observation.index, action, delta, next_observation.index,
                 sup.q_alpha, sup.q_gamma)
        self.log.append(self.clock, "q_update", server=server.server_id, detail={
            "state": observation.index,
            "action": decided,
            "reward": delta,
            "next_state": next_observation.index,
            "value": float(policy.q[observation.index, action]),
        })

    def _on_completion(self, event: Event) -> None:
        server = self.farm[event.server]
        request = event.request
        entry = server.complete(request.id, self.clock)
        self.completed += 1
        assigned = self._assigned_at.pop(request.id)
        self.log.append(self.clock, "complete", server=server.server_id, request=request.id, detail={
            "arrival": request.arrival_time,
            "assigned": assigned,
            "processing": self.clock - entry.started,
            "response": self.clock - request.arrival_time,
        })
        if self.mode is Mode.PUSH:
            self.balancer_state.note_completion(server.server_id, self.clock - assigned,
                                                self.cfg.ewma_alpha)
        self._start_waiting(server)

    def _on_supervisor_tick(self, event: Event) -> None:
        sup = self.cfg.supervisor
        reports = [
            build_report(server, self._last_tick, self.clock).to_dict()
            for server in self.farm.values() if server.alive
        ]
        evicted = supervisor_tick(self.ledger, self.farm.values(), self.policies, sup, self.clock)
        self._last_tick = self.clock
        self.log.append(self.clock, "tick", detail={
            "epsilon": {sid: p.epsilon for sid, p in self.policies.items()},
            "reports": reports,
        })
        for sid in evicted:
            self.log.append(self.clock, "evict", server=sid,
                            detail={"streak": self.ledger.floor_streaks[sid]})

        self._ticks += 1
        next_tick = (self._ticks + 1) * sup.tick_interval
        if next_tick < self.cfg.horizon:
            self.schedule(next_tick, EventKind.SUPERVISOR_TICK)

    def _on_fault(self, event: Event) -> None:
        self.farm[event.server].degrade_factor = event.factor
        self.log.append(self.clock, "fault", server=event.server, detail={"factor": event.factor})
        logger.debug("Fault: server %s degraded to %.3f at t=%.3f", event.server, event.factor, self.clock)

    def _on_metrics_sample(self, event: Event) -> None:
        counts = self._check_conservation()
        util = {sid: len(s.in_service) / s.concurrency_limit for sid, s in self.farm.items()}
        if self.mode is Mode.PUSH:
            for sid, value in util.items():
                self.balancer_state.note_utilization(sid, value, self.cfg.ewma_alpha)
        self.log.append(self.clock, "sample", detail={
            **counts,
            "depths": {qid: self.tier.depth(qid) for qid in self.tier.queue_ids},
            "util": util,
        })

        self._samples += 1
        next_sample = (self._samples + 1) * self.cfg.sample_interval
        if next_sample < self.cfg.horizon:
            self.schedule(next_sample, EventKind.METRICS_SAMPLE)

    def _on_end_of_run(self, event: Event) -> None:
        self.pending.clear()
        self.finished = True
        self.log.append(self.clock, "end", detail={"horizon": self.cfg.horizon, "credits": self._credits()})

    _handlers = {
        EventKind.ARRIVAL: _on_arrival,
        EventKind.ADMISSION: _on_admission,
        EventKind.AGENT_EPOCH: _on_agent_epoch,
        EventKind.SERVICE_COMPLETION: _on_completion,
        EventKind.SUPERVISOR_TICK: _on_supervisor_tick,
        EventKind.FAULT: _on_fault,
        EventKind.METRICS_SAMPLE: _on_metrics_sample,
        EventKind.END_OF_RUN: _on_end_of_run,
    }


def run(cfg: ScenarioConfig) -> Tuple[MetricsReport, EventLog]:
    """Run one scenario; equal scenarios give byte-identical logs and reports."""
    return Simulation(cfg).run()
