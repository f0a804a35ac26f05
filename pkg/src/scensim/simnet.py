"""Discrete-event transport with seeded random per-message delays.

Every message is encoded to a frame, given a random delivery delay, and
delivered in virtual time while preserving per-link FIFO order. The real
``Coordinator``, ``InterpretedFederate`` and ``ObserverFederate`` cores are
driven by it, so one seed is one reproducible interleaving of the whole
federation. Used by the time-management property suite.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field
from typing import Any

from .federate import InterpretedFederate
from .manager import MASTER_NAME, RunPlan
from .observer import ListSink, ObserverFederate
from .rti.coordinator import Coordinator
from .rti.messages import Kind, RtiMessage

TO_RTI = "in"
TO_MEMBER = "out"


class _SimMaster:
    """Event-driven counterpart of the threaded master."""

    def __init__(self, plan: RunPlan):
        self.cfg = plan.master_config
        self.killed = False
        self.finished = False
        self.resigned = False

    def _msg(self, kind: Kind, payload: dict) -> RtiMessage:
        return RtiMessage(kind, MASTER_NAME, payload)

    def start(self) -> list[RtiMessage]:
        from .fom import render_fom_xml

        return [
            self._msg(Kind.CREATE_FEDERATION, {"federation": self.cfg.federation}),
            self._msg(Kind.JOIN_FEDERATION, {"federation": self.cfg.federation, "federateType": "master", "timeManaged": False}),
            self._msg(Kind.FOM_MODULE_OFFER, {"xml": render_fom_xml(self.cfg.base_fom_module)}),
            self._msg(Kind.REGISTER_SYNC_POINT, {"label": self.cfg.sync_label, "federates": list(self.cfg.members)}),
        ]

    def on_message(self, msg: RtiMessage) -> list[RtiMessage]:
        if msg.kind is Kind.ANNOUNCE_SYNC_POINT:
            return [self._msg(Kind.SYNC_POINT_ACHIEVED, {"label": msg.payload["label"]})]
        if msg.kind is Kind.DESTROY_FEDERATION:
            self.finished = True
        if msg.kind is Kind.FAULT and msg.payload.get("code") == "FederatesStillJoined":
            # Members' resigns are still in flight; ask again.
            return [self._msg(Kind.DESTROY_FEDERATION, {"federation": self.cfg.federation})]
        return []

    def teardown(self) -> list[RtiMessage]:
        self.resigned = True
        return [
            self._msg(Kind.RESIGN_FEDERATION, {"error": None}),
            self._msg(Kind.DESTROY_FEDERATION, {"federation": self.cfg.federation}),
        ]


@dataclass
class SimResult:
    seed: int
    events: int
    federates: dict[str, InterpretedFederate]
    observers: dict[str, ObserverFederate]
    streams: dict[str, list[str]]
    destroyed: bool
    # Largest spread of coordinator-side granted times over time-managed members.
    max_grant_spread: float = 0.0
    # Same, measured on the members' side from the TAGs they have received.
    max_member_spread: float = 0.0
    violations: list[str] = field(default_factory=list)
    # (member, kind, timestamp) in delivery order, for causal checks.
    deliveries: list[tuple[str, str, float | None]] = field(default_factory=list)


def run_simulated(plan: RunPlan, seed: int, max_delay: float = 1.0, max_events: int = 5_000_000) -> SimResult:
    """Run ``plan`` over the simulated network; ``plan`` must be freshly built (instances are mutated)."""
    rng = random.Random(seed)
    coordinator = Coordinator()
    members: dict[int, Any] = {}
    names: dict[int, str] = {}
    link_ids = itertools.count(1)

    master = _SimMaster(plan)
    feds: dict[str, InterpretedFederate] = {}
    observers: dict[str, ObserverFederate] = {}
    sinks: dict[str, ListSink] = {}
    for cfg in plan.federate_configs:
        feds[cfg.federate_name] = InterpretedFederate(cfg, plan.registry)
    for name, ocfg in plan.observer_configs:
        sinks[name] = ListSink()
        observers[name] = ObserverFederate(name, ocfg, plan.registry, plan.scenario.simulation_iterations, [sinks[name]])

    heap: list[tuple[float, int, str, int, bytes]] = []
    seq = itertools.count()
    last: dict[tuple[str, int], float] = {}
    now = 0.0
    result = SimResult(seed, 0, feds, observers, {}, False)

    def schedule(direction: str, link: int, msg: RtiMessage) -> None:
        at = max(now + rng.uniform(0.0, max_delay), last.get((direction, link), 0.0))
        last[(direction, link)] = at
        heapq.heappush(heap, (at, next(seq), direction, link, msg.encode()))

    def attach(name: str, member: Any) -> None:
        link = next(link_ids)
        members[link] = member
        names[link] = name
        if hasattr(member, "connected"):
            member.connected()
        for m in member.start():
            schedule(TO_RTI, link, m)

    attach(MASTER_NAME, master)
    others_started = False
    torn_down = False

    while heap and result.events < max_events:
        at, _, direction, link, body = heapq.heappop(heap)
        now = at
        result.events += 1
        msg = RtiMessage.decode(body)
        if direction == TO_RTI:
            for target, reply in coordinator.handle(link, msg):
                schedule(TO_MEMBER, target, reply)
            fed_state = coordinator.federation
            if fed_state is not None:
                granted = [m.granted_time for m in fed_state.members.values() if m.time_managed]
                if len(granted) > 1:
                    result.max_grant_spread = max(result.max_grant_spread, max(granted) - min(granted))
            if coordinator.destroyed:
                result.destroyed = True
        else:
            member = members[link]
            result.deliveries.append((names[link], msg.kind.value, msg.timestamp))
            for reply in member.on_message(msg):
                schedule(TO_RTI, link, reply)
            if msg.kind is Kind.TIME_ADVANCE_GRANT:
                seen = [m.grants[-1] if m.grants else 0.0 for m in [*feds.values(), *observers.values()] if not m.finished]
                if len(seen) > 1:
                    result.max_member_spread = max(result.max_member_spread, max(seen) - min(seen))
        if not others_started and coordinator.federation is not None:
            # Members start once the federation exists, in a seeded random order.
            others_started = True
            order = [*feds.items(), *observers.items()]
            rng.shuffle(order)
            for name, member in order:
                attach(name, member)
        if (
            others_started
            and not torn_down
            and all(m.finished for m in [*feds.values(), *observers.values()])
        ):
            torn_down = True
            master_link = next(link for link, m in members.items() if m is master)
            for m in master.teardown():
                schedule(TO_RTI, master_link, m)

    if heap:
        result.violations.append(f"event budget of {max_events} exhausted")
    result.streams = {name: s.lines for name, s in sinks.items()}
    return result
