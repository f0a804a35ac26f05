"""Behaviour contract and the reference route-following behaviour."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Mapping, Sequence

from ..errors import BehaviourFault
from ..values import AttributeValue, Route, matches_kind
from .instances import ObjectView, SimulationObjectInstance
from .kinematics import advance_along_route

# Observed objects as handed to behaviours: subscribed class path -> views.
ObservedView = Mapping[str, Sequence[ObjectView]]


class Behaviour(ABC):
    """One step of an active object's logic.

    ``next_step`` returns proposed new values keyed by attribute uuid. It must
    not mutate anything it is given; values are applied after every behaviour
    of the step has run.
    """

    @abstractmethod
    def next_step(self, time_passed: float, own: ObjectView, observed: ObservedView) -> dict[str, AttributeValue]:
        ...


class SimpleFollowRouteBehaviour(Behaviour):
    """Follow a fixed route at the object's current speed.

    Updates ``position`` and ``rotation`` every step, and ``course`` where the
    object has one. The waypoint cursor is behaviour-internal state.
    """

    def __init__(self, route: Route):
        self.route = route
        self.cursor = 0

    @classmethod
    def from_parameters(cls, params: Mapping[str, object]) -> "SimpleFollowRouteBehaviour":
        route = params["route"]
        if not isinstance(route, Route):
            raise TypeError("route parameter must be a Route")
        return cls(route)

    def next_step(self, time_passed, own, observed):
        speed = own.get("speed", 0.0)
        position, self.cursor, heading = advance_along_route(
            own["position"], self.route, self.cursor, max(speed, 0.0), time_passed, heading=own["rotation"]
        )
        updates = {
            own.attribute_uuid("position"): position,
            own.attribute_uuid("rotation"): heading,
        }
        if "course" in own:
            updates[own.attribute_uuid("course")] = heading
        return updates


def execute_behaviour(
    behaviour: Behaviour,
    time_passed: float,
    own: SimulationObjectInstance,
    observed: ObservedView,
) -> dict[str, AttributeValue]:
    """Run one behaviour step and check the returned update map."""
    if time_passed <= 0:
        raise ValueError("time_passed must be > 0")
    try:
        updates = behaviour.next_step(time_passed, own.view(), observed)
    except Exception as exc:
        raise BehaviourFault(f"{own.uuid}: behaviour raised {type(exc).__name__}: {exc}") from exc
    if updates is None:
        return {}
    if not isinstance(updates, Mapping):
        raise BehaviourFault(f"{own.uuid}: behaviour returned {type(updates).__name__}, expected a mapping")
    checked: dict[str, AttributeValue] = {}
    for uuid, value in updates.items():
        attr = own.attribute_by_uuid(uuid) if isinstance(uuid, str) else None
        if attr is None:
            raise BehaviourFault(f"{own.uuid}: behaviour returned unknown attribute id {uuid!r}")
        if not matches_kind(value, attr.data_type):
            raise BehaviourFault(f"{uuid}: behaviour returned {value!r}, expected {attr.data_type.value}")
        checked[uuid] = value
    return checked
