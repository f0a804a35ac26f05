from __future__ import annotations

import pytest

from scensim.building_blocks import builtin_registry
from scensim.scenario import (
    AttributeSpec,
    BehaviourSpec,
    LibraryRef,
    ObservedClass,
    ObserverConfig,
    Scenario,
    SimulationObjectSpec,
    StdoutSink,
)
from scensim.values import DataType, Position, Route

LIBRARY = LibraryRef("maritime_library", "1.0-SNAPSHOT")

# Acceptance lines collected by tests/test_acceptance.py, printed at the end of the session.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def registry():
    return builtin_registry()


def vessel(
    kind: str,
    name: str,
    route: list[tuple[float, float]],
    speed: float,
    observes: tuple[ObservedClass, ...] = (),
    step: float = 1.0,
    publish: dict[str, bool] | None = None,
    extra: dict[str, AttributeSpec] | None = None,
    behaviour: BehaviourSpec | None = None,
) -> SimulationObjectSpec:
    """Vessel spec starting at its first waypoint; publishes name, position, rotation and speed by default."""
    flags = {"vesselName": True, "position": True, "rotation": True, "speed": True}
    flags.update(publish or {})
    waypoints = Route(tuple(Position(lat, lon) for lat, lon in route))
    D = DataType
    attrs = {
        "vesselName": AttributeSpec("vesselName", D.STRING, flags["vesselName"], name),
        "position": AttributeSpec("position", D.POSITION, flags["position"], waypoints.waypoints[0]),
        "rotation": AttributeSpec("rotation", D.DOUBLE, flags["rotation"], 0.0),
        "speed": AttributeSpec("speed", D.DOUBLE, flags["speed"], speed),
    }
    attrs.update(extra or {})
    return SimulationObjectSpec(
        kind,
        step,
        behaviour or BehaviourSpec("simpleFollowRouteBehaviour", {"route": waypoints}),
        attrs,
        observes,
    )


def three_vessel_scenario(iterations: int = 50, step: float = 1.0) -> Scenario:
    """Three federates that each observe every other vessel, plus one observer."""
    everyone = (ObservedClass("vessel", ("position", "vesselName")),)
    objects = (
        vessel("containerShip", "Alpha", [(53.55, 8.55), (53.70, 8.30), (54.00, 8.00)], 9.0, everyone, step),
        vessel("generalCargo", "Bravo", [(53.56, 8.56), (53.60, 8.40), (53.90, 7.90)], 6.0, everyone, step),
        vessel("containerShip", "Charlie", [(53.60, 8.20), (53.58, 8.50)], 4.5, everyone, step),
    )
    observer = ObserverConfig((ObservedClass("vessel", ("position", "speed")),), step, StdoutSink())
    return Scenario(LIBRARY, iterations, objects, (observer,))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
