from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import vessel
from scensim.building_blocks import (
    METERS_PER_DEG_LAT,
    Behaviour,
    BehaviourDescriptor,
    SimpleFollowRouteBehaviour,
    advance_along_route,
    execute_behaviour,
    instantiate,
    lineage,
)
from scensim.errors import BehaviourFault, EmptyRouteError, MissingBehaviourError, UnknownTypeError
from scensim.scenario import SimulationObjectSpec
from scensim.values import Position, Route


def flat_earth_displacement(lat: float, north_m: float, east_m: float) -> tuple[float, float]:
    """Independent oracle: degrees moved for a metric displacement at ``lat``."""
    return north_m / 111320.0, east_m / (111320.0 * math.cos(lat * math.pi / 180.0))


# -- registry ---------------------------------------------------------------------------------


def test_container_ship_lineage(registry):
    assert lineage(registry, "containerShip") == [
        "SimulationObject",
        "DynamicSimulationObject",
        "ActiveSimulationObject",
        "TrafficParticipant",
        "Vessel",
        "ContainerShip",
    ]


def test_lineage_edges(registry):
    assert lineage(registry, "Vessel")[-2:] == ["TrafficParticipant", "Vessel"]
    assert lineage(registry, "SimulationObject") == ["SimulationObject"]
    with pytest.raises(UnknownTypeError):
        lineage(registry, "x")


def test_attribute_placement(registry):
    own = {name: {a.name for a in c.own_attributes} for name, c in registry.classes.items()}
    assert {"position", "rotation", "formString", "physical"} == own["SimulationObject"]
    assert {"speed", "acceleration"} == own["TrafficParticipant"]
    assert {"vesselName", "mmsi", "course", "draught"} == own["Vessel"]
    assert own["ContainerShip"] == own["GeneralCargo"] == set()
    assert "simpleFollowRouteBehaviour" in registry.behaviours


def test_lineage_attribute_closure(registry):
    for name in registry.classes:
        names = [d.name for _, d in registry.attributes(name)]
        assert len(names) == len(set(names))


def test_extended_registry_keeps_identity(registry):
    ext = registry.extended(behaviours=[BehaviourDescriptor("noop", lambda p: None)])
    assert (ext.library_name, ext.library_version) == (registry.library_name, registry.library_version)
    assert "noop" in ext.behaviours and "noop" not in registry.behaviours


# -- instantiate ------------------------------------------------------------------------------


def _ship(**kw):
    return vessel("containerShip", "Hamburg Express", [(53.55, 8.55), (53.60, 8.55)], 10.0, **kw)


def test_instantiate_uuid_and_values(registry):
    obj = instantiate(registry, _ship(), 1)
    assert obj.uuid == "obj-0001"
    attr = obj.attributes["vesselName"]
    assert attr.uuid == "obj-0001:vesselName"
    assert attr.value == "Hamburg Express" and attr.publish is True
    assert set(obj.attributes) == {d.name for _, d in registry.attributes("ContainerShip")}


def test_unspecified_attributes_get_defaults(registry):
    spec = _ship()
    attrs = {k: v for k, v in spec.attribute_specs.items() if k != "speed"}
    obj = instantiate(registry, SimulationObjectSpec(spec.concrete_type, 1.0, spec.behaviour, attrs), 1)
    assert obj.attributes["speed"].value == 0.0
    assert obj.attributes["speed"].publish is False


def test_instantiation_is_deterministic(registry):
    a, b = instantiate(registry, _ship(), 1), instantiate(registry, _ship(), 2)
    assert a.uuid != b.uuid
    assert a.values() == b.values()


def test_active_object_needs_behaviour(registry):
    spec = _ship()
    with pytest.raises(MissingBehaviourError):
        instantiate(registry, SimulationObjectSpec(spec.concrete_type, 1.0, None, spec.attribute_specs), 1)


def test_unknown_type(registry):
    spec = _ship()
    with pytest.raises(UnknownTypeError):
        instantiate(registry, SimulationObjectSpec("submarine", 1.0, spec.behaviour), 1)


# -- behaviours -------------------------------------------------------------------------------


def _follower(registry, speed, route):
    obj = instantiate(registry, vessel("containerShip", "s", route, speed), 1)
    return obj


def test_follow_route_step_due_north(registry):
    obj = _follower(registry, 10.0, [(53.55, 8.55), (53.60, 8.55)])
    obj.behaviour.cursor = 1
    updates = execute_behaviour(obj.behaviour, 1.0, obj, {})
    p = updates["obj-0001:position"]
    dlat, _ = flat_earth_displacement(53.55, 10.0, 0.0)
    assert p.latitude == pytest.approx(53.55 + dlat, abs=1e-12)
    assert p.latitude == pytest.approx(53.55008983, abs=1e-8)
    assert p.longitude == 8.55
    assert updates["obj-0001:rotation"] == 0.0


def test_zero_speed_is_a_fixpoint(registry):
    obj = _follower(registry, 0.0, [(53.55, 8.55), (53.60, 8.55)])
    updates = execute_behaviour(obj.behaviour, 1.0, obj, {})
    assert updates["obj-0001:position"] == obj.attributes["position"].value


def test_behaviour_does_not_mutate_own(registry):
    obj = _follower(registry, 10.0, [(53.55, 8.55), (53.60, 8.55)])
    before = obj.values()
    execute_behaviour(obj.behaviour, 1.0, obj, {})
    assert obj.values() == before


class _Returns(Behaviour):
    def __init__(self, result):
        self.result = result

    def next_step(self, time_passed, own, observed):
        if isinstance(self.result, Exception):
            raise self.result
        return self.result


def test_empty_update_map_is_legal(registry):
    obj = _follower(registry, 1.0, [(0, 0), (1, 1)])
    assert execute_behaviour(_Returns({}), 1.0, obj, {}) == {}


@pytest.mark.parametrize(
    "result",
    [RuntimeError("boom"), {"obj-0002:speed": 1.0}, {"obj-0001:speed": "fast"}, ["not", "a", "map"]],
)
def test_behaviour_faults(registry, result):
    obj = _follower(registry, 1.0, [(0, 0), (1, 1)])
    with pytest.raises(BehaviourFault):
        execute_behaviour(_Returns(result), 1.0, obj, {})


def test_time_passed_must_be_positive(registry):
    obj = _follower(registry, 1.0, [(0, 0), (1, 1)])
    with pytest.raises(ValueError):
        execute_behaviour(obj.behaviour, 0.0, obj, {})


# -- kinematics -------------------------------------------------------------------------------


def test_closed_form_east_step():
    lat = 53.55
    speed = METERS_PER_DEG_LAT * math.cos(lat * math.pi / 180)
    route = Route((Position(lat, 8.55), Position(lat, 8.60)))
    p, cursor, heading = advance_along_route(route[0], route, 1, speed, 0.001)
    assert p.longitude - 8.55 == pytest.approx(0.001, abs=1e-12)
    assert p.latitude == lat and cursor == 1 and heading == 90.0


def test_speed_zero_changes_nothing():
    route = Route((Position(0, 0), Position(1, 0)))
    assert advance_along_route(Position(0, 0), route, 1, 0.0, 1.0, heading=42.0) == (Position(0, 0), 1, 42.0)


def test_saturates_at_last_waypoint():
    route = Route((Position(0, 0), Position(0.001, 0)))
    p, cursor, heading = advance_along_route(route[1], route, 1, 5.0, 1.0, heading=17.0)
    assert (p, cursor, heading) == (route[1], 1, 17.0)
    p, cursor, _ = advance_along_route(route[0], route, 1, 1e6, 1.0)
    assert (p, cursor) == (route[1], 1)


def test_surplus_carries_into_next_leg():
    route = Route((Position(0, 0), Position(10 / 111320, 0), Position(10 / 111320, 1.0)))
    p, cursor, heading = advance_along_route(route[0], route, 1, 15.0, 1.0)
    assert cursor == 2 and heading == 90.0
    _, dlon = flat_earth_displacement(p.latitude, 0.0, 5.0)
    assert p.longitude == pytest.approx(dlon, rel=1e-9)


def test_bad_inputs():
    route = Route((Position(0, 0), Position(1, 0)))
    with pytest.raises(EmptyRouteError):
        advance_along_route(Position(0, 0), (), 0, 1.0, 1.0)
    with pytest.raises(ValueError):
        advance_along_route(Position(0, 0), route, 2, 1.0, 1.0)
    with pytest.raises(ValueError):
        advance_along_route(Position(0, 0), route, 0, -1.0, 1.0)


@given(
    lat=st.floats(-60, 60),
    bearing=st.floats(0, 359),
    # Latitudes near 60 deg resolve to about 1e-9 m, so keep steps of metres for a 1e-9 relative bound.
    speed=st.floats(5.0, 20.0),
    steps=st.integers(1, 50),
)
def test_route_monotonicity(lat, bearing, speed, steps):
    """Cumulative distance is k * speed * dt while the far waypoint is not reached."""
    far_north, far_east = flat_earth_displacement(lat, 2000 * math.cos(math.radians(bearing)), 2000 * math.sin(math.radians(bearing)))
    start = Position(lat, 10.0)
    route = Route((start, Position(lat + far_north, 10.0 + far_east)))
    p, cursor, travelled = start, 1, 0.0
    for _ in range(steps):
        q, cursor, _ = advance_along_route(p, route, cursor, speed, 1.0)
        north = (q.latitude - p.latitude) * 111320.0
        east = (q.longitude - p.longitude) * 111320.0 * math.cos(math.radians(p.latitude))
        travelled += math.hypot(north, east)
        p = q
    assert travelled == pytest.approx(steps * speed, rel=1e-9)


def test_follow_route_from_parameters_rejects_non_route():
    with pytest.raises(TypeError):
        SimpleFollowRouteBehaviour.from_parameters({"route": "nope"})
