from __future__ import annotations

import pytest

from conftest import LIBRARY, vessel
from scensim.building_blocks import Behaviour, BehaviourDescriptor, instantiate, new_instance
from scensim.errors import DecodeError, ProtocolFault, UnknownAttributeUUIDError
from scensim.federate import (
    FederateConfig,
    InterpretedFederate,
    ObjectInstanceCache,
    apply_reflection,
    commit_updates,
    step_time,
)
from scensim.fom import generate_fom_module
from scensim.manager import plan_run, run_distributed
from scensim.reference_store import build_reference_store, subscription_paths
from scensim.rti.messages import RTI_SENDER, Kind, RtiMessage
from scensim.scenario import BehaviourSpec, ObservedClass, Scenario
from scensim.values import Position

ROOT = "HLAObjectRoot.SimulationObject"
TP = f"{ROOT}.DynamicSimulationObject.ActiveSimulationObject.TrafficParticipant"
CARGO = f"{TP}.Vessel.GeneralCargo"
ROUTE = [(53.55, 8.55), (53.60, 8.55)]


@pytest.fixture()
def world(registry):
    """Ship obj-0001 observing vessels, with cargo obj-0002 already discovered."""
    oc = ObservedClass("vessel", ("position", "speed"))
    ship = instantiate(registry, vessel("containerShip", "A", ROUTE, 10.0, (oc,)), 1)
    store = build_reference_store(ship, generate_fom_module(ship, registry), [subscription_paths(registry, oc)[0]])
    cache = ObjectInstanceCache([subscription_paths(registry, oc)[0]])
    cargo = new_instance(registry, "GeneralCargo", "obj-0002")
    store.register_discovered(CARGO, cargo)
    cache.add(CARGO, cargo)
    return ship, store, cache, cargo


def reflect(uuid, values, ts=1.0):
    return RtiMessage(Kind.REFLECT_ATTRIBUTE_VALUES, RTI_SENDER, {"objectUUID": uuid, "classPath": CARGO, "values": values}, ts)


def test_position_leaves_recompose(world):
    _, store, cache, cargo = world
    values = {f"{ROOT}.position.latitude": 53.84, f"{ROOT}.position.longitude": 8.115, f"{ROOT}.position.altitude": 0.0}
    apply_reflection(cache, store, reflect("obj-0002", values))
    assert cargo.attributes["position"].value == Position(53.84, 8.115, 0.0)
    assert cache.views()[f"{TP}.Vessel"][0].uuid == "obj-0002"


def test_partial_update_keeps_other_attributes(world):
    _, store, cache, cargo = world
    apply_reflection(cache, store, reflect("obj-0002", {f"{ROOT}.position.latitude": 10.0}))
    apply_reflection(cache, store, reflect("obj-0002", {f"{TP}.speed": 4.0}))
    assert cargo.attributes["position"].value == Position(10.0, 0.0, 0.0)
    assert cargo.attributes["speed"].value == 4.0


def test_undecodable_value(world):
    _, store, cache, _ = world
    with pytest.raises(DecodeError):
        apply_reflection(cache, store, reflect("obj-0002", {f"{TP}.speed": "abc"}))


def test_reflection_of_own_object(world):
    _, store, cache, _ = world
    with pytest.raises(ProtocolFault):
        apply_reflection(cache, store, reflect("obj-0001", {f"{TP}.speed": 1.0}))


def test_commit_publishes_only_flagged_attributes(registry):
    ship = instantiate(registry, vessel("containerShip", "A", ROUTE, 10.0, publish={"speed": False}), 1)
    store = build_reference_store(ship, generate_fom_module(ship, registry))
    published = commit_updates(ship, store, {"obj-0001:position": Position(1.0, 2.0), "obj-0001:speed": 3.0})
    assert sorted(published) == [f"{ROOT}.position.altitude", f"{ROOT}.position.latitude", f"{ROOT}.position.longitude"]
    assert ship.attributes["speed"].value == 3.0


def test_commit_edges(registry):
    ship = instantiate(registry, vessel("containerShip", "A", ROUTE, 10.0), 1)
    store = build_reference_store(ship, generate_fom_module(ship, registry))
    assert commit_updates(ship, store, {}) == {}
    with pytest.raises(UnknownAttributeUUIDError):
        commit_updates(ship, store, {"obj-0002:speed": 1.0})
    assert ship.attributes["speed"].value == 10.0


def test_step_time_is_exact_product():
    assert step_time(3, 0.1) == 3 * 0.1
    assert [step_time(k, 0.5) for k in range(3)] == [0.0, 0.5, 1.0]


def _federate(registry, spec, iterations=3):
    ship = instantiate(registry, spec, 1)
    fom = generate_fom_module(ship, registry)
    cfg = FederateConfig("fed-obj-0001", ship, fom, build_reference_store(ship, fom), 1.0, iterations)
    return InterpretedFederate(cfg, registry)


def test_lifecycle_without_observed_classes(registry):
    fed = _federate(registry, vessel("containerShip", "A", ROUTE, 10.0))
    kinds = [m.kind for m in fed.start()]
    assert Kind.SUBSCRIBE_OBJECT_CLASS_ATTRIBUTES not in kinds
    assert kinds[-1] is Kind.REGISTER_OBJECT_INSTANCE
    sync = RtiMessage(Kind.FEDERATION_SYNCHRONIZED, RTI_SENDER, {"label": "readyToRun"})
    first = fed.on_message(sync)
    assert [(m.kind, m.timestamp) for m in first] == [(Kind.UPDATE_ATTRIBUTE_VALUES, 1.0), (Kind.TIME_ADVANCE_REQUEST, 1.0)]
    for k in range(1, 4):
        out = fed.on_message(RtiMessage(Kind.TIME_ADVANCE_GRANT, RTI_SENDER, {}, float(k)))
        assert out[0].timestamp == float(k + 1)
    assert out[-1].kind is Kind.RESIGN_FEDERATION
    assert fed.report().ok and fed.report().steps_executed == 3 and fed.tar_count == 3


def test_unrequested_grant_faults(registry):
    fed = _federate(registry, vessel("containerShip", "A", ROUTE, 10.0))
    fed.start()
    out = fed.on_message(RtiMessage(Kind.TIME_ADVANCE_GRANT, RTI_SENDER, {}, 1.0))
    assert [m.kind for m in out] == [Kind.RESIGN_FEDERATION]
    assert "ProtocolFault" in fed.report().error


class _FailsAt(Behaviour):
    def __init__(self, step):
        self.step, self.calls = step, 0

    def next_step(self, time_passed, own, observed):
        self.calls += 1
        if self.calls == self.step:
            raise RuntimeError("rudder jammed")
        return {}


def test_behaviour_fault_aborts_the_run(registry, tmp_path):
    ext = registry.extended(behaviours=[BehaviourDescriptor("failsAt", lambda params: _FailsAt(3))])
    spec = vessel("containerShip", "A", ROUTE, 10.0, behaviour=BehaviourSpec("failsAt", {}))
    other = vessel("generalCargo", "B", ROUTE, 5.0)
    report = run_distributed(plan_run(Scenario(LIBRARY, 10, (spec, other), ()), ext, tmp_path))
    failed = report.federates["fed-obj-0001"]
    assert failed.steps_executed == 2 and "rudder jammed" in failed.error
    assert report.status == "aborted"
    assert report.federates["fed-obj-0002"].steps_executed <= 3
