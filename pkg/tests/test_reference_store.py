from __future__ import annotations

import pytest

from conftest import vessel
from scensim.building_blocks import instantiate, new_instance
from scensim.errors import (
    InconsistentInputError,
    UnknownAttributePathError,
    UnknownClassPathError,
    UnknownObjectError,
)
from scensim.fom import generate_fom_module
from scensim.reference_store import (
    BiMap,
    MultiMap,
    ancestor_paths,
    build_reference_store,
    register_discovered,
    resolve_attribute,
    subscription_paths,
)
from scensim.scenario import ObservedClass

CONTAINER_PATH = (
    "HLAObjectRoot.SimulationObject.DynamicSimulationObject.ActiveSimulationObject."
    "TrafficParticipant.Vessel.ContainerShip"
)
TP = "HLAObjectRoot.SimulationObject.DynamicSimulationObject.ActiveSimulationObject.TrafficParticipant"


@pytest.fixture()
def store(registry):
    ship = instantiate(registry, vessel("containerShip", "Hamburg Express", [(53.55, 8.55), (53.6, 8.5)], 10.0), 1)
    subs = [subscription_paths(registry, ObservedClass("vessel", ("position", "speed")))[0]]
    return build_reference_store(ship, generate_fom_module(ship, registry), subs)


@pytest.fixture()
def cargo(registry):
    return new_instance(registry, "GeneralCargo", "obj-0002")


def test_own_object_path(store):
    assert store.get_fom_path_for_simulation_object(store.simulation_object) == CONTAINER_PATH
    assert store.simulation_object_type == "ContainerShip"


def test_attribute_by_uuid(store):
    assert store.get_simulation_attribute_by_uuid("obj-0001:vesselName").value == "Hamburg Express"
    with pytest.raises(UnknownObjectError):
        store.get_simulation_attribute_by_uuid("obj-0001:nothing")


def test_own_object_under_every_ancestor(store):
    for path in ancestor_paths(CONTAINER_PATH):
        assert store.objects_under(path) == [store.simulation_object]


def test_all_flattened_leaves_resolve(store):
    own = store.simulation_object
    assert resolve_attribute(store, "obj-0001", "HLAObjectRoot.SimulationObject.position.latitude").name == "position"
    paths = store.attribute_path_map(own)
    assert len(paths) == sum(3 if a.data_type.value == "Position" else 1 for a in own.attributes.values())


def test_mismatched_fom_and_instance(registry, cargo, store):
    with pytest.raises(InconsistentInputError):
        build_reference_store(cargo, store.fom)


def test_discovered_peer_resolves_by_path(store, cargo):
    register_discovered(store, cargo.class_path, cargo)
    assert resolve_attribute(store, "obj-0002", f"{TP}.speed") is cargo.attributes["speed"]
    assert resolve_attribute(store, "obj-0002", f"{TP}.Vessel.vesselName").name == "vesselName"
    assert cargo in store.objects_under(f"{TP}.Vessel")


def test_discovery_is_idempotent(store, cargo):
    register_discovered(store, cargo.class_path, cargo)
    register_discovered(store, cargo.class_path, cargo)
    assert store.objects_under(cargo.class_path) == [cargo]


def test_unsubscribed_class_path(store, registry):
    remote = new_instance(registry, "ContainerShip", "obj-0009")
    with pytest.raises(UnknownClassPathError):
        register_discovered(store, "HLAObjectRoot.SimulationObject", remote)


def test_lookup_errors(store):
    with pytest.raises(UnknownObjectError):
        resolve_attribute(store, "obj-9999", f"{TP}.speed")
    with pytest.raises(UnknownAttributePathError):
        resolve_attribute(store, "obj-0001", f"{TP}.Vessel.colour")


def test_bimaps_are_bijections(store, cargo):
    register_discovered(store, cargo.class_path, cargo)
    for bimap in (store.fom_path_to_fom_object_class, store.fom_path_to_fom_attribute,
                  store.uuid_to_simulation_object, store.uuid_to_simulation_attribute):
        for k, v in bimap.items():
            assert bimap.inverse(v) == k and bimap[k] is v


def test_closure_over_registered_objects(store, cargo):
    register_discovered(store, cargo.class_path, cargo)
    for obj in (store.simulation_object, cargo):
        for attr in obj.attributes.values():
            assert store.uuid_to_simulation_attribute[attr.uuid] is attr


def test_bimap_rejects_repeats():
    m: BiMap[str, int] = BiMap()
    m.put("a", 1)
    with pytest.raises(ValueError):
        m.put("b", 1)
    with pytest.raises(ValueError):
        m.put("a", 2)
    mm: MultiMap[str, int] = MultiMap()
    mm.put("k", 1)
    mm.put("k", 1)
    assert mm.get("k") == [1]


def test_subscription_paths_empty_means_all(registry):
    class_path, attrs = subscription_paths(registry, ObservedClass("vessel", ()))
    assert class_path == f"{TP}.Vessel"
    assert f"{TP}.Vessel.vesselName" in attrs and "HLAObjectRoot.SimulationObject.position.altitude" in attrs
