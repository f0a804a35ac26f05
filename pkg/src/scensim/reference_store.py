"""Per-federate registry linking FOM paths, uuids, objects and attributes."""

from __future__ import annotations

from typing import TYPE_CHECKING, Generic, Hashable, Iterable, Iterator, TypeVar

from .building_blocks.instances import SimulationAttribute, SimulationObjectInstance
from .errors import (
    InconsistentInputError,
    UnknownAttributePathError,
    UnknownClassPathError,
    UnknownObjectError,
)
from .fom import FOMAttribute, FOMModule, FOMObjectClass, iter_attributes, iter_classes, leaf_class_path
from .values import flatten_attribute

if TYPE_CHECKING:
    from .building_blocks.registry import TypeRegistry
    from .scenario.model import ObservedClass

K = TypeVar("K", bound=Hashable)
V = TypeVar("V", bound=Hashable)


class BiMap(Generic[K, V]):
    """One-to-one map with an inverse view; refuses to break the bijection."""

    def __init__(self):
        self._fwd: dict[K, V] = {}
        self._inv: dict[V, K] = {}

    def put(self, key: K, value: V) -> None:
        if key in self._fwd:
            if self._fwd[key] is value or self._fwd[key] == value:
                return
            raise ValueError(f"key {key!r} already bound")
        if value in self._inv:
            raise ValueError(f"value for {key!r} already bound to {self._inv[value]!r}")
        self._fwd[key] = value
        self._inv[value] = key

    def __getitem__(self, key: K) -> V:
        return self._fwd[key]

    def get(self, key: K, default=None):
        return self._fwd.get(key, default)

    def inverse(self, value: V) -> K:
        return self._inv[value]

    def __contains__(self, key) -> bool:
        return key in self._fwd

    def __len__(self) -> int:
        return len(self._fwd)

    def __iter__(self) -> Iterator[K]:
        return iter(self._fwd)

    def items(self):
        return self._fwd.items()


class MultiMap(Generic[K, V]):
    """Key -> ordered list of distinct values."""

    def __init__(self):
        self._data: dict[K, list[V]] = {}

    def put(self, key: K, value: V) -> None:
        bucket = self._data.setdefault(key, [])
        if not any(v is value for v in bucket):
            bucket.append(value)

    def get(self, key: K) -> list[V]:
        return list(self._data.get(key, ()))

    def __contains__(self, key) -> bool:
        return key in self._data

    def keys(self):
        return self._data.keys()


def ancestor_paths(class_path: str) -> list[str]:
    """Every prefix path of a dotted class path, root first, itself included."""
    parts = class_path.split(".")
    return [".".join(parts[: i + 1]) for i in range(len(parts))]


def is_same_or_descendant(class_path: str, ancestor: str) -> bool:
    return class_path == ancestor or class_path.startswith(ancestor + ".")


def declared_attribute_paths(registry: "TypeRegistry", class_name: str, attribute: str) -> list[str]:
    """Wire paths of an attribute as declared in the registry."""
    owner, decl = registry.attribute(class_name, attribute)
    prefix = registry.class_path(owner)
    return [f"{prefix}.{leaf}" for leaf, _ in flatten_attribute(decl.name, decl.data_type)]


def subscription_paths(registry: "TypeRegistry", observed: "ObservedClass") -> tuple[str, tuple[str, ...]]:
    """(class path, attribute paths) to subscribe for one observed class.

    An empty attribute list means every attribute of the class.
    """
    names = observed.attributes or tuple(d.name for _, d in registry.attributes(observed.type))
    paths = [p for n in names for p in declared_attribute_paths(registry, observed.type, n)]
    return registry.class_path(observed.type), tuple(paths)


def attribute_paths(obj: SimulationObjectInstance, attr: SimulationAttribute) -> list[str]:
    """Wire paths of an attribute's scalar leaves."""
    lineage = obj.lineage
    owner = ".".join(["HLAObjectRoot", *lineage[: lineage.index(attr.declaring_class) + 1]])
    return [f"{owner}.{leaf}" for leaf, _ in flatten_attribute(attr.name, attr.data_type)]


class ReferenceStore:
    def __init__(self, instance: SimulationObjectInstance, fom: FOMModule, subscribed_paths: Iterable[str] = ()):
        self.simulation_object = instance
        self.simulation_object_type = instance.concrete_type
        self.fom = fom
        self.subscribed_paths: tuple[str, ...] = tuple(subscribed_paths)
        self.fom_path_to_fom_object_class: BiMap[str, FOMObjectClass] = BiMap()
        self.fom_path_to_fom_attribute: BiMap[str, FOMAttribute] = BiMap()
        self.fom_path_to_simulation_objects: MultiMap[str, SimulationObjectInstance] = MultiMap()
        self.fom_path_to_simulation_attributes: MultiMap[str, SimulationAttribute] = MultiMap()
        self.uuid_to_simulation_object: BiMap[str, SimulationObjectInstance] = BiMap()
        self.uuid_to_simulation_attribute: BiMap[str, SimulationAttribute] = BiMap()
        # (object uuid, attribute path) -> attribute; backs resolve_attribute.
        self._by_object_path: dict[tuple[str, str], SimulationAttribute] = {}

    # -- population -------------------------------------------------------

    def _add_object(self, class_path: str, obj: SimulationObjectInstance) -> None:
        self.uuid_to_simulation_object.put(obj.uuid, obj)
        for p in ancestor_paths(class_path):
            self.fom_path_to_simulation_objects.put(p, obj)
        for attr in obj.attributes.values():
            self.uuid_to_simulation_attribute.put(attr.uuid, attr)
            for path in attribute_paths(obj, attr):
                self.fom_path_to_simulation_attributes.put(path, attr)
                self._by_object_path[(obj.uuid, path)] = attr

    def register_discovered(self, class_path: str, remote: SimulationObjectInstance) -> "ReferenceStore":
        if not any(is_same_or_descendant(class_path, s) for s in self.subscribed_paths):
            raise UnknownClassPathError(f"{class_path} is not covered by any subscription")
        if remote.uuid in self.uuid_to_simulation_object:
            return self
        self._add_object(class_path, remote)
        return self

    # -- lookups ------------------------------------------------------------

    def get_fom_path_for_simulation_object(self, obj: SimulationObjectInstance) -> str:
        return obj.class_path

    def get_simulation_object_by_uuid(self, uuid: str) -> SimulationObjectInstance:
        try:
            return self.uuid_to_simulation_object[uuid]
        except KeyError:
            raise UnknownObjectError(f"unknown object {uuid!r}") from None

    def get_simulation_attribute_by_uuid(self, uuid: str) -> SimulationAttribute:
        try:
            return self.uuid_to_simulation_attribute[uuid]
        except KeyError:
            raise UnknownObjectError(f"unknown attribute {uuid!r}") from None

    def objects_under(self, class_path: str) -> list[SimulationObjectInstance]:
        return self.fom_path_to_simulation_objects.get(class_path)

    def resolve_attribute(self, object_uuid: str, attribute_path: str) -> SimulationAttribute:
        if object_uuid not in self.uuid_to_simulation_object:
            raise UnknownObjectError(f"unknown object {object_uuid!r}")
        try:
            return self._by_object_path[(object_uuid, attribute_path)]
        except KeyError:
            raise UnknownAttributePathError(f"{object_uuid} has no attribute at {attribute_path!r}") from None

    def attribute_path_map(self, obj: SimulationObjectInstance) -> dict[str, SimulationAttribute]:
        """Leaf path -> attribute for one registered object."""
        return {p: a for (u, p), a in self._by_object_path.items() if u == obj.uuid}


def build_reference_store(
    instance: SimulationObjectInstance,
    fom: FOMModule,
    subscribed_paths: Iterable[str] = (),
) -> ReferenceStore:
    """Populate every map for the federate's own object and module."""
    if leaf_class_path(fom) != instance.class_path or fom.source_object_uuid not in (None, instance.uuid):
        raise InconsistentInputError(
            f"FOM module {fom.model_name} describes {leaf_class_path(fom)}, instance is {instance.class_path}"
        )
    store = ReferenceStore(instance, fom, subscribed_paths)
    for path, cls in iter_classes(fom):
        store.fom_path_to_fom_object_class.put(path, cls)
    for path, attr in iter_attributes(fom):
        store.fom_path_to_fom_attribute.put(path, attr)
    store._add_object(instance.class_path, instance)
    missing = [
        p for a in instance.attributes.values() for p in attribute_paths(instance, a)
        if p not in store.fom_path_to_fom_attribute
    ]
    if missing:
        raise InconsistentInputError(f"FOM module lacks attribute paths {missing}")
    return store


def register_discovered(store: ReferenceStore, class_path: str, remote: SimulationObjectInstance) -> ReferenceStore:
    return store.register_discovered(class_path, remote)


def resolve_attribute(store: ReferenceStore, object_uuid: str, attribute_path: str) -> SimulationAttribute:
    return store.resolve_attribute(object_uuid, attribute_path)
