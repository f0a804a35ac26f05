"""Live simulation objects and their attribute wrappers."""

from __future__ import annotations

from types import MappingProxyType
from typing import TYPE_CHECKING, Any, Mapping

from ..errors import MissingBehaviourError, UnknownTypeError
from ..values import AttributeValue, DataType, default_value, matches_kind
from .registry import TypeRegistry

if TYPE_CHECKING:
    from ..scenario.model import ObservedClass, SimulationObjectSpec


def object_uuid(id_seed: int) -> str:
    return f"obj-{id_seed:04d}"


def attribute_uuid(obj_uuid: str, name: str) -> str:
    return f"{obj_uuid}:{name}"


class SimulationAttribute:
    """Named, typed, publish-flagged value; identity-hashed so it can key bimaps."""

    __slots__ = ("uuid", "name", "data_type", "publish", "declaring_class", "_value")

    def __init__(self, uuid: str, name: str, data_type: DataType, publish: bool, value: Any, declaring_class: str):
        self.uuid = uuid
        self.name = name
        self.data_type = data_type
        self.publish = publish
        self.declaring_class = declaring_class
        self._value = None
        self.value = value

    @property
    def value(self) -> AttributeValue:
        return self._value

    @value.setter
    def value(self, new: AttributeValue) -> None:
        if not matches_kind(new, self.data_type):
            raise TypeError(f"{self.uuid}: {new!r} is not a {self.data_type.value}")
        self._value = new

    def __repr__(self) -> str:
        return f"SimulationAttribute({self.uuid!r}, {self._value!r}, publish={self.publish})"


class SimulationObjectInstance:
    def __init__(
        self,
        uuid: str,
        concrete_type: str,
        lineage: tuple[str, ...],
        attributes: dict[str, SimulationAttribute],
        behaviour: Any = None,
        time_step_size: float | None = None,
        observed_classes: tuple["ObservedClass", ...] = (),
    ):
        self.uuid = uuid
        self.concrete_type = concrete_type
        self.lineage = tuple(lineage)
        self.attributes = attributes
        self.behaviour = behaviour
        self.time_step_size = time_step_size
        self.observed_classes = tuple(observed_classes)

    @property
    def class_path(self) -> str:
        return ".".join(["HLAObjectRoot", *self.lineage])

    def attribute_by_uuid(self, uuid: str) -> SimulationAttribute | None:
        prefix = self.uuid + ":"
        if not uuid.startswith(prefix):
            return None
        return self.attributes.get(uuid[len(prefix):])

    def values(self) -> dict[str, AttributeValue]:
        return {name: a.value for name, a in self.attributes.items()}

    def view(self) -> "ObjectView":
        return ObjectView(self)

    def __repr__(self) -> str:
        return f"SimulationObjectInstance({self.uuid!r}, {self.concrete_type})"


class ObjectView:
    """Read-only snapshot of an instance handed to behaviours."""

    __slots__ = ("uuid", "concrete_type", "class_path", "_values", "_types")

    def __init__(self, instance: SimulationObjectInstance):
        self.uuid = instance.uuid
        self.concrete_type = instance.concrete_type
        self.class_path = instance.class_path
        self._values = MappingProxyType(instance.values())
        self._types = {n: a.data_type for n, a in instance.attributes.items()}

    @property
    def values(self) -> Mapping[str, AttributeValue]:
        return self._values

    def __getitem__(self, name: str) -> AttributeValue:
        return self._values[name]

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def get(self, name: str, default: Any = None) -> Any:
        return self._values.get(name, default)

    def attribute_uuid(self, name: str) -> str:
        if name not in self._values:
            raise KeyError(name)
        return attribute_uuid(self.uuid, name)

    def data_type(self, name: str) -> DataType:
        return self._types[name]

    def __repr__(self) -> str:
        return f"ObjectView({self.uuid!r}, {self.concrete_type})"


def new_instance(
    registry: TypeRegistry,
    class_name: str,
    uuid: str,
    values: Mapping[str, AttributeValue] | None = None,
    publish: Mapping[str, bool] | None = None,
) -> SimulationObjectInstance:
    """Instance with registry defaults; used for own objects and remote shells."""
    canonical = registry.canonical(class_name)
    values = values or {}
    publish = publish or {}
    attrs: dict[str, SimulationAttribute] = {}
    for owner, decl in registry.attributes(canonical):
        if decl.name in values:
            value = values[decl.name]
        else:
            value = default_value(decl.data_type)
        attrs[decl.name] = SimulationAttribute(
            attribute_uuid(uuid, decl.name),
            decl.name,
            decl.data_type,
            publish.get(decl.name, decl.default_publish),
            value,
            owner,
        )
    return SimulationObjectInstance(uuid, canonical, tuple(registry.lineage(canonical)), attrs)


def instantiate(registry: TypeRegistry, spec: "SimulationObjectSpec", id_seed: int) -> SimulationObjectInstance:
    """Turn a validated object spec into a live instance with deterministic ids."""
    if not registry.has_class(spec.concrete_type):
        raise UnknownTypeError(f"unknown type {spec.concrete_type!r}")
    descriptor = registry.descriptor(spec.concrete_type)
    if descriptor.abstract:
        raise UnknownTypeError(f"{descriptor.name} is abstract and cannot be instantiated")
    instance = new_instance(
        registry,
        descriptor.name,
        object_uuid(id_seed),
        values={n: s.value for n, s in spec.attribute_specs.items()},
        publish={n: s.publish for n, s in spec.attribute_specs.items()},
    )
    if spec.behaviour is not None:
        instance.behaviour = registry.behaviour(spec.behaviour.concrete_type).factory(dict(spec.behaviour.parameters))
    elif registry.is_active(descriptor.name):
        raise MissingBehaviourError(f"{descriptor.name} is active but has no behaviour")
    instance.time_step_size = spec.time_step_size
    instance.observed_classes = tuple(spec.observed_classes)
    return instance
