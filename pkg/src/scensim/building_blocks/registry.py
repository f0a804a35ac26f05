"""Class/behaviour registry: the layered construction kit scenarios draw from."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

from ..errors import UnknownTypeError
from ..values import DataType

ROOT_CLASS = "SimulationObject"
ACTIVE_CLASS = "ActiveSimulationObject"


def xml_name(class_name: str) -> str:
    """Scenario documents spell class names in lowerCamelCase."""
    return class_name[:1].lower() + class_name[1:]


@dataclass(frozen=True)
class AttributeDecl:
    name: str
    data_type: DataType
    default_publish: bool = False


@dataclass(frozen=True)
class ClassDescriptor:
    name: str
    parent: str | None
    abstract: bool = False
    own_attributes: tuple[AttributeDecl, ...] = ()

    @property
    def xml_name(self) -> str:
        return xml_name(self.name)


@dataclass(frozen=True)
class BehaviourDescriptor:
    name: str
    factory: Callable[[Mapping[str, object]], object]
    parameters: Mapping[str, DataType] = field(default_factory=dict)
    required: frozenset[str] = frozenset()


class TypeRegistry:
    """Immutable registry of classes and behaviours.

    Lookups accept either the class name ("ContainerShip") or the spelling used
    in scenario documents ("containerShip").
    """

    def __init__(
        self,
        classes: Iterable[ClassDescriptor],
        behaviours: Iterable[BehaviourDescriptor] = (),
        *,
        library_name: str,
        library_version: str,
    ):
        self.library_name = library_name
        self.library_version = library_version
        self._classes: dict[str, ClassDescriptor] = {}
        for c in classes:
            if c.name in self._classes:
                raise ValueError(f"class {c.name} registered twice")
            self._classes[c.name] = c
        self._aliases = {c.xml_name: c.name for c in self._classes.values()}
        self._behaviours = {b.name: b for b in behaviours}
        self._check()

    def _check(self) -> None:
        if ROOT_CLASS not in self._classes or self._classes[ROOT_CLASS].parent is not None:
            raise ValueError(f"registry root must be {ROOT_CLASS}")
        for c in self._classes.values():
            if c.name != ROOT_CLASS and c.parent not in self._classes:
                raise ValueError(f"class {c.name} has unknown parent {c.parent!r}")
            seen: set[str] = set()
            names: set[str] = set()
            for anc in self.lineage(c.name):
                if anc in seen:
                    raise ValueError(f"cyclic lineage at {c.name}")
                seen.add(anc)
                for a in self._classes[anc].own_attributes:
                    if a.name in names:
                        raise ValueError(f"attribute {a.name} declared twice along lineage of {c.name}")
                    names.add(a.name)

    @property
    def classes(self) -> Mapping[str, ClassDescriptor]:
        return MappingProxyType(self._classes)

    @property
    def behaviours(self) -> Mapping[str, BehaviourDescriptor]:
        return MappingProxyType(self._behaviours)

    def canonical(self, name: str) -> str:
        """Class name for either spelling; raises UnknownTypeError."""
        if name in self._classes:
            return name
        if name in self._aliases:
            return self._aliases[name]
        raise UnknownTypeError(f"unknown type {name!r}")

    def has_class(self, name: str) -> bool:
        return name in self._classes or name in self._aliases

    def descriptor(self, name: str) -> ClassDescriptor:
        return self._classes[self.canonical(name)]

    def behaviour(self, name: str) -> BehaviourDescriptor:
        if name in self._behaviours:
            return self._behaviours[name]
        raise UnknownTypeError(f"unknown behaviour {name!r}")

    def lineage(self, name: str) -> list[str]:
        chain = []
        current: str | None = self.canonical(name)
        while current is not None:
            chain.append(current)
            if len(chain) > len(self._classes):
                raise ValueError(f"cyclic lineage at {name}")
            current = self._classes[current].parent
        chain.reverse()
        return chain

    def attributes(self, name: str) -> list[tuple[str, AttributeDecl]]:
        """(declaring class, declaration) for every attribute, root first."""
        return [(c, a) for c in self.lineage(name) for a in self._classes[c].own_attributes]

    def attribute(self, class_name: str, attribute: str) -> tuple[str, AttributeDecl]:
        for owner, decl in self.attributes(class_name):
            if decl.name == attribute:
                return owner, decl
        raise KeyError(attribute)

    def is_active(self, name: str) -> bool:
        return ACTIVE_CLASS in self.lineage(name)

    def is_subclass(self, name: str, ancestor: str) -> bool:
        return self.canonical(ancestor) in self.lineage(name)

    def class_path(self, name: str) -> str:
        return ".".join(["HLAObjectRoot", *self.lineage(name)])

    def extended(
        self,
        classes: Iterable[ClassDescriptor] = (),
        behaviours: Iterable[BehaviourDescriptor] = (),
    ) -> "TypeRegistry":
        """New registry with extra classes/behaviours (same library identity)."""
        return TypeRegistry(
            [*self._classes.values(), *classes],
            [*self._behaviours.values(), *behaviours],
            library_name=self.library_name,
            library_version=self.library_version,
        )


def lineage(registry: TypeRegistry, class_name: str) -> list[str]:
    """Root-first lineage of ``class_name``."""
    return registry.lineage(class_name)


def builtin_registry() -> TypeRegistry:
    """The base/traffic layers plus the minimal maritime library."""
    from .behaviours import SimpleFollowRouteBehaviour

    D = DataType
    classes = [
        ClassDescriptor(
            "SimulationObject",
            None,
            abstract=True,
            own_attributes=(
                AttributeDecl("position", D.POSITION),
                AttributeDecl("rotation", D.DOUBLE),
                AttributeDecl("formString", D.STRING),
                AttributeDecl("physical", D.BOOLEAN),
            ),
        ),
        ClassDescriptor("DynamicSimulationObject", "SimulationObject", abstract=True),
        ClassDescriptor("ActiveSimulationObject", "DynamicSimulationObject", abstract=True),
        ClassDescriptor(
            "TrafficParticipant",
            "ActiveSimulationObject",
            abstract=True,
            own_attributes=(
                AttributeDecl("speed", D.DOUBLE),
                AttributeDecl("acceleration", D.DOUBLE),
            ),
        ),
        ClassDescriptor(
            "Vessel",
            "TrafficParticipant",
            abstract=True,
            own_attributes=(
                AttributeDecl("vesselName", D.STRING),
                AttributeDecl("mmsi", D.STRING),
                AttributeDecl("course", D.DOUBLE),
                AttributeDecl("draught", D.DOUBLE),
            ),
        ),
        ClassDescriptor("ContainerShip", "Vessel"),
        ClassDescriptor("GeneralCargo", "Vessel"),
    ]
    behaviours = [
        BehaviourDescriptor(
            "simpleFollowRouteBehaviour",
            SimpleFollowRouteBehaviour.from_parameters,
            parameters={"route": D.ROUTE},
            required=frozenset({"route"}),
        ),
    ]
    return TypeRegistry(classes, behaviours, library_name="maritime_library", library_version="1.0-SNAPSHOT")
