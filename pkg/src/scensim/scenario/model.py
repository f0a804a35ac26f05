"""In-memory scenario instance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Union

from ..values import DataType

BASE_NAMESPACE = "http://uol.de/mdts/schema/base"
XSI_NAMESPACE = "http://www.w3.org/2001/XMLSchema-instance"


@dataclass(frozen=True)
class LibraryRef:
    name: str
    version: str


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    data_type: DataType
    publish: bool
    value: Any


@dataclass(frozen=True)
class ObservedClass:
    type: str
    attributes: tuple[str, ...]


@dataclass(frozen=True)
class BehaviourSpec:
    concrete_type: str
    parameters: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SimulationObjectSpec:
    concrete_type: str
    time_step_size: float
    behaviour: BehaviourSpec | None = None
    attribute_specs: dict[str, AttributeSpec] = field(default_factory=dict)
    observed_classes: tuple[ObservedClass, ...] = ()


@dataclass(frozen=True)
class StdoutSink:
    pass


@dataclass(frozen=True)
class FileSink:
    path: str


@dataclass(frozen=True)
class WebSocketSink:
    host: str
    port: int


Sink = Union[StdoutSink, FileSink, WebSocketSink]


@dataclass(frozen=True)
class ObserverConfig:
    observed_classes: tuple[ObservedClass, ...]
    time_step_size: float
    sink: Sink = StdoutSink()


@dataclass(frozen=True)
class Scenario:
    library: LibraryRef
    simulation_iterations: int
    simulation_objects: tuple[SimulationObjectSpec, ...]
    observers: tuple[ObserverConfig, ...] = ()
