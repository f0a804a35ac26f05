from .model import (
    BASE_NAMESPACE,
    XSI_NAMESPACE,
    AttributeSpec,
    BehaviourSpec,
    FileSink,
    LibraryRef,
    ObservedClass,
    ObserverConfig,
    Scenario,
    SimulationObjectSpec,
    StdoutSink,
    WebSocketSink,
)
from .validate import Finding, ValidationReport, validate_scenario
from .xml import parse_scenario, serialize_scenario

__all__ = [
    "BASE_NAMESPACE",
    "XSI_NAMESPACE",
    "AttributeSpec",
    "BehaviourSpec",
    "FileSink",
    "Finding",
    "LibraryRef",
    "ObservedClass",
    "ObserverConfig",
    "Scenario",
    "SimulationObjectSpec",
    "StdoutSink",
    "ValidationReport",
    "WebSocketSink",
    "parse_scenario",
    "serialize_scenario",
    "validate_scenario",
]
