"""Explicit validation pass over a Scenario against a registry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..building_blocks.registry import TypeRegistry
from ..errors import (
    LibraryMismatchError,
    ScenarioError,
    SchemaViolationError,
    UnknownTypeError,
    UnsupportedConfigurationError,
    ValueTypeMismatchError,
)
from ..values import DataType, matches_kind
from .model import FileSink, ObservedClass, Scenario, StdoutSink, WebSocketSink

UNKNOWN_TYPE = "UnknownType"
SCHEMA_VIOLATION = "SchemaViolation"
VALUE_TYPE_MISMATCH = "ValueTypeMismatch"
LIBRARY_MISMATCH = "LibraryMismatch"
MISSING_BEHAVIOUR = "MissingBehaviour"
UNSUPPORTED_CONFIGURATION = "UnsupportedConfiguration"

_ERRORS = {
    UNKNOWN_TYPE: UnknownTypeError,
    SCHEMA_VIOLATION: SchemaViolationError,
    VALUE_TYPE_MISMATCH: ValueTypeMismatchError,
    LIBRARY_MISMATCH: LibraryMismatchError,
    MISSING_BEHAVIOUR: SchemaViolationError,
    UNSUPPORTED_CONFIGURATION: UnsupportedConfigurationError,
}


@dataclass(frozen=True)
class Finding:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.path}: {self.message}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def __len__(self) -> int:
        return len(self.findings)

    def __iter__(self):
        return iter(self.findings)

    def add(self, code: str, path: str, message: str) -> None:
        self.findings.append(Finding(code, path, message))

    def raise_first(self) -> None:
        """Raise the error matching the first finding, carrying all of them."""
        if self.findings:
            f = self.findings[0]
            exc_type = _ERRORS.get(f.code, ScenarioError)
            raise exc_type(f.message, f.path, self.findings)


def _positive_finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x > 0


def _check_observed(report: ValidationReport, registry: TypeRegistry, oc: ObservedClass, path: str) -> None:
    if not registry.has_class(oc.type):
        report.add(UNKNOWN_TYPE, f"{path}.type", f"unknown type {oc.type!r}")
        return
    known = {decl.name for _, decl in registry.attributes(oc.type)}
    for j, name in enumerate(oc.attributes):
        if name not in known:
            report.add(SCHEMA_VIOLATION, f"{path}.attributes[{j}]", f"{oc.type} has no attribute {name!r}")
    if len(set(oc.attributes)) != len(oc.attributes):
        report.add(SCHEMA_VIOLATION, f"{path}.attributes", "duplicate attribute names")


def validate_scenario(s: Scenario, registry: TypeRegistry) -> ValidationReport:
    report = ValidationReport()

    lib = s.library
    if not lib.name or not lib.version:
        report.add(SCHEMA_VIOLATION, "library", "library name and version must be non-empty")
    elif (lib.name, lib.version) != (registry.library_name, registry.library_version):
        report.add(
            LIBRARY_MISMATCH,
            "library",
            f"scenario wants {lib.name} {lib.version}, registry provides "
            f"{registry.library_name} {registry.library_version}",
        )

    if not isinstance(s.simulation_iterations, int) or isinstance(s.simulation_iterations, bool) \
            or s.simulation_iterations < 1:
        report.add(SCHEMA_VIOLATION, "simulationIterations", "must be an integer >= 1")

    if not s.simulation_objects:
        report.add(SCHEMA_VIOLATION, "simulationObjects", "at least one simulationObject is required")

    for i, spec in enumerate(s.simulation_objects):
        path = f"simulationObjects[{i}]"
        if not registry.has_class(spec.concrete_type):
            report.add(UNKNOWN_TYPE, path, f"unknown type {spec.concrete_type!r}")
            continue
        desc = registry.descriptor(spec.concrete_type)
        if desc.abstract:
            report.add(SCHEMA_VIOLATION, path, f"{desc.name} is abstract")
        if not _positive_finite(spec.time_step_size):
            report.add(SCHEMA_VIOLATION, f"{path}.timeStepSize", "must be > 0")

        if spec.behaviour is None:
            if registry.is_active(desc.name):
                report.add(MISSING_BEHAVIOUR, f"{path}.behaviour", f"{desc.name} is active and needs a behaviour")
        elif spec.behaviour.concrete_type not in registry.behaviours:
            report.add(UNKNOWN_TYPE, f"{path}.behaviour", f"unknown behaviour {spec.behaviour.concrete_type!r}")
        else:
            bd = registry.behaviour(spec.behaviour.concrete_type)
            for pname, pvalue in spec.behaviour.parameters.items():
                if pname not in bd.parameters:
                    report.add(SCHEMA_VIOLATION, f"{path}.behaviour.{pname}", "unknown behaviour parameter")
                elif not matches_kind(pvalue, bd.parameters[pname]):
                    report.add(
                        VALUE_TYPE_MISMATCH,
                        f"{path}.behaviour.{pname}",
                        f"{pvalue!r} is not a {bd.parameters[pname].value}",
                    )
            for pname in sorted(bd.required - set(spec.behaviour.parameters)):
                report.add(SCHEMA_VIOLATION, f"{path}.behaviour.{pname}", "required parameter missing")

        declared = {decl.name: decl for _, decl in registry.attributes(desc.name)}
        for name, a in spec.attribute_specs.items():
            apath = f"{path}.{name}"
            if a.name != name:
                report.add(SCHEMA_VIOLATION, apath, f"attribute spec is named {a.name!r}")
            if name not in declared:
                report.add(SCHEMA_VIOLATION, apath, f"{desc.name} has no attribute {name!r}")
                continue
            if a.data_type is not declared[name].data_type:
                report.add(
                    SCHEMA_VIOLATION,
                    apath,
                    f"dataType {getattr(a.data_type, 'value', a.data_type)} but library declares "
                    f"{declared[name].data_type.value}",
                )
            elif not matches_kind(a.value, a.data_type):
                report.add(VALUE_TYPE_MISMATCH, apath, f"{a.value!r} is not a {a.data_type.value}")
        for name, decl in declared.items():
            if decl.data_type is DataType.ROUTE and name not in spec.attribute_specs:
                report.add(SCHEMA_VIOLATION, f"{path}.{name}", "Route attributes have no default and must be given")

        for j, oc in enumerate(spec.observed_classes):
            _check_observed(report, registry, oc, f"{path}.observedClasses[{j}]")

    for i, obs in enumerate(s.observers):
        path = f"observers[{i}]"
        if not obs.observed_classes:
            report.add(SCHEMA_VIOLATION, f"{path}.observedClasses", "an observer needs at least one observedClass")
        for j, oc in enumerate(obs.observed_classes):
            _check_observed(report, registry, oc, f"{path}.observedClasses[{j}]")
        if not _positive_finite(obs.time_step_size):
            report.add(SCHEMA_VIOLATION, f"{path}.timeStepSize", "must be > 0")
        sink = obs.sink
        if isinstance(sink, FileSink):
            if not sink.path:
                report.add(SCHEMA_VIOLATION, f"{path}.sink", "file sink needs a path")
        elif isinstance(sink, WebSocketSink):
            if not sink.host or not isinstance(sink.port, int) or not 0 <= sink.port <= 65535:
                report.add(SCHEMA_VIOLATION, f"{path}.sink", "websocket sink needs a host and a port in 0..65535")
        elif not isinstance(sink, StdoutSink):
            report.add(SCHEMA_VIOLATION, f"{path}.sink", f"unknown sink {sink!r}")

    return report
