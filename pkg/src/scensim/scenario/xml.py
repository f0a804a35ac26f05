"""Scenario document <-> Scenario."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Any

from .._xml import El, render, split_tag
from ..building_blocks.registry import TypeRegistry
from ..errors import SchemaViolationError, UnknownTypeError, ValueTypeMismatchError, WellFormednessError
from ..values import (
    POSITION_LEAVES,
    DataType,
    Position,
    Route,
    format_scalar_text,
    parse_datatype,
    parse_scalar_text,
)
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
from .validate import validate_scenario

XSI_TYPE = f"{{{XSI_NAMESPACE}}}type"
ATTRIBUTE_FIELDS = ("value", "name", "dataType", "publish")


# -- parsing ------------------------------------------------------------------


def _local(el: ET.Element, path: str) -> str:
    ns, local = split_tag(el.tag)
    if ns not in (None, BASE_NAMESPACE):
        raise SchemaViolationError(f"element <{local}> in foreign namespace {ns}", path)
    return local


def _children(el: ET.Element, path: str) -> list[tuple[str, ET.Element]]:
    if el.text and el.text.strip():
        raise SchemaViolationError("unexpected text content", path)
    out = []
    for c in el:
        out.append((_local(c, path), c))
        if c.tail and c.tail.strip():
            raise SchemaViolationError("unexpected text content", path)
    return out


def _unique_children(el: ET.Element, path: str, allowed: set[str], required: set[str]) -> dict[str, ET.Element]:
    found: dict[str, ET.Element] = {}
    for name, child in _children(el, path):
        if name not in allowed:
            raise SchemaViolationError(f"unexpected element <{name}>", path)
        if name in found:
            raise SchemaViolationError(f"element <{name}> may appear only once", path)
        found[name] = child
    missing = sorted(required - set(found))
    if missing:
        raise SchemaViolationError(f"missing required element <{missing[0]}>", path)
    return found


def _leaf_text(el: ET.Element, path: str) -> str:
    if len(el):
        raise SchemaViolationError(f"<{_local(el, path)}> must not have child elements", path)
    return el.text or ""


def _number(el: ET.Element, path: str, kind: DataType) -> Any:
    try:
        return parse_scalar_text(_leaf_text(el, path), kind)
    except ValueError as exc:
        raise SchemaViolationError(str(exc), path) from None


def _position(el: ET.Element, path: str) -> Position:
    parts = _unique_children(el, path, set(POSITION_LEAVES), set(POSITION_LEAVES))
    try:
        coords = {k: parse_scalar_text(_leaf_text(parts[k], path), DataType.DOUBLE) for k in POSITION_LEAVES}
        return Position(**coords)
    except (ValueError, TypeError) as exc:
        raise ValueTypeMismatchError(f"invalid Position: {exc}", path) from None


def _typed_value(el: ET.Element, data_type: DataType, path: str) -> Any:
    """Parse the content of a <value> (or behaviour parameter) element."""
    if data_type.is_scalar:
        if len(el):
            raise ValueTypeMismatchError(f"{data_type.value} value must be plain text", path)
        try:
            return parse_scalar_text(el.text, data_type)
        except ValueError as exc:
            raise ValueTypeMismatchError(str(exc), path) from None
    if el.text and el.text.strip():
        raise ValueTypeMismatchError(f"{data_type.value} value must use child elements", path)
    if data_type is DataType.POSITION:
        return _position(el, path)
    waypoints = []
    for i, (name, child) in enumerate(_children(el, path)):
        if name != "position":
            raise ValueTypeMismatchError(f"Route children must be <position>, got <{name}>", path)
        waypoints.append(_position(child, f"{path}[{i}]"))
    try:
        return Route(tuple(waypoints))
    except ValueError as exc:
        raise ValueTypeMismatchError(str(exc), path) from None


def _xsi_type(el: ET.Element, path: str) -> str:
    t = el.get(XSI_TYPE)
    if not t:
        raise SchemaViolationError("missing xsi:type", path)
    return t.split(":", 1)[-1]


def _observed_classes(el: ET.Element, path: str, registry: TypeRegistry) -> tuple[ObservedClass, ...]:
    out = []
    for i, (name, oc) in enumerate(_children(el, path)):
        opath = f"{path}[{i}]"
        if name != "observedClass":
            raise SchemaViolationError(f"unexpected element <{name}>", path)
        parts = _unique_children(oc, opath, {"type", "attributes"}, {"type"})
        type_name = _leaf_text(parts["type"], opath).strip()
        if not registry.has_class(type_name):
            raise UnknownTypeError(f"unknown type {type_name!r}", f"{opath}.type")
        attrs = []
        if "attributes" in parts:
            for j, (aname, a) in enumerate(_children(parts["attributes"], f"{opath}.attributes")):
                if aname != "attribute":
                    raise SchemaViolationError(f"unexpected element <{aname}>", f"{opath}.attributes")
                attrs.append(_leaf_text(a, f"{opath}.attributes[{j}]").strip())
        out.append(ObservedClass(registry.descriptor(type_name).xml_name, tuple(attrs)))
    return tuple(out)


def _attribute_spec(el: ET.Element, tag: str, path: str) -> AttributeSpec:
    parts = _unique_children(el, path, set(ATTRIBUTE_FIELDS), set(ATTRIBUTE_FIELDS))
    name = _leaf_text(parts["name"], path).strip()
    if name != tag:
        raise SchemaViolationError(f"<name>{name}</name> does not match element <{tag}>", path)
    try:
        data_type = parse_datatype(_leaf_text(parts["dataType"], path))
    except ValueError as exc:
        raise SchemaViolationError(str(exc), f"{path}.dataType") from None
    publish = _number(parts["publish"], f"{path}.publish", DataType.BOOLEAN)
    value = _typed_value(parts["value"], data_type, path)
    return AttributeSpec(name, data_type, publish, value)


def _behaviour(el: ET.Element, path: str, registry: TypeRegistry) -> BehaviourSpec:
    type_name = _xsi_type(el, path)
    if type_name not in registry.behaviours:
        raise UnknownTypeError(f"unknown behaviour {type_name!r}", path)
    declared = registry.behaviour(type_name).parameters
    params: dict[str, Any] = {}
    for name, child in _children(el, path):
        if name not in declared:
            raise SchemaViolationError(f"unknown behaviour parameter <{name}>", path)
        if name in params:
            raise SchemaViolationError(f"parameter <{name}> given twice", path)
        params[name] = _typed_value(child, declared[name], f"{path}.{name}")
    return BehaviourSpec(type_name, params)


def _simulation_object(el: ET.Element, path: str, registry: TypeRegistry) -> SimulationObjectSpec:
    type_name = _xsi_type(el, path)
    if not registry.has_class(type_name):
        raise UnknownTypeError(f"unknown type {type_name!r}", path)
    desc = registry.descriptor(type_name)
    attribute_names = {decl.name for _, decl in registry.attributes(desc.name)}
    behaviour = None
    step = None
    observed: tuple[ObservedClass, ...] = ()
    attrs: dict[str, AttributeSpec] = {}
    seen: set[str] = set()
    for name, child in _children(el, path):
        if name in seen:
            raise SchemaViolationError(f"element <{name}> may appear only once", path)
        seen.add(name)
        if name == "behaviour":
            behaviour = _behaviour(child, f"{path}.behaviour", registry)
        elif name == "timeStepSize":
            step = _number(child, f"{path}.timeStepSize", DataType.DOUBLE)
        elif name == "observedClasses":
            observed = _observed_classes(child, f"{path}.observedClasses", registry)
        elif name in attribute_names:
            attrs[name] = _attribute_spec(child, name, f"{path}.{name}")
        else:
            raise SchemaViolationError(f"unexpected element <{name}> for {desc.name}", path)
    if step is None:
        raise SchemaViolationError("missing required element <timeStepSize>", path)
    return SimulationObjectSpec(desc.xml_name, step, behaviour, attrs, observed)


def _observer(el: ET.Element, path: str, registry: TypeRegistry) -> ObserverConfig:
    parts = _unique_children(
        el,
        path,
        {"observedClasses", "observerWebSocketConfig", "observerFileConfig", "timeStepSize"},
        {"observedClasses", "timeStepSize"},
    )
    if "observerWebSocketConfig" in parts and "observerFileConfig" in parts:
        raise SchemaViolationError("at most one sink configuration is allowed", path)
    sink: Any = StdoutSink()
    if "observerWebSocketConfig" in parts:
        ws = _unique_children(parts["observerWebSocketConfig"], f"{path}.sink", {"host", "port"}, {"host", "port"})
        sink = WebSocketSink(
            _leaf_text(ws["host"], f"{path}.sink").strip(),
            _number(ws["port"], f"{path}.sink.port", DataType.INTEGER),
        )
    elif "observerFileConfig" in parts:
        fc = _unique_children(parts["observerFileConfig"], f"{path}.sink", {"path"}, {"path"})
        sink = FileSink(_leaf_text(fc["path"], f"{path}.sink").strip())
    return ObserverConfig(
        _observed_classes(parts["observedClasses"], f"{path}.observedClasses", registry),
        _number(parts["timeStepSize"], f"{path}.timeStepSize", DataType.DOUBLE),
        sink,
    )


def parse_scenario(document: str | bytes, registry: TypeRegistry) -> Scenario:
    """Parse and validate a scenario document; raises a ScenarioError subclass."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise WellFormednessError(f"malformed XML: {exc}") from None
    if _local(root, "") != "scenario":
        raise SchemaViolationError(f"root element must be <scenario>, got <{_local(root, '')}>")
    parts = _unique_children(
        root,
        "scenario",
        {"library", "observers", "simulationObjects", "simulationIterations"},
        {"library", "simulationObjects", "simulationIterations"},
    )
    lib = _unique_children(parts["library"], "library", {"name", "version"}, {"name", "version"})
    library = LibraryRef(_leaf_text(lib["name"], "library").strip(), _leaf_text(lib["version"], "library").strip())
    iterations = _number(parts["simulationIterations"], "simulationIterations", DataType.INTEGER)

    objects = []
    for i, (name, child) in enumerate(_children(parts["simulationObjects"], "simulationObjects")):
        if name != "simulationObject":
            raise SchemaViolationError(f"unexpected element <{name}>", "simulationObjects")
        objects.append(_simulation_object(child, f"simulationObjects[{i}]", registry))
    if not objects:
        raise SchemaViolationError("at least one simulationObject is required", "simulationObjects")

    observers = []
    if "observers" in parts:
        for i, (name, child) in enumerate(_children(parts["observers"], "observers")):
            if name != "observer":
                raise SchemaViolationError(f"unexpected element <{name}>", "observers")
            observers.append(_observer(child, f"observers[{i}]", registry))

    scenario = Scenario(library, iterations, tuple(objects), tuple(observers))
    validate_scenario(scenario, registry).raise_first()
    return scenario


# -- serialization ------------------------------------------------------------


def _position_el(tag: str, p: Position) -> El:
    el = El(tag)
    for leaf in POSITION_LEAVES:
        el.leaf(leaf, repr(getattr(p, leaf)))
    return el


def _value_el(tag: str, value: Any, data_type: DataType) -> El:
    if data_type is DataType.POSITION:
        return _position_el(tag, value)
    if data_type is DataType.ROUTE:
        el = El(tag)
        for p in value.waypoints:
            el.add(_position_el("position", p))
        return el
    return El(tag, format_scalar_text(value, data_type))


def _observed_el(classes: tuple[ObservedClass, ...]) -> El:
    el = El("observedClasses")
    for oc in classes:
        c = el.add(El("observedClass"))
        c.leaf("type", oc.type)
        attrs = c.add(El("attributes"))
        for a in oc.attributes:
            attrs.leaf("attribute", a)
    return el


def serialize_scenario(s: Scenario, registry: TypeRegistry | None = None) -> str:
    """Canonical document for ``s``; parses back to an equal Scenario."""
    root = El("scenario", attrs=[("xmlns", BASE_NAMESPACE), ("xmlns:xsi", XSI_NAMESPACE)])
    lib = root.add(El("library"))
    lib.leaf("name", s.library.name)
    lib.leaf("version", s.library.version)

    if s.observers:
        observers = root.add(El("observers"))
        for obs in s.observers:
            o = observers.add(El("observer"))
            o.add(_observed_el(obs.observed_classes))
            if isinstance(obs.sink, WebSocketSink):
                ws = o.add(El("observerWebSocketConfig"))
                ws.leaf("host", obs.sink.host)
                ws.leaf("port", str(obs.sink.port))
            elif isinstance(obs.sink, FileSink):
                o.add(El("observerFileConfig")).leaf("path", obs.sink.path)
            o.leaf("timeStepSize", repr(float(obs.time_step_size)))

    objects = root.add(El("simulationObjects"))
    for spec in s.simulation_objects:
        o = objects.add(El("simulationObject", attrs=[("xsi:type", spec.concrete_type)]))
        if spec.behaviour is not None:
            b = o.add(El("behaviour", attrs=[("xsi:type", spec.behaviour.concrete_type)]))
            for pname, pvalue in spec.behaviour.parameters.items():
                ptype = _parameter_type(pvalue, registry, spec.behaviour.concrete_type, pname)
                b.add(_value_el(pname, pvalue, ptype))
        for name, a in spec.attribute_specs.items():
            el = o.add(El(name))
            el.add(_value_el("value", a.value, a.data_type))
            el.leaf("name", a.name)
            el.leaf("dataType", a.data_type.value)
            el.leaf("publish", "true" if a.publish else "false")
        o.leaf("timeStepSize", repr(float(spec.time_step_size)))
        if spec.observed_classes:
            o.add(_observed_el(spec.observed_classes))

    root.leaf("simulationIterations", str(s.simulation_iterations))
    return render(root)


def _parameter_type(value: Any, registry: TypeRegistry | None, behaviour: str, name: str) -> DataType:
    if registry is not None and behaviour in registry.behaviours:
        declared = registry.behaviour(behaviour).parameters
        if name in declared:
            return declared[name]
    # Infer from the runtime kind; bool before int since bool is an int.
    for kind, dt in ((Route, DataType.ROUTE), (Position, DataType.POSITION), (bool, DataType.BOOLEAN),
                     (int, DataType.INTEGER), (float, DataType.DOUBLE), (str, DataType.STRING)):
        if isinstance(value, kind):
            return dt
    raise TypeError(f"cannot serialize behaviour parameter {name}={value!r}")
