"""Per-object FOM modules: generation, OMT-shaped XML rendering and parsing."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Iterable, Iterator

from ._xml import El, render, split_tag
from .building_blocks.instances import SimulationObjectInstance
from .building_blocks.registry import TypeRegistry
from .errors import DialectViolationError, FomWellFormednessError, UnknownTypeError
from .values import DataType, flatten_attribute

OMT_NAMESPACE = "https://www.sisostds.org/schemas/IEEE1516-2010"
OMT_XSI_NAMESPACE = "https://www.w3.org/2001/XMLSchema-instance"
OMT_SCHEMA_LOCATION = f"{OMT_NAMESPACE} https://www.sisostds.org/schemas/IEEE1516-DIF-2010.xsd"
ROOT_CLASS = "HLAObjectRoot"

PUBLISH = "Publish"
SUBSCRIBE = "Subscribe"
PUBLISH_SUBSCRIBE = "PublishSubscribe"
NEITHER = "Neither"
CLASS_SHARING = (PUBLISH, SUBSCRIBE, PUBLISH_SUBSCRIBE, NEITHER)
ATTRIBUTE_SHARING = (PUBLISH, NEITHER)
SCALAR_TYPES = (DataType.BOOLEAN, DataType.INTEGER, DataType.DOUBLE, DataType.STRING)


@dataclass(frozen=True)
class FOMAttribute:
    name: str
    data_type: DataType
    sharing: str = NEITHER
    update_type: str = "Unconditional"
    ownership: str = "NoTransfer"


@dataclass(frozen=True)
class FOMObjectClass:
    name: str
    sharing: str = NEITHER
    attributes: tuple[FOMAttribute, ...] = ()
    children: tuple["FOMObjectClass", ...] = ()

    @property
    def child(self) -> "FOMObjectClass | None":
        """The single nested class of a per-object chain."""
        if len(self.children) > 1:
            raise ValueError(f"{self.name} has {len(self.children)} child classes")
        return self.children[0] if self.children else None


@dataclass(frozen=True)
class FOMModule:
    model_name: str
    root: FOMObjectClass
    source_object_uuid: str | None = None
    model_type: str = "FOM"

    def chain(self) -> list[FOMObjectClass]:
        """Classes from HLAObjectRoot down to the leaf of a single-path module."""
        out = []
        node: FOMObjectClass | None = self.root
        while node is not None:
            out.append(node)
            node = node.child
        return out


def fnv1a_32(text: str) -> int:
    h = 0x811C9DC5
    for b in text.encode("utf-8"):
        h ^= b
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def iter_classes(module: FOMModule) -> Iterator[tuple[str, FOMObjectClass]]:
    """(dotted class path, class) for every class, depth first."""

    def walk(node: FOMObjectClass, prefix: str):
        path = f"{prefix}.{node.name}" if prefix else node.name
        yield path, node
        for c in node.children:
            yield from walk(c, path)

    yield from walk(module.root, "")


def iter_attributes(module: FOMModule) -> Iterator[tuple[str, FOMAttribute]]:
    """(attribute path, attribute); the path is class path + "." + leaf name."""
    for path, cls in iter_classes(module):
        for a in cls.attributes:
            yield f"{path}.{a.name}", a


def leaf_class_path(module: FOMModule) -> str:
    return ".".join(c.name for c in module.chain())


# -- generation ---------------------------------------------------------------


def _chain(classes: list[FOMObjectClass]) -> FOMObjectClass:
    node = None
    for c in reversed(classes):
        node = FOMObjectClass(c.name, c.sharing, c.attributes, (node,) if node else ())
    assert node is not None
    return node


def generate_fom_module(instance: SimulationObjectInstance, registry: TypeRegistry) -> FOMModule:
    """FOM module describing exactly what ``instance`` shares."""
    if not registry.has_class(instance.concrete_type):
        raise UnknownTypeError(f"unknown type {instance.concrete_type!r}")
    lineage = registry.lineage(instance.concrete_type)
    if tuple(lineage) != instance.lineage:
        raise UnknownTypeError(f"{instance.uuid} lineage does not match registry")
    classes = [FOMObjectClass(ROOT_CLASS)]
    for class_name in lineage:
        attrs = []
        for a in instance.attributes.values():
            if a.declaring_class != class_name:
                continue
            sharing = PUBLISH if a.publish else NEITHER
            attrs.extend(FOMAttribute(leaf, dt, sharing) for leaf, dt in flatten_attribute(a.name, a.data_type))
        sharing = PUBLISH if any(x.sharing == PUBLISH for x in attrs) else NEITHER
        classes.append(FOMObjectClass(class_name, sharing, tuple(attrs)))
    name = f"{lineage[-1]}--{fnv1a_32(instance.uuid)}"
    return FOMModule(name, _chain(classes), instance.uuid)


def _registry_class(registry: TypeRegistry, class_name: str, sharing: str) -> FOMObjectClass:
    desc = registry.descriptor(class_name)
    attrs = tuple(
        FOMAttribute(leaf, dt)
        for decl in desc.own_attributes
        for leaf, dt in flatten_attribute(decl.name, decl.data_type)
    )
    return FOMObjectClass(desc.name, sharing, attrs)


def generate_base_module(registry: TypeRegistry, top: str = "TrafficParticipant") -> FOMModule:
    """The master's module: the shared base chain, nothing published."""
    classes = [FOMObjectClass(ROOT_CLASS)] + [_registry_class(registry, c, NEITHER) for c in registry.lineage(top)]
    return FOMModule("SimulationBase", _chain(classes))


def generate_subscription_module(owner: str, class_names: Iterable[str], registry: TypeRegistry) -> FOMModule:
    """Declares the classes a member subscribes to, so the federation knows them at join time."""
    wanted = {registry.canonical(c) for c in class_names}
    tree: dict[str, dict] = {}
    for c in wanted:
        node = tree
        for anc in registry.lineage(c):
            node = node.setdefault(anc, {})

    def build(name: str, sub: dict) -> FOMObjectClass:
        base = _registry_class(registry, name, SUBSCRIBE if name in wanted else NEITHER)
        children = tuple(build(n, sub[n]) for n in sorted(sub))
        return FOMObjectClass(base.name, base.sharing, base.attributes, children)

    root = FOMObjectClass(ROOT_CLASS, NEITHER, (), tuple(build(n, tree[n]) for n in sorted(tree)))
    return FOMModule(f"Subscriptions--{fnv1a_32(owner)}", root)


# -- rendering ------------------------------------------------------------------


def _class_el(cls: FOMObjectClass) -> El:
    el = El("objectClass")
    el.leaf("name", cls.name)
    el.leaf("sharing", cls.sharing)
    for a in cls.attributes:
        ael = el.add(El("attribute"))
        ael.leaf("name", a.name)
        ael.leaf("dataType", a.data_type.value)
        ael.leaf("updateType", a.update_type)
        ael.leaf("ownership", a.ownership)
        ael.leaf("sharing", a.sharing)
    for c in cls.children:
        el.add(_class_el(c))
    return el


def render_fom_xml(m: FOMModule) -> str:
    root = El(
        "objectModel",
        attrs=[
            ("xmlns", OMT_NAMESPACE),
            ("xmlns:xsi", OMT_XSI_NAMESPACE),
            ("xsi:schemaLocation", OMT_SCHEMA_LOCATION),
        ],
    )
    ident = root.add(El("modelIdentification"))
    ident.leaf("name", m.model_name)
    ident.leaf("type", m.model_type)
    if m.source_object_uuid is not None:
        ident.leaf("description", m.source_object_uuid)
    root.add(El("objects")).add(_class_el(m.root))
    return render(root)


# -- parsing --------------------------------------------------------------------


def _local(el: ET.Element) -> str:
    ns, local = split_tag(el.tag)
    if ns != OMT_NAMESPACE:
        raise DialectViolationError(f"element <{local}> outside the OMT namespace")
    return local


def _text(el: ET.Element) -> str:
    if len(el):
        raise DialectViolationError(f"<{_local(el)}> must be a text element")
    return (el.text or "").strip()


def _expect(el: ET.Element, names: list[str], optional: set[str] = frozenset()) -> dict[str, ET.Element]:
    kids = list(el)
    found: dict[str, ET.Element] = {}
    i = 0
    for name in names:
        if i < len(kids) and _local(kids[i]) == name:
            found[name] = kids[i]
            i += 1
        elif name not in optional:
            raise DialectViolationError(f"<{_local(el)}> is missing <{name}>")
    if i != len(kids):
        raise DialectViolationError(f"unexpected <{_local(kids[i])}> in <{_local(el)}>")
    return found


def _parse_attribute(el: ET.Element) -> FOMAttribute:
    f = _expect(el, ["name", "dataType", "updateType", "ownership", "sharing"])
    try:
        dt = DataType(_text(f["dataType"]))
    except ValueError:
        raise DialectViolationError(f"unknown dataType {_text(f['dataType'])!r}") from None
    if dt not in SCALAR_TYPES:
        raise DialectViolationError(f"attribute dataType must be scalar, got {dt.value}")
    sharing = _text(f["sharing"])
    if sharing not in ATTRIBUTE_SHARING:
        raise DialectViolationError(f"invalid attribute sharing {sharing!r}")
    return FOMAttribute(_text(f["name"]), dt, sharing, _text(f["updateType"]), _text(f["ownership"]))


def _parse_class(el: ET.Element) -> FOMObjectClass:
    if _local(el) != "objectClass":
        raise DialectViolationError(f"expected <objectClass>, got <{_local(el)}>")
    kids = list(el)
    if len(kids) < 2 or _local(kids[0]) != "name" or _local(kids[1]) != "sharing":
        raise DialectViolationError("<objectClass> must start with <name> and <sharing>")
    name, sharing = _text(kids[0]), _text(kids[1])
    if sharing not in CLASS_SHARING:
        raise DialectViolationError(f"invalid class sharing {sharing!r}")
    attrs, children = [], []
    for k in kids[2:]:
        tag = _local(k)
        if tag == "attribute":
            if children:
                raise DialectViolationError("<attribute> after a nested <objectClass>")
            attrs.append(_parse_attribute(k))
        elif tag == "objectClass":
            children.append(_parse_class(k))
        else:
            raise DialectViolationError(f"unexpected <{tag}> in <objectClass>")
    return FOMObjectClass(name, sharing, tuple(attrs), tuple(children))


def parse_fom_xml(document: str | bytes) -> FOMModule:
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise FomWellFormednessError(f"malformed FOM XML: {exc}") from None
    if _local(root) != "objectModel":
        raise DialectViolationError("root element must be <objectModel>")
    top = _expect(root, ["modelIdentification", "objects"])
    ident = _expect(top["modelIdentification"], ["name", "type", "description"], optional={"description"})
    objects = list(top["objects"])
    if len(objects) != 1:
        raise DialectViolationError("<objects> must hold exactly one root <objectClass>")
    cls = _parse_class(objects[0])
    if cls.name != ROOT_CLASS:
        raise DialectViolationError(f"root class must be {ROOT_CLASS}, got {cls.name}")
    source = _text(ident["description"]) if "description" in ident else None
    return FOMModule(_text(ident["name"]), cls, source, _text(ident["type"]))
