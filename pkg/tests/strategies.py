"""Hypothesis generators for valid scenarios and FOM modules."""

from __future__ import annotations

from hypothesis import strategies as st

from scensim.building_blocks import builtin_registry
from scensim.fom import ATTRIBUTE_SHARING, CLASS_SHARING, SCALAR_TYPES, FOMAttribute, FOMModule, FOMObjectClass
from scensim.scenario import (
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
from scensim.values import DataType, Position, Route

REGISTRY = builtin_registry()
CONCRETE = sorted(n for n, c in REGISTRY.classes.items() if not c.abstract)
ALL_CLASSES = sorted(REGISTRY.classes)

# XML 1.0 cannot carry most control characters; carriage returns are normalised by parsers.
text = st.text(st.characters(blacklist_categories=("Cs", "Cc")), max_size=20)
finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
step_sizes = st.floats(min_value=1e-3, max_value=60.0, allow_nan=False)
identifiers = st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,11}", fullmatch=True)


@st.composite
def positions(draw) -> Position:
    return Position(
        draw(st.floats(-90.0, 90.0, allow_nan=False)),
        draw(st.floats(-180.0, 180.0, allow_nan=False)),
        draw(st.floats(-1e4, 1e4, allow_nan=False)),
    )


routes = st.lists(positions(), min_size=2, max_size=5).map(lambda ps: Route(tuple(ps)))


def values_of(data_type: DataType):
    return {
        DataType.BOOLEAN: st.booleans(),
        DataType.INTEGER: st.integers(-(2**63), 2**63 - 1),
        DataType.DOUBLE: finite,
        DataType.STRING: text,
        DataType.POSITION: positions(),
        DataType.ROUTE: routes,
    }[data_type]


@st.composite
def observed_classes(draw) -> ObservedClass:
    cls = draw(st.sampled_from(ALL_CLASSES))
    names = [d.name for _, d in REGISTRY.attributes(cls)]
    chosen = draw(st.lists(st.sampled_from(names), unique=True, max_size=len(names))) if names else []
    return ObservedClass(REGISTRY.descriptor(cls).xml_name, tuple(chosen))


@st.composite
def simulation_objects(draw) -> SimulationObjectSpec:
    cls = draw(st.sampled_from(CONCRETE))
    decls = [d for _, d in REGISTRY.attributes(cls)]
    chosen = draw(st.lists(st.sampled_from(decls), unique_by=lambda d: d.name, max_size=len(decls)))
    attrs = {
        d.name: AttributeSpec(d.name, d.data_type, draw(st.booleans()), draw(values_of(d.data_type)))
        for d in chosen
    }
    behaviour = BehaviourSpec("simpleFollowRouteBehaviour", {"route": draw(routes)})
    return SimulationObjectSpec(
        REGISTRY.descriptor(cls).xml_name,
        draw(step_sizes),
        behaviour,
        attrs,
        tuple(draw(st.lists(observed_classes(), max_size=3))),
    )


sinks = st.one_of(
    st.just(StdoutSink()),
    st.from_regex(r"[a-z][a-z0-9_-]{0,10}\.ndjson", fullmatch=True).map(FileSink),
    st.builds(WebSocketSink, st.sampled_from(["127.0.0.1", "localhost"]), st.integers(0, 65535)),
)


@st.composite
def observers(draw) -> ObserverConfig:
    return ObserverConfig(
        tuple(draw(st.lists(observed_classes(), min_size=1, max_size=3))),
        draw(step_sizes),
        draw(sinks),
    )


@st.composite
def scenarios(draw) -> Scenario:
    return Scenario(
        LibraryRef(REGISTRY.library_name, REGISTRY.library_version),
        draw(st.integers(1, 10_000)),
        tuple(draw(st.lists(simulation_objects(), min_size=1, max_size=4))),
        tuple(draw(st.lists(observers(), max_size=2))),
    )


fom_attributes = st.builds(
    FOMAttribute,
    st.lists(identifiers, min_size=1, max_size=3).map(".".join),
    st.sampled_from(SCALAR_TYPES),
    st.sampled_from(ATTRIBUTE_SHARING),
)


def fom_classes(depth: int):
    children = st.just(()) if depth == 0 else st.lists(fom_classes(depth - 1), max_size=2).map(tuple)
    return st.builds(
        FOMObjectClass,
        identifiers,
        st.sampled_from(CLASS_SHARING),
        st.lists(fom_attributes, max_size=4).map(tuple),
        children,
    )


@st.composite
def fom_modules(draw) -> FOMModule:
    root = draw(fom_classes(3))
    root = FOMObjectClass("HLAObjectRoot", root.sharing, root.attributes, root.children)
    source = draw(st.one_of(st.none(), st.from_regex(r"obj-[0-9]{4}", fullmatch=True)))
    return FOMModule(draw(identifiers.map(lambda s: f"{s}--{len(s)}")), root, source)
