"""Canonical scenario fixtures and their golden files.

The German Bight fixture has two vessels leaving Bremerhaven. The waypoints
are illustrative and were authored for this package: the routes share the
Weser approach and diverge north of Wangerooge. The cargo route passes
through (53.8400963111777, 8.115035313513989) as a nod to the sample output
position shown in the original write-up; no trajectory fidelity is claimed.

Golden files are produced by the reference executor (``regenerate``) and
committed next to the scenario document.
"""

from __future__ import annotations

from pathlib import Path

from ..scenario.model import (
    AttributeSpec,
    BehaviourSpec,
    FileSink,
    LibraryRef,
    ObservedClass,
    ObserverConfig,
    Scenario,
    SimulationObjectSpec,
)
from ..values import DataType, Position, Route

FIXTURES_DIR = Path(__file__).parent
GERMAN_BIGHT_DIR = FIXTURES_DIR / "german-bight"
LISTING_DIR = FIXTURES_DIR / "excerpt"

LIBRARY = LibraryRef("maritime_library", "1.0-SNAPSHOT")
LISTING_SAMPLE = Position(53.8400963111777, 8.115035313513989)
BREMERHAVEN = Position(53.55, 8.55)

CONTAINER_ROUTE = Route(
    (
        BREMERHAVEN,
        Position(53.62, 8.48),
        Position(53.72, 8.32),
        Position(53.86, 8.12),
        Position(54.05, 7.95),
        Position(54.25, 7.80),
    )
)
CARGO_ROUTE = Route(
    (
        BREMERHAVEN,
        Position(53.62, 8.48),
        Position(53.72, 8.32),
        LISTING_SAMPLE,
        Position(53.83, 7.80),
        Position(53.80, 7.60),
    )
)
OBSERVED_ATTRIBUTES = ("position", "vesselName", "speed", "rotation")


def _vessel(
    kind: str,
    name: str,
    mmsi: str,
    route: Route,
    speed: float,
    draught: float,
    observes: tuple[ObservedClass, ...],
    step: float,
    speed_published: bool = True,
) -> SimulationObjectSpec:
    D = DataType
    attrs = [
        AttributeSpec("vesselName", D.STRING, True, name),
        AttributeSpec("mmsi", D.STRING, False, mmsi),
        AttributeSpec("position", D.POSITION, True, route.waypoints[0]),
        AttributeSpec("rotation", D.DOUBLE, True, 0.0),
        AttributeSpec("speed", D.DOUBLE, speed_published, speed),
        AttributeSpec("course", D.DOUBLE, False, 0.0),
        AttributeSpec("draught", D.DOUBLE, False, draught),
        AttributeSpec("physical", D.BOOLEAN, False, True),
        AttributeSpec("formString", D.STRING, False, "vessel"),
    ]
    return SimulationObjectSpec(
        kind,
        step,
        BehaviourSpec("simpleFollowRouteBehaviour", {"route": route}),
        {a.name: a for a in attrs},
        observes,
    )


def german_bight_scenario(
    iterations: int = 1000, step: float = 1.0, speed_published: bool = True
) -> Scenario:
    """Two vessels and one observer on every vessel."""
    container = _vessel(
        "containerShip",
        "Hamburg Express",
        "211234560",
        CONTAINER_ROUTE,
        10.0,
        12.5,
        (ObservedClass("generalCargo", ("vesselName", "position")),),
        step,
        speed_published,
    )
    cargo = _vessel(
        "generalCargo",
        "Anne-Sofie",
        "218765430",
        CARGO_ROUTE,
        6.5,
        7.2,
        (ObservedClass("vessel", ("vesselName", "position")),),
        step,
        speed_published,
    )
    observer = ObserverConfig(
        (ObservedClass("vessel", OBSERVED_ATTRIBUTES),), step, FileSink("observer-0.ndjson")
    )
    return Scenario(LIBRARY, iterations, (container, cargo), (observer,))


def listing_scenario() -> Scenario:
    """The excerpted scenario instance, with the elided parts filled in minimally."""
    ship = SimulationObjectSpec(
        "containerShip",
        1.0,
        BehaviourSpec("simpleFollowRouteBehaviour", {"route": CONTAINER_ROUTE}),
        {
            "vesselName": AttributeSpec("vesselName", DataType.STRING, True, "Hamburg Express"),
            "position": AttributeSpec("position", DataType.POSITION, True, BREMERHAVEN),
            "speed": AttributeSpec("speed", DataType.DOUBLE, True, 10.0),
        },
        (ObservedClass("containerShip", ("vesselName", "position")),),
    )
    cargo = SimulationObjectSpec(
        "generalCargo",
        1.0,
        BehaviourSpec("simpleFollowRouteBehaviour", {"route": CARGO_ROUTE}),
        {
            "vesselName": AttributeSpec("vesselName", DataType.STRING, True, "Anne-Sofie"),
            "position": AttributeSpec("position", DataType.POSITION, True, BREMERHAVEN),
        },
    )
    observer = ObserverConfig((ObservedClass("vessel", OBSERVED_ATTRIBUTES),), 1.0)
    return Scenario(LIBRARY, 1000, (ship, cargo), (observer,))


def german_bight_path() -> Path:
    return GERMAN_BIGHT_DIR / "scenario.xml"


def listing_path() -> Path:
    return LISTING_DIR / "scenario.xml"


def fixture_german_bight() -> tuple[str, dict[str, str], str]:
    """(scenario document, golden FOM documents by file name, golden reference NDJSON)."""
    scenario = german_bight_path().read_text(encoding="utf-8")
    foms = {p.name: p.read_text(encoding="utf-8") for p in sorted((GERMAN_BIGHT_DIR / "fom").glob("*.xml"))}
    golden = (GERMAN_BIGHT_DIR / "reference.ndjson").read_text(encoding="utf-8")
    return scenario, foms, golden


def render_golden(scenario_document: str) -> tuple[dict[str, str], str]:
    """Golden FOM documents and reference stream derived from a scenario document."""
    from ..building_blocks.registry import builtin_registry
    from ..manager import plan_run, run_reference
    from ..scenario.xml import parse_scenario

    registry = builtin_registry()
    scenario = parse_scenario(scenario_document, registry)
    plan = plan_run(scenario, registry)
    stream = "".join(line + "\n" for line in run_reference(scenario, registry)[0])
    return dict(sorted(plan.fom_documents.items())), stream


def regenerate(directory: Path = GERMAN_BIGHT_DIR) -> None:
    """Rewrite the scenario document and golden files (maintainer tool)."""
    from ..building_blocks.registry import builtin_registry
    from ..scenario.xml import serialize_scenario

    registry = builtin_registry()
    directory.mkdir(parents=True, exist_ok=True)
    document = serialize_scenario(german_bight_scenario(), registry)
    (directory / "scenario.xml").write_text(document, encoding="utf-8", newline="\n")
    foms, stream = render_golden(document)
    fom_dir = directory / "fom"
    fom_dir.mkdir(exist_ok=True)
    for name, text in foms.items():
        (fom_dir / name).write_text(text, encoding="utf-8", newline="\n")
    (directory / "reference.ndjson").write_text(stream, encoding="utf-8", newline="\n")
    LISTING_DIR.mkdir(parents=True, exist_ok=True)
    (LISTING_DIR / "scenario.xml").write_text(
        serialize_scenario(listing_scenario(), registry), encoding="utf-8", newline="\n"
    )

