from __future__ import annotations

import json

from scensim.fixtures import (
    LISTING_SAMPLE,
    fixture_german_bight,
    german_bight_scenario,
    listing_scenario,
    render_golden,
)
from scensim.scenario import parse_scenario, serialize_scenario


def test_golden_files_are_current():
    document, foms, golden = fixture_german_bight()
    fresh_foms, fresh_stream = render_golden(document)
    assert fresh_foms == foms
    assert fresh_stream == golden


def test_fixture_document_matches_builder(registry):
    document, _, _ = fixture_german_bight()
    assert parse_scenario(document, registry) == german_bight_scenario()
    assert serialize_scenario(german_bight_scenario(), registry) == document


def test_first_line_is_container_snapshot():
    _, _, golden = fixture_german_bight()
    first = json.loads(golden.splitlines()[0])
    assert (first["step"], first["objectUUID"]) == (0, "obj-0001")
    assert first["attributes"]["vesselName"] == "Hamburg Express"
    assert first["attributes"]["position"] == {"Lat": 53.55, "Lon": 8.55, "Alt": 0.0}


def test_golden_shape():
    _, foms, golden = fixture_german_bight()
    assert sorted(foms) == ["base.xml", "obj-0001-subscriptions.xml", "obj-0001.xml",
                            "obj-0002-subscriptions.xml", "obj-0002.xml", "observer-0.xml"]
    lines = golden.splitlines()
    assert golden.endswith("\n") and "\r" not in golden
    assert json.loads(lines[-1])["step"] <= 1000
    steps = [json.loads(line)["step"] for line in lines]
    assert steps == sorted(steps)


def test_cargo_route_passes_the_sample_position():
    cargo = german_bight_scenario().simulation_objects[1]
    assert LISTING_SAMPLE in cargo.behaviour.parameters["route"].waypoints


def test_listing_scenario_has_one_observer():
    s = listing_scenario()
    assert len(s.observers) == 1 and s.simulation_iterations == 1000
