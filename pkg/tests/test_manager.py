from __future__ import annotations

import dataclasses
import json
import threading

import pytest

from conftest import LIBRARY, three_vessel_scenario, vessel
from scensim.errors import ScenarioError, UnsupportedConfigurationError
from scensim.fixtures import german_bight_path, german_bight_scenario
from scensim.manager import (
    check_runnable,
    load_scenario,
    plan_run,
    run_distributed,
    run_reference,
)
from scensim.scenario import Scenario

ROUTE = [(53.55, 8.55), (53.60, 8.55)]


def test_plan_for_german_bight(tmp_path):
    plan = plan_run(german_bight_path(), output_dir=tmp_path)
    assert plan.member_names == ["master", "fed-obj-0001", "fed-obj-0002", "observer-0"]
    assert plan.master_config.members == tuple(plan.member_names)
    assert sorted(p.name for p in (tmp_path / "fom").iterdir()) == sorted(plan.fom_documents)
    assert plan.step_size == 1.0


def test_plan_for_one_object_without_observers():
    plan = plan_run(Scenario(LIBRARY, 3, (vessel("containerShip", "A", ROUTE, 1.0),), ()))
    assert plan.member_names == ["master", "fed-obj-0001"]
    assert "obj-0001-subscriptions.xml" not in plan.fom_documents


def test_invalid_document_is_reported(tmp_path):
    bad = tmp_path / "bad.xml"
    bad.write_text("<scenario>", encoding="utf-8")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_mixed_step_sizes_are_unsupported():
    s = Scenario(LIBRARY, 3, (vessel("containerShip", "A", ROUTE, 1.0), vessel("containerShip", "B", ROUTE, 1.0, step=0.5)), ())
    report = check_runnable(s)
    assert [f.code for f in report.findings] == ["UnsupportedConfiguration"]
    assert report.findings[0].path == "simulationObjects[1].timeStepSize"
    with pytest.raises(UnsupportedConfigurationError):
        plan_run(s)


def test_reference_with_zero_speed_emits_only_the_snapshot():
    s = three_vessel_scenario(20)
    still = tuple(dataclasses.replace(o, attribute_specs={**o.attribute_specs,
                                                            "speed": dataclasses.replace(o.attribute_specs["speed"], value=0.0)})
                  for o in s.simulation_objects)
    (stream,) = run_reference(dataclasses.replace(s, simulation_objects=still))
    assert [json.loads(line)["step"] for line in stream] == [0, 0, 0]


def test_reference_record_count_is_bounded():
    (stream,) = run_reference(german_bight_scenario(30))
    assert len(stream) <= 2 * 31
    assert json.loads(stream[0]) == {**json.loads(stream[0]), "step": 0, "objectUUID": "obj-0001"}


def test_killed_federate_aborts_without_hanging(tmp_path):
    plan = plan_run(three_vessel_scenario(30), output_dir=tmp_path)
    result = {}
    t = threading.Thread(target=lambda: result.setdefault("r", run_distributed(plan, kill={"fed-obj-0001": 5})))
    t.start()
    t.join(timeout=60)
    assert not t.is_alive(), "run did not terminate"
    report = result["r"]
    assert report.status == "aborted"
    assert report.federates["fed-obj-0001"].steps_executed == 4
    assert all(r.steps_executed < 30 for r in report.federates.values())


def test_run_writes_report_and_streams(tmp_path):
    report = run_distributed(plan_run(german_bight_scenario(20), output_dir=tmp_path))
    assert report.ok
    doc = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert doc["status"] == "ok"
    assert sorted(p.name for p in (tmp_path / "federates").iterdir()) == [
        "fed-obj-0001.json", "fed-obj-0002.json", "observer-0.json"]
    lines = (tmp_path / "observer-0.ndjson").read_text(encoding="utf-8").splitlines()
    assert lines == run_reference(german_bight_scenario(20))[0]


def test_run_needs_output_directory():
    with pytest.raises(ValueError):
        run_distributed(plan_run(three_vessel_scenario(2)))
