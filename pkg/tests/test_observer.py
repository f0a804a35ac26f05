from __future__ import annotations

import json
import time

import pytest
from websockets.sync.client import connect

from conftest import three_vessel_scenario
from scensim.errors import SinkFailure
from scensim.manager import plan_run, run_distributed
from scensim.observer import (
    ChangeTracker,
    ListSink,
    NdjsonFileSink,
    ObserverRecord,
    RecordSink,
    WebSocketBroadcastSink,
    encode_record,
    open_sink,
)
from scensim.scenario import FileSink
from scensim.values import Position


def test_record_key_order_and_position_keys():
    r = ObserverRecord(2, 2.0, "obj-0001", "A.B", {"speed": 3.0, "position": Position(53.5, 8.1, 0.0)})
    line = encode_record(r)
    assert line == ('{"step":2,"time":2.0,"objectUUID":"obj-0001","classPath":"A.B",'
                    '"attributes":{"position":{"Lat":53.5,"Lon":8.1,"Alt":0.0},"speed":3.0}}')
    assert list(json.loads(line)) == ["step", "time", "objectUUID", "classPath", "attributes"]


def test_record_with_no_attributes_is_stable():
    r = ObserverRecord(0, 0.0, "obj-0001", "A.B")
    assert encode_record(r) == encode_record(ObserverRecord(0, 0.0, "obj-0001", "A.B", {}))
    assert json.loads(encode_record(r))["attributes"] == {}


def test_non_ascii_is_kept_verbatim():
    assert "Größe" in encode_record(ObserverRecord(0, 0.0, "o", "c", {"vesselName": "Größe"}))


def test_change_tracker_emits_only_changes():
    t = ChangeTracker()
    t.track("obj-0002", "C")
    t.track("obj-0001", "C")
    t.set("obj-0001", "speed", 1.0)
    t.set("obj-0002", "speed", 2.0)
    assert [r.object_uuid for r in t.records(0, 0.0)] == ["obj-0001", "obj-0002"]
    t.set("obj-0001", "speed", 1.0)
    assert t.records(1, 1.0) == []
    t.set("obj-0002", "speed", 2.5)
    t.set("obj-0002", "vesselName", "x")
    (r,) = t.records(2, 2.0)
    assert (r.object_uuid, r.attributes) == ("obj-0002", {"speed": 2.5, "vesselName": "x"})


def test_step_zero_snapshot_includes_unreflected_objects():
    t = ChangeTracker()
    t.track("obj-0001", "C")
    assert t.records(0, 0.0) == [ObserverRecord(0, 0.0, "obj-0001", "C", {})]


def test_file_sink_writes_lf_utf8(tmp_path):
    sink = open_sink(FileSink("streams/out.ndjson"), tmp_path)
    assert isinstance(sink, NdjsonFileSink)
    sink.write('{"a":"ä"}')
    sink.write("{}")
    sink.close()
    assert (tmp_path / "streams/out.ndjson").read_bytes() == '{"a":"ä"}\n{}\n'.encode("utf-8")


def test_file_sink_failure(tmp_path):
    (tmp_path / "blocked").write_text("")
    with pytest.raises(SinkFailure):
        NdjsonFileSink(tmp_path / "blocked" / "out.ndjson")


def test_websocket_sink_broadcasts_lines():
    sink = WebSocketBroadcastSink("127.0.0.1", 0)
    try:
        sink.write("dropped: nobody is listening")
        with connect(f"ws://127.0.0.1:{sink.port}") as client:
            deadline = time.monotonic() + 5
            while sink.client_count == 0 and time.monotonic() < deadline:
                time.sleep(0.01)
            sink.write('{"step":0}')
            assert client.recv(timeout=5) == '{"step":0}'
    finally:
        sink.close()


def test_websocket_port_in_use():
    first = WebSocketBroadcastSink("127.0.0.1", 0)
    try:
        with pytest.raises(SinkFailure):
            WebSocketBroadcastSink("127.0.0.1", first.port)
    finally:
        first.close()


class _Breaks(RecordSink):
    def __init__(self, after):
        self.after, self.lines = after, 0

    def write(self, line):
        self.lines += 1
        if self.lines > self.after:
            raise SinkFailure("disk full")


def test_sink_failure_degrades_but_run_completes(tmp_path):
    plan = plan_run(three_vessel_scenario(10), output_dir=tmp_path)
    report = run_distributed(plan, observer_sinks={"observer-0": [_Breaks(4)]})
    assert report.status == "degraded"
    assert all(r.ok and r.steps_executed == 10 for r in report.federates.values())
    assert report.observers["observer-0"].degraded


def test_observer_stream_matches_list_sink(tmp_path):
    plan = plan_run(three_vessel_scenario(5), output_dir=tmp_path)
    sink = ListSink()
    report = run_distributed(plan, observer_sinks={"observer-0": [sink]})
    assert report.ok
    steps = [json.loads(line)["step"] for line in sink.lines]
    assert steps == sorted(steps) and steps[:3] == [0, 0, 0]
    assert report.observers["observer-0"].records_emitted == len(sink.lines)
