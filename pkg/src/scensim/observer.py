"""Observer federate: subscribes to declared classes and streams records.

Records are emitted once per granted step. Step 0 is a full snapshot of every
tracked object; later steps carry only attributes whose value changed, and
only for objects with at least one change. Records within a step are sorted
by object uuid.
"""

from __future__ import annotations

import json
import logging
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO

from .building_blocks.instances import SimulationObjectInstance, new_instance
from .building_blocks.registry import TypeRegistry
from .errors import ConnectFailure, ProtocolFault, ScensimError, SinkFailure, UnknownAttributePathError, UnknownObjectError
from .federate import FEDERATION_NAME, SYNC_LABEL, Lifecycle, drive, step_time
from .fom import generate_subscription_module, render_fom_xml
from .reference_store import attribute_paths, subscription_paths
from .rti.messages import Kind, RtiMessage
from .rti.transport import Connection, open_connection
from .scenario.model import FileSink, ObserverConfig, StdoutSink, WebSocketSink
from .values import AttributeValue, recompose, to_json

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObserverRecord:
    step: int
    time: float
    object_uuid: str
    class_path: str
    attributes: dict[str, AttributeValue] = field(default_factory=dict)


def encode_record(r: ObserverRecord) -> str:
    """One-line JSON with a fixed key order and sorted attribute names."""
    doc = {
        "step": r.step,
        "time": r.time,
        "objectUUID": r.object_uuid,
        "classPath": r.class_path,
        "attributes": {k: to_json(r.attributes[k]) for k in sorted(r.attributes)},
    }
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


class ChangeTracker:
    """Latest known values per object and the change-detection emission rule."""

    def __init__(self):
        self.class_paths: dict[str, str] = {}
        self.current: dict[str, dict[str, AttributeValue]] = {}
        self._emitted: dict[str, dict[str, AttributeValue]] = {}

    def track(self, uuid: str, class_path: str) -> None:
        self.class_paths.setdefault(uuid, class_path)
        self.current.setdefault(uuid, {})

    def set(self, uuid: str, name: str, value: AttributeValue) -> None:
        self.current[uuid][name] = value

    def records(self, step: int, time: float) -> list[ObserverRecord]:
        out = []
        for uuid in sorted(self.current):
            now = self.current[uuid]
            before = self._emitted.setdefault(uuid, {})
            if step == 0:
                changed = dict(now)
            else:
                changed = {k: v for k, v in now.items() if k not in before or before[k] != v}
                if not changed:
                    continue
            before.update(changed)
            out.append(ObserverRecord(step, time, uuid, self.class_paths[uuid], changed))
        return out


# -- sinks -------------------------------------------------------------------------


class RecordSink:
    def write(self, line: str) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


class ListSink(RecordSink):
    def __init__(self):
        self.lines: list[str] = []

    def write(self, line: str) -> None:
        self.lines.append(line)


class StreamSink(RecordSink):
    def __init__(self, stream: TextIO | None = None):
        self.stream = stream or sys.stdout

    def write(self, line: str) -> None:
        try:
            self.stream.write(line + "\n")
            self.stream.flush()
        except (OSError, ValueError) as exc:
            raise SinkFailure(f"stdout sink: {exc}") from None


class NdjsonFileSink(RecordSink):
    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        except OSError as exc:
            raise SinkFailure(f"cannot open {self.path}: {exc}") from None

    def write(self, line: str) -> None:
        try:
            self._fh.write(line + "\n")
        except (OSError, ValueError) as exc:
            raise SinkFailure(f"cannot write {self.path}: {exc}") from None

    def close(self) -> None:
        self._fh.close()


class WebSocketBroadcastSink(RecordSink):
    """Sends every line as one text frame to all connected clients; drops lines when nobody listens."""

    def __init__(self, host: str, port: int):
        from websockets.sync.server import serve

        self._clients: set = set()
        self._lock = threading.Lock()
        try:
            self._server = serve(self._handler, host, port, compression=None)
        except OSError as exc:
            raise SinkFailure(f"cannot listen on {host}:{port}: {exc}") from None
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever, name="observer-ws", daemon=True)
        self._thread.start()

    def _handler(self, ws) -> None:
        with self._lock:
            self._clients.add(ws)
        try:
            for _ in ws:
                pass
        finally:
            with self._lock:
                self._clients.discard(ws)

    @property
    def client_count(self) -> int:
        with self._lock:
            return len(self._clients)

    def write(self, line: str) -> None:
        from websockets.exceptions import ConnectionClosed

        with self._lock:
            clients = list(self._clients)
        for ws in clients:
            try:
                ws.send(line)
            except ConnectionClosed:
                with self._lock:
                    self._clients.discard(ws)

    def close(self) -> None:
        self._server.shutdown()
        self._thread.join(timeout=5)


def open_sink(sink, base_dir: str | Path | None = None) -> RecordSink:
    """Instantiate the configured sink; relative file paths resolve against ``base_dir``."""
    if isinstance(sink, StdoutSink):
        return StreamSink()
    if isinstance(sink, FileSink):
        path = Path(sink.path)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return NdjsonFileSink(path)
    if isinstance(sink, WebSocketSink):
        return WebSocketBroadcastSink(sink.host, sink.port)
    raise TypeError(f"unknown sink {sink!r}")


# -- the federate -----------------------------------------------------------------


@dataclass
class ObserverReport:
    federate_name: str
    steps_emitted: int
    records_emitted: int
    granted_time: float
    state: str
    error: str | None = None
    degraded: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "federateName": self.federate_name,
            "stepsEmitted": self.steps_emitted,
            "recordsEmitted": self.records_emitted,
            "grantedTime": self.granted_time,
            "state": self.state,
            "error": self.error,
            "degraded": self.degraded,
        }


class ObserverFederate:
    """Time-managed member with no object and no behaviour."""

    def __init__(
        self,
        name: str,
        config: ObserverConfig,
        registry: TypeRegistry,
        total_iterations: int,
        sinks: list[RecordSink],
        federation: str = FEDERATION_NAME,
        sync_label: str = SYNC_LABEL,
    ):
        self.name = name
        self.config = config
        self.registry = registry
        self.total_iterations = total_iterations
        self.sinks = sinks
        self.federation = federation
        self.sync_label = sync_label
        self.step_size = config.time_step_size
        self.subscriptions = [subscription_paths(registry, oc) for oc in config.observed_classes]
        self.tracker = ChangeTracker()
        self._objects: dict[str, SimulationObjectInstance] = {}
        self._paths: dict[str, dict[str, tuple[str, str]]] = {}  # uuid -> path -> (attr name, leaf suffix)
        self._inbox: list[RtiMessage] = []
        self.state = Lifecycle.CREATED
        self.granted_time = 0.0
        self.grants: list[float] = []
        self.tar_count = 0
        self.late_reflections: list[tuple[float, float]] = []
        self.requested: float | None = None
        self.steps_emitted = 0
        self.records_emitted = 0
        self.error: str | None = None
        self.degraded = False
        self.killed = False

    @property
    def finished(self) -> bool:
        return self.state in (Lifecycle.RESIGNED, Lifecycle.FAULTED)

    def _msg(self, kind: Kind, payload: dict | None = None, timestamp: float | None = None) -> RtiMessage:
        return RtiMessage(kind, self.name, payload or {}, timestamp)

    def _tar(self, t: float) -> RtiMessage:
        self.requested = t
        self.tar_count += 1
        return self._msg(Kind.TIME_ADVANCE_REQUEST, timestamp=t)

    def fail(self, reason: str) -> None:
        if self.error is None:
            self.error = reason
        self.state = Lifecycle.FAULTED

    def connected(self) -> None:
        self.state = Lifecycle.CONNECTED

    def start(self) -> list[RtiMessage]:
        module = generate_subscription_module(self.name, [oc.type for oc in self.config.observed_classes], self.registry)
        out = [
            self._msg(Kind.JOIN_FEDERATION, {"federation": self.federation, "federateType": "observer", "timeManaged": True}),
            self._msg(Kind.FOM_MODULE_OFFER, {"xml": render_fom_xml(module)}),
        ]
        self.state = Lifecycle.JOINED
        for class_path, attrs in self.subscriptions:
            out.append(
                self._msg(Kind.SUBSCRIBE_OBJECT_CLASS_ATTRIBUTES, {"classPath": class_path, "attributePaths": list(attrs)})
            )
        self.state = Lifecycle.AWAITING_SYNC
        return out

    def on_disconnect(self) -> None:
        if not self.finished:
            self.fail("ProtocolFault: coordinator closed the connection")

    def on_message(self, msg: RtiMessage) -> list[RtiMessage]:
        if self.finished:
            return []
        try:
            return self._on_message(msg)
        except SinkFailure as exc:
            # The stream is lost but the simulation is not: leave quietly and mark the run degraded.
            self.error = f"SinkFailure: {exc}"
            self.degraded = True
            self.state = Lifecycle.RESIGNED
            return [self._msg(Kind.RESIGN_FEDERATION, {"error": None})]
        except ScensimError as exc:
            self.fail(f"{type(exc).__name__}: {exc}")
            return [self._msg(Kind.RESIGN_FEDERATION, {"error": self.error})]

    def _on_message(self, msg: RtiMessage) -> list[RtiMessage]:
        kind = msg.kind
        if kind is Kind.FAULT:
            code = msg.payload.get("code")
            self.fail(f"ProtocolFault: {code}: {msg.payload.get('reason')}")
            return [self._msg(Kind.RESIGN_FEDERATION, {"error": None})] if code == "MemberFault" else []
        if kind is Kind.ANNOUNCE_SYNC_POINT:
            return [self._msg(Kind.SYNC_POINT_ACHIEVED, {"label": msg.payload["label"]})]
        if kind is Kind.FEDERATION_SYNCHRONIZED:
            if msg.payload.get("label") != self.sync_label or self.state is not Lifecycle.AWAITING_SYNC:
                return []
            self.state = Lifecycle.RUNNING
            return [self._tar(step_time(1, self.step_size))]
        if kind is Kind.DISCOVER_OBJECT_INSTANCE:
            self._discover(msg.payload["objectUUID"], msg.payload["classPath"])
            return []
        if kind is Kind.REFLECT_ATTRIBUTE_VALUES:
            if self.grants and msg.timestamp <= self.granted_time:
                self.late_reflections.append((msg.timestamp, self.granted_time))
            self._inbox.append(msg)
            return []
        if kind is Kind.TIME_ADVANCE_GRANT:
            return self._on_grant(msg.timestamp)
        raise ProtocolFault(f"unexpected {kind.value} in state {self.state.value}")

    def _discover(self, uuid: str, class_path: str) -> None:
        if uuid in self._objects:
            return
        shell = new_instance(self.registry, class_path.rsplit(".", 1)[-1], uuid)
        self._objects[uuid] = shell
        paths: dict[str, tuple[str, str]] = {}
        for attr in shell.attributes.values():
            for p in attribute_paths(shell, attr):
                suffix = "" if p.endswith("." + attr.name) else p.rsplit(".", 1)[1]
                paths[p] = (attr.name, suffix)
        self._paths[uuid] = paths
        self.tracker.track(uuid, class_path)

    def _apply(self, msg: RtiMessage) -> None:
        uuid = msg.payload.get("objectUUID")
        if uuid not in self._objects:
            raise UnknownObjectError(f"reflection for undiscovered object {uuid!r}")
        obj, paths = self._objects[uuid], self._paths[uuid]
        grouped: dict[str, dict[str, Any]] = {}
        for path, raw in sorted(msg.payload.get("values", {}).items()):
            if path not in paths:
                raise UnknownAttributePathError(f"{uuid} has no attribute at {path!r}")
            name, suffix = paths[path]
            grouped.setdefault(name, {})[suffix] = raw
        for name, leaves in grouped.items():
            attr = obj.attributes[name]
            value = recompose(attr.data_type, attr.value, leaves)
            attr.value = value
            self.tracker.set(uuid, name, value)

    def _on_grant(self, t: float) -> list[RtiMessage]:
        if self.state is not Lifecycle.RUNNING or t != self.requested:
            raise ProtocolFault(f"unexpected grant {t} (requested {self.requested})")
        self.grants.append(t)
        self.granted_time = t
        self.requested = None
        due = [m for m in self._inbox if m.timestamp <= t]
        self._inbox = [m for m in self._inbox if m.timestamp > t]
        for m in due:
            self._apply(m)
        step = self.steps_emitted
        for record in self.tracker.records(step, step_time(step, self.step_size)):
            line = encode_record(record)
            for sink in self.sinks:
                sink.write(line)
            self.records_emitted += 1
        self.steps_emitted += 1
        if step < self.total_iterations:
            return [self._tar(step_time(step + 2, self.step_size))]
        self.state = Lifecycle.RESIGNED
        return [self._msg(Kind.RESIGN_FEDERATION, {"error": None})]

    def report(self) -> ObserverReport:
        return ObserverReport(
            self.name, self.steps_emitted, self.records_emitted, self.granted_time, self.state.value, self.error, self.degraded
        )


def run_observer(
    name: str,
    config: ObserverConfig,
    registry: TypeRegistry,
    total_iterations: int,
    rti_address,
    sinks: list[RecordSink],
    connection: Connection | None = None,
    idle_timeout: float | None = 120.0,
) -> ObserverReport:
    obs = ObserverFederate(name, config, registry, total_iterations, sinks)
    try:
        try:
            conn = connection or open_connection(rti_address)
        except ConnectFailure as exc:
            obs.fail(f"ConnectFailure: {exc}")
            return obs.report()
        obs.connected()
        drive(obs, conn, idle_timeout)
    finally:
        for s in sinks:
            try:
                s.close()
            except Exception:  # pragma: no cover - best effort
                log.exception("closing sink failed")
    return obs.report()
