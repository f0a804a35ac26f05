"""The interpreted federate: a generic member animated by one scenario object.

``InterpretedFederate`` is an event-driven core (``start`` / ``on_message``
return the messages to send) so it can run over a real connection via
``drive`` or be stepped by a deterministic schedule explorer.

Timing: the step-k state is published stamped ``(k+1)*dt`` right after step k
executes on grant ``k*dt`` (step 0 is the initial state, published after
synchronization). Peers apply it on grant ``(k+1)*dt``, before executing step
k+1, so behaviours always see their peers' previous-step values.
"""

from __future__ import annotations

import enum
import logging
import queue
from dataclasses import dataclass, field
from typing import Any, Iterable, Protocol

from .building_blocks.behaviours import execute_behaviour
from .building_blocks.instances import ObjectView, SimulationAttribute, SimulationObjectInstance, new_instance
from .building_blocks.registry import TypeRegistry
from .errors import (
    BehaviourFault,
    ConnectFailure,
    DecodeError,
    ProtocolFault,
    ScensimError,
    UnknownAttributeUUIDError,
)
from .fom import FOMModule, render_fom_xml
from .reference_store import ReferenceStore, attribute_paths, is_same_or_descendant, subscription_paths
from .rti.messages import Kind, RtiMessage
from .rti.transport import Connection, open_connection
from .values import flatten_value, recompose, to_json

log = logging.getLogger(__name__)

FEDERATION_NAME = "scensim"
SYNC_LABEL = "readyToRun"


class Lifecycle(str, enum.Enum):
    CREATED = "Created"
    CONNECTED = "Connected"
    JOINED = "Joined"
    DECLARED = "Declared"
    REGISTERED = "Registered"
    AWAITING_SYNC = "AwaitingSync"
    RUNNING = "Running"
    RESIGNED = "Resigned"
    FAULTED = "Faulted"


class Phase(str, enum.Enum):
    AWAIT_GRANT = "AwaitGrant"
    APPLY_REFLECTIONS = "ApplyReflections"
    EXECUTE_BEHAVIOUR = "ExecuteBehaviour"
    COMMIT_AND_PUBLISH = "CommitAndPublish"


def step_time(step: int, dt: float) -> float:
    """Logical time of a step; computed from the index so every member agrees bit for bit."""
    return step * dt


@dataclass
class FederateConfig:
    federate_name: str
    instance: SimulationObjectInstance
    fom_module: FOMModule
    reference_store: ReferenceStore
    step_size: float
    total_iterations: int
    rti_address: Any = None
    subscription_module: FOMModule | None = None
    federation: str = FEDERATION_NAME
    sync_label: str = SYNC_LABEL
    idle_timeout: float | None = 120.0
    # Test hook: drop the connection without resigning when this step is granted.
    kill_at_step: int | None = None

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if self.total_iterations < 1:
            raise ValueError("total_iterations must be >= 1")


@dataclass
class FederateReport:
    federate_name: str
    object_uuid: str | None
    steps_executed: int
    granted_time: float
    state: str
    error: str | None = None
    final_attribute_snapshot: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None and self.state == Lifecycle.RESIGNED.value

    def to_dict(self) -> dict[str, Any]:
        return {
            "federateName": self.federate_name,
            "objectUUID": self.object_uuid,
            "stepsExecuted": self.steps_executed,
            "grantedTime": self.granted_time,
            "state": self.state,
            "error": self.error,
            "finalAttributeSnapshot": self.final_attribute_snapshot,
        }


class ObjectInstanceCache:
    """Discovered remote objects, grouped by the subscribed class path that matched them."""

    def __init__(self, subscribed_paths: Iterable[str] = ()):
        self._by_class: dict[str, list[SimulationObjectInstance]] = {p: [] for p in subscribed_paths}

    def add(self, class_path: str, obj: SimulationObjectInstance) -> None:
        for sub, bucket in self._by_class.items():
            if is_same_or_descendant(class_path, sub) and all(o is not obj for o in bucket):
                bucket.append(obj)
                bucket.sort(key=lambda o: o.uuid)

    def get(self, class_path: str) -> list[SimulationObjectInstance]:
        return list(self._by_class.get(class_path, ()))

    def objects(self) -> list[SimulationObjectInstance]:
        seen: dict[str, SimulationObjectInstance] = {}
        for bucket in self._by_class.values():
            for o in bucket:
                seen.setdefault(o.uuid, o)
        return [seen[u] for u in sorted(seen)]

    def views(self) -> dict[str, tuple[ObjectView, ...]]:
        return {p: tuple(o.view() for o in bucket) for p, bucket in self._by_class.items()}


def _leaf_suffix(obj: SimulationObjectInstance, attr: SimulationAttribute, path: str) -> str:
    owner = ".".join(["HLAObjectRoot", *obj.lineage[: obj.lineage.index(attr.declaring_class) + 1]])
    leaf = path[len(owner) + 1:]
    return "" if leaf == attr.name else leaf[len(attr.name) + 1:]


def encode_attribute(obj: SimulationObjectInstance, attr: SimulationAttribute) -> dict[str, Any]:
    """Full wire path -> JSON scalar for one attribute's current value."""
    owner = ".".join(["HLAObjectRoot", *obj.lineage[: obj.lineage.index(attr.declaring_class) + 1]])
    return {f"{owner}.{k}": v for k, v in flatten_value(attr.name, attr.data_type, attr.value).items()}


def apply_reflection(cache: ObjectInstanceCache, store: ReferenceStore, msg: RtiMessage) -> ObjectInstanceCache:
    """Decode a reflection into the cached remote instance (partial updates allowed)."""
    uuid = msg.payload.get("objectUUID")
    values = msg.payload.get("values", {})
    if uuid == store.simulation_object.uuid:
        raise ProtocolFault(f"received a reflection of our own object {uuid}")
    obj = store.get_simulation_object_by_uuid(uuid)
    grouped: dict[str, dict[str, Any]] = {}
    attrs: dict[str, SimulationAttribute] = {}
    for path in sorted(values):
        attr = store.resolve_attribute(uuid, path)
        attrs[attr.name] = attr
        grouped.setdefault(attr.name, {})[_leaf_suffix(obj, attr, path)] = values[path]
    decoded = {name: recompose(attrs[name].data_type, attrs[name].value, leaves) for name, leaves in grouped.items()}
    for name, value in decoded.items():
        try:
            attrs[name].value = value
        except TypeError as exc:
            raise DecodeError(str(exc)) from None
    return cache


def commit_updates(
    instance: SimulationObjectInstance, store: ReferenceStore, updates: dict[str, Any]
) -> dict[str, Any]:
    """Apply proposed values, then return the publishable subset as wire path -> scalar."""
    targets: list[tuple[SimulationAttribute, Any]] = []
    for uuid, value in updates.items():
        attr = instance.attribute_by_uuid(uuid)
        if attr is None or store.uuid_to_simulation_attribute.get(uuid) is not attr:
            raise UnknownAttributeUUIDError(f"{uuid!r} is not an attribute of {instance.uuid}")
        targets.append((attr, value))
    for attr, value in targets:
        attr.value = value
    published: dict[str, Any] = {}
    touched = {id(a) for a, _ in targets}
    for attr in instance.attributes.values():
        if id(attr) in touched and attr.publish:
            published.update(encode_attribute(instance, attr))
    return published


class Member(Protocol):
    killed: bool

    @property
    def finished(self) -> bool: ...

    def start(self) -> list[RtiMessage]: ...

    def on_message(self, msg: RtiMessage) -> list[RtiMessage]: ...

    def on_disconnect(self) -> None: ...

    def fail(self, reason: str) -> None: ...


class InterpretedFederate:
    def __init__(self, cfg: FederateConfig, registry: TypeRegistry):
        self.cfg = cfg
        self.registry = registry
        self.name = cfg.federate_name
        self.instance = cfg.instance
        self.store = cfg.reference_store
        self.state = Lifecycle.CREATED
        self.phase: Phase | None = None
        self.subscriptions = [subscription_paths(registry, oc) for oc in self.instance.observed_classes]
        self.cache = ObjectInstanceCache(p for p, _ in self.subscriptions)
        self.steps_executed = 0
        self.granted_time = 0.0
        self.requested: float | None = None
        self.error: str | None = None
        self.killed = False
        self._inbox: list[RtiMessage] = []
        # Observations for property checks.
        self.grants: list[float] = []
        self.tar_count = 0
        self.late_reflections: list[tuple[float, float]] = []
        self.applied: list[tuple[float, float]] = []

    # -- helpers ----------------------------------------------------------------

    @property
    def finished(self) -> bool:
        return self.state in (Lifecycle.RESIGNED, Lifecycle.FAULTED) or self.killed

    def _msg(self, kind: Kind, payload: dict | None = None, timestamp: float | None = None) -> RtiMessage:
        return RtiMessage(kind, self.name, payload or {}, timestamp)

    def _published_paths(self) -> list[str]:
        return sorted(p for a in self.instance.attributes.values() if a.publish for p in attribute_paths(self.instance, a))

    def _full_publish(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for a in self.instance.attributes.values():
            if a.publish:
                out.update(encode_attribute(self.instance, a))
        return out

    def _update(self, values: dict[str, Any], t: float) -> list[RtiMessage]:
        if not values:
            return []
        payload = {"objectUUID": self.instance.uuid, "values": {k: values[k] for k in sorted(values)}}
        return [self._msg(Kind.UPDATE_ATTRIBUTE_VALUES, payload, t)]

    def _tar(self, t: float) -> RtiMessage:
        self.requested = t
        self.tar_count += 1
        self.phase = Phase.AWAIT_GRANT
        return self._msg(Kind.TIME_ADVANCE_REQUEST, timestamp=t)

    def fail(self, reason: str) -> None:
        if self.error is None:
            self.error = reason
        self.state = Lifecycle.FAULTED

    # -- lifecycle --------------------------------------------------------------

    def connected(self) -> None:
        self.state = Lifecycle.CONNECTED

    def start(self) -> list[RtiMessage]:
        out = [
            self._msg(
                Kind.JOIN_FEDERATION,
                {"federation": self.cfg.federation, "federateType": self.instance.concrete_type, "timeManaged": True},
            ),
            self._msg(Kind.FOM_MODULE_OFFER, {"xml": render_fom_xml(self.cfg.fom_module)}),
        ]
        if self.cfg.subscription_module is not None:
            out.append(self._msg(Kind.FOM_MODULE_OFFER, {"xml": render_fom_xml(self.cfg.subscription_module)}))
        self.state = Lifecycle.JOINED
        out.append(
            self._msg(
                Kind.PUBLISH_OBJECT_CLASS,
                {"classPath": self.instance.class_path, "attributePaths": self._published_paths()},
            )
        )
        for class_path, attrs in self.subscriptions:
            out.append(
                self._msg(Kind.SUBSCRIBE_OBJECT_CLASS_ATTRIBUTES, {"classPath": class_path, "attributePaths": list(attrs)})
            )
        self.state = Lifecycle.DECLARED
        out.append(
            self._msg(
                Kind.REGISTER_OBJECT_INSTANCE,
                {"objectUUID": self.instance.uuid, "classPath": self.instance.class_path},
            )
        )
        self.state = Lifecycle.REGISTERED
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
        except BehaviourFault as exc:
            self.fail(f"BehaviourFault: {exc}")
            return [self._msg(Kind.RESIGN_FEDERATION, {"error": self.error})]
        except ScensimError as exc:
            self.fail(f"{type(exc).__name__}: {exc}")
            return [self._msg(Kind.RESIGN_FEDERATION, {"error": self.error})]

    def _on_message(self, msg: RtiMessage) -> list[RtiMessage]:
        kind = msg.kind
        if kind is Kind.FAULT:
            code = msg.payload.get("code")
            self.fail(f"ProtocolFault: {code}: {msg.payload.get('reason')}")
            # Someone else broke the run; leave politely. If we were ejected there is nothing to leave.
            return [self._msg(Kind.RESIGN_FEDERATION, {"error": None})] if code == "MemberFault" else []
        if kind is Kind.ANNOUNCE_SYNC_POINT:
            return [self._msg(Kind.SYNC_POINT_ACHIEVED, {"label": msg.payload["label"]})]
        if kind is Kind.FEDERATION_SYNCHRONIZED:
            if msg.payload.get("label") != self.cfg.sync_label or self.state is not Lifecycle.AWAITING_SYNC:
                return []
            self.state = Lifecycle.RUNNING
            dt = self.cfg.step_size
            return [*self._update(self._full_publish(), step_time(1, dt)), self._tar(step_time(1, dt))]
        if kind is Kind.DISCOVER_OBJECT_INSTANCE:
            self._discover(msg)
            return []
        if kind is Kind.REFLECT_ATTRIBUTE_VALUES:
            if msg.timestamp <= self.granted_time and self.grants:
                self.late_reflections.append((msg.timestamp, self.granted_time))
            self._inbox.append(msg)
            return []
        if kind is Kind.TIME_ADVANCE_GRANT:
            return self._on_grant(msg.timestamp)
        raise ProtocolFault(f"unexpected {kind.value} in state {self.state.value}")

    def _discover(self, msg: RtiMessage) -> None:
        uuid = msg.payload["objectUUID"]
        class_path = msg.payload["classPath"]
        if uuid in self.store.uuid_to_simulation_object:
            return
        shell = new_instance(self.registry, class_path.rsplit(".", 1)[-1], uuid)
        self.store.register_discovered(class_path, shell)
        self.cache.add(class_path, shell)

    def _on_grant(self, t: float) -> list[RtiMessage]:
        if self.state is not Lifecycle.RUNNING or self.requested is None or t != self.requested:
            raise ProtocolFault(f"unexpected grant {t} (requested {self.requested})")
        if self.grants and t <= self.grants[-1]:
            raise ProtocolFault(f"grant {t} does not advance past {self.grants[-1]}")
        self.grants.append(t)
        self.granted_time = t
        self.requested = None
        step = self.steps_executed + 1
        if self.cfg.kill_at_step is not None and step >= self.cfg.kill_at_step:
            self.killed = True
            return []

        self.phase = Phase.APPLY_REFLECTIONS
        due = [m for m in self._inbox if m.timestamp <= t]
        self._inbox = [m for m in self._inbox if m.timestamp > t]
        for m in due:
            apply_reflection(self.cache, self.store, m)
            self.applied.append((m.timestamp, t))

        self.phase = Phase.EXECUTE_BEHAVIOUR
        dt = self.cfg.step_size
        updates = {}
        if self.instance.behaviour is not None:
            updates = execute_behaviour(self.instance.behaviour, dt, self.instance, self.cache.views())

        self.phase = Phase.COMMIT_AND_PUBLISH
        published = commit_updates(self.instance, self.store, updates)
        self.steps_executed = step
        out = self._update(published, step_time(step + 1, dt))
        if step < self.cfg.total_iterations:
            out.append(self._tar(step_time(step + 1, dt)))
        else:
            self.phase = None
            self.state = Lifecycle.RESIGNED
            out.append(self._msg(Kind.RESIGN_FEDERATION, {"error": None}))
        return out

    def report(self) -> FederateReport:
        return FederateReport(
            self.name,
            self.instance.uuid,
            self.steps_executed,
            self.granted_time,
            Lifecycle.FAULTED.value if self.killed else self.state.value,
            self.error if not self.killed else "killed by fault-injection hook",
            {n: to_json(a.value) for n, a in self.instance.attributes.items()},
        )


def drive(member: Member, conn: Connection, idle_timeout: float | None = None) -> None:
    """Pump messages between ``member`` and ``conn`` until the member is done."""
    try:
        for m in member.start():
            conn.send(m)
        while not member.finished:
            try:
                msg = conn.recv(timeout=idle_timeout)
            except queue.Empty:
                member.fail(f"ProtocolFault: no message from the coordinator for {idle_timeout} s")
                break
            if msg is None:
                member.on_disconnect()
                break
            for m in member.on_message(msg):
                conn.send(m)
    except ConnectFailure as exc:
        member.fail(f"ConnectFailure: {exc}")
    finally:
        conn.close()


def run_federate(cfg: FederateConfig, registry: TypeRegistry, connection: Connection | None = None) -> FederateReport:
    """Run the full lifecycle over a connection and return the exit report."""
    fed = InterpretedFederate(cfg, registry)
    try:
        conn = connection or open_connection(cfg.rti_address)
    except ConnectFailure as exc:
        fed.fail(f"ConnectFailure: {exc}")
        return fed.report()
    fed.connected()
    drive(fed, conn, cfg.idle_timeout)
    return fed.report()
