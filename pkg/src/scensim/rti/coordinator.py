"""Central coordinator: one writer to the federation state.

``Coordinator`` is a pure state machine. ``handle(link_id, msg)`` returns the
messages to send as ``(link_id, RtiMessage)`` pairs, so it can be driven by the
threaded server below or by a single-threaded schedule explorer in tests.

Processing order is arrival order (per-link FIFO is preserved by every
transport). Reflections are not forwarded immediately to time-managed
subscribers: they are buffered and flushed, sorted by
``(timestamp, owner, objectUUID)``, right before the grant that covers them.
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass, field
from typing import Iterable

from ..errors import FomError
from ..fom import iter_classes, parse_fom_xml
from ..reference_store import is_same_or_descendant
from ..values import DataType
from .messages import RTI_SENDER, FrameError, Kind, RtiMessage
from .transport import Acceptor

log = logging.getLogger(__name__)

Out = tuple[int, RtiMessage]


class Violation(Exception):
    """A message that is illegal in the current state."""

    def __init__(self, code: str, reason: str):
        super().__init__(f"{code}: {reason}")
        self.code = code
        self.reason = reason


@dataclass
class PendingReflect:
    timestamp: float
    owner: str
    object_uuid: str
    class_path: str
    values: dict

    def sort_key(self):
        return (self.timestamp, self.owner, self.object_uuid)


@dataclass
class Member:
    name: str
    link_id: int
    federate_type: str
    time_managed: bool
    fom_modules: list[str] = field(default_factory=list)
    published: dict[str, set[str]] = field(default_factory=dict)
    subscriptions: dict[str, set[str]] = field(default_factory=dict)
    pending_tar: float | None = None
    granted_time: float = 0.0
    discovered: set[str] = field(default_factory=set)
    reflect_buffer: list[PendingReflect] = field(default_factory=list)

    def subscribed_attributes(self, class_path: str) -> set[str] | None:
        """Union of attribute sets over subscriptions covering ``class_path``; None if none cover it."""
        out: set[str] | None = None
        for sub, attrs in self.subscriptions.items():
            if is_same_or_descendant(class_path, sub):
                out = (out or set()) | attrs
        return out


@dataclass
class SyncPoint:
    label: str
    required: set[str] | None  # None: every member, including later joiners
    announced: set[str] = field(default_factory=set)
    achieved: set[str] = field(default_factory=set)
    done: bool = False


@dataclass
class FederationState:
    name: str
    members: dict[str, Member] = field(default_factory=dict)
    objects: dict[str, tuple[str, str]] = field(default_factory=dict)
    sync_points: dict[str, SyncPoint] = field(default_factory=dict)
    # class path -> {attribute path: data type}
    class_tree: dict[str, dict[str, DataType]] = field(default_factory=dict)
    started: bool = False
    faulted: str | None = None


def compute_grants(requests: dict[str, float | None]) -> list[tuple[str, float]]:
    """Lockstep grant rule over the time-managed members.

    ``requests`` maps every time-managed member to its pending TAR time (or
    None). Nothing is granted unless every member has a pending request; then
    every member asking for the minimum time is granted it.
    """
    if not requests or any(t is None for t in requests.values()):
        return []
    low = min(requests.values())
    return [(name, low) for name, t in sorted(requests.items()) if t == low]


def _fault(code: str, reason: str) -> RtiMessage:
    return RtiMessage(Kind.FAULT, RTI_SENDER, {"code": code, "reason": reason})


class Coordinator:
    def __init__(self):
        self.federation: FederationState | None = None
        self.links: dict[int, str] = {}  # link -> joined member name
        self.destroyed = False
        self.to_close: set[int] = set()
        self.federation_created = threading.Event()

    # -- entry points ---------------------------------------------------------

    def handle(self, link_id: int, msg: RtiMessage) -> list[Out]:
        out: list[Out] = []
        try:
            self._dispatch(link_id, msg, out)
        except Violation as v:
            log.info("protocol violation from link %d (%s): %s", link_id, msg.sender, v)
            out.append((link_id, _fault(v.code, v.reason)))
            self._eject(link_id, f"{v.code}: {v.reason}", out)
            self.to_close.add(link_id)
        return out

    def handle_frame(self, link_id: int, body: bytes) -> list[Out]:
        try:
            msg = RtiMessage.decode(body)
        except FrameError as exc:
            out = [(link_id, _fault("MalformedFrame", str(exc)))]
            self._eject(link_id, f"MalformedFrame: {exc}", out)
            self.to_close.add(link_id)
            return out
        return self.handle(link_id, msg)

    def disconnect(self, link_id: int) -> list[Out]:
        out: list[Out] = []
        if link_id in self.links:
            self._eject(link_id, "connection lost before resigning", out)
        return out

    # -- helpers ----------------------------------------------------------------

    def _fed(self) -> FederationState:
        if self.federation is None:
            raise Violation("NoFederation", "federation does not exist")
        return self.federation

    def _member(self, link_id: int, msg: RtiMessage) -> Member:
        name = self.links.get(link_id)
        if name is None:
            raise Violation("NotJoined", f"{msg.kind.value} before joining")
        if msg.sender != name:
            raise Violation("SenderMismatch", f"link joined as {name!r}, message claims {msg.sender!r}")
        return self._fed().members[name]

    def _send(self, out: list[Out], member: Member, msg: RtiMessage) -> None:
        out.append((member.link_id, msg))

    def _broadcast(self, out: list[Out], msg: RtiMessage, exclude: str | None = None) -> None:
        for m in self._fed().members.values():
            if m.name != exclude:
                self._send(out, m, msg)

    def _remove_member(self, name: str, out: list[Out]) -> None:
        fed = self._fed()
        member = fed.members.pop(name)
        self.links.pop(member.link_id, None)
        for uuid in [u for u, (owner, _) in fed.objects.items() if owner == name]:
            del fed.objects[uuid]
        for sp in fed.sync_points.values():
            if sp.required is not None:
                sp.required.discard(name)
            sp.achieved.discard(name)
            sp.announced.discard(name)
        self._check_sync(out)
        self._grant(out)

    def _eject(self, link_id: int, reason: str, out: list[Out]) -> None:
        name = self.links.get(link_id)
        if name is None or self.federation is None:
            return
        if self.federation.faulted is None:
            self.federation.faulted = f"{name}: {reason}"
        self._remove_member(name, out)
        self._broadcast(out, _fault("MemberFault", f"{name}: {reason}"))

    # -- dispatch ---------------------------------------------------------------

    def _dispatch(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        if self.destroyed:
            raise Violation("Destroyed", "federation already destroyed")
        handler = {
            Kind.CREATE_FEDERATION: self._on_create,
            Kind.JOIN_FEDERATION: self._on_join,
            Kind.FOM_MODULE_OFFER: self._on_fom,
            Kind.REGISTER_SYNC_POINT: self._on_register_sync,
            Kind.SYNC_POINT_ACHIEVED: self._on_achieved,
            Kind.PUBLISH_OBJECT_CLASS: self._on_publish,
            Kind.SUBSCRIBE_OBJECT_CLASS_ATTRIBUTES: self._on_subscribe,
            Kind.REGISTER_OBJECT_INSTANCE: self._on_register_object,
            Kind.UPDATE_ATTRIBUTE_VALUES: self._on_update,
            Kind.TIME_ADVANCE_REQUEST: self._on_tar,
            Kind.RESIGN_FEDERATION: self._on_resign,
            Kind.DESTROY_FEDERATION: self._on_destroy,
        }.get(msg.kind)
        if handler is None:
            raise Violation("IllegalKind", f"{msg.kind.value} is sent by the coordinator only")
        handler(link_id, msg, out)

    def _on_create(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        name = msg.payload.get("federation")
        if not isinstance(name, str) or not name:
            raise Violation("BadPayload", "CreateFederation needs a federation name")
        if self.federation is not None:
            raise Violation("FederationExists", f"federation {self.federation.name!r} already exists")
        self.federation = FederationState(name)
        self.federation_created.set()

    def _on_join(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        fed = self._fed()
        p = msg.payload
        if p.get("federation") != fed.name:
            raise Violation("NoFederation", f"no federation named {p.get('federation')!r}")
        if link_id in self.links:
            raise Violation("AlreadyJoined", f"link already joined as {self.links[link_id]!r}")
        if msg.sender in fed.members or msg.sender == RTI_SENDER:
            # Reject without disturbing the legitimate holder of the name.
            out.append((link_id, _fault("DuplicateName", f"federate name {msg.sender!r} is taken")))
            self.to_close.add(link_id)
            return
        if fed.started:
            out.append((link_id, _fault("LateJoin", "the federation has already started")))
            self.to_close.add(link_id)
            return
        member = Member(msg.sender, link_id, str(p.get("federateType", "")), bool(p.get("timeManaged", True)))
        fed.members[member.name] = member
        self.links[link_id] = member.name
        # A joiner during a pending sync point takes part in it.
        for sp in fed.sync_points.values():
            if not sp.done and (sp.required is None or member.name in sp.required):
                sp.announced.add(member.name)
                self._send(out, member, RtiMessage(Kind.ANNOUNCE_SYNC_POINT, RTI_SENDER, {"label": sp.label}))

    def _on_fom(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        member = self._member(link_id, msg)
        fed = self._fed()
        try:
            module = parse_fom_xml(msg.payload.get("xml", ""))
        except FomError as exc:
            raise Violation("InvalidFom", str(exc)) from None
        additions: dict[str, dict[str, DataType]] = {}
        for class_path, cls in iter_classes(module):
            bucket = additions.setdefault(class_path, {})
            for attr in cls.attributes:
                path = f"{class_path}.{attr.name}"
                known = fed.class_tree.get(class_path, {}).get(path)
                if known is not None and known != attr.data_type:
                    raise Violation("FomConflict", f"{path} is {known.value} elsewhere, {attr.data_type.value} here")
                bucket[path] = attr.data_type
        for class_path, attrs in additions.items():
            fed.class_tree.setdefault(class_path, {}).update(attrs)
        member.fom_modules.append(module.model_name)

    def _check_attributes(self, class_path: str, attribute_paths: Iterable[str]) -> set[str]:
        fed = self._fed()
        if class_path not in fed.class_tree:
            raise Violation("UnknownClassPath", f"{class_path!r} is not in the federation object model")
        visible: set[str] = set()
        for anc, attrs in fed.class_tree.items():
            if is_same_or_descendant(class_path, anc):
                visible.update(attrs)
        paths = set()
        for p in attribute_paths:
            if p not in visible:
                raise Violation("UnknownAttributePath", f"{p!r} is not an attribute of {class_path}")
            paths.add(p)
        return paths

    def _class_and_attrs(self, msg: RtiMessage) -> tuple[str, set[str]]:
        class_path = msg.payload.get("classPath")
        attrs = msg.payload.get("attributePaths", [])
        if not isinstance(class_path, str) or not isinstance(attrs, list):
            raise Violation("BadPayload", f"{msg.kind.value} needs classPath and attributePaths")
        return class_path, self._check_attributes(class_path, attrs)

    def _on_publish(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        member = self._member(link_id, msg)
        class_path, attrs = self._class_and_attrs(msg)
        member.published.setdefault(class_path, set()).update(attrs)

    def _on_subscribe(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        member = self._member(link_id, msg)
        class_path, attrs = self._class_and_attrs(msg)
        member.subscriptions.setdefault(class_path, set()).update(attrs)
        for uuid, (owner, obj_class) in sorted(self._fed().objects.items()):
            if owner != member.name and is_same_or_descendant(obj_class, class_path):
                self._discover(out, member, uuid, obj_class, owner)

    def _discover(self, out: list[Out], member: Member, uuid: str, class_path: str, owner: str) -> None:
        if uuid in member.discovered:
            return
        member.discovered.add(uuid)
        payload = {"objectUUID": uuid, "classPath": class_path, "owner": owner}
        self._send(out, member, RtiMessage(Kind.DISCOVER_OBJECT_INSTANCE, RTI_SENDER, payload))

    def _on_register_object(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        member = self._member(link_id, msg)
        fed = self._fed()
        uuid = msg.payload.get("objectUUID")
        class_path = msg.payload.get("classPath")
        if not isinstance(uuid, str) or not isinstance(class_path, str):
            raise Violation("BadPayload", "RegisterObjectInstance needs objectUUID and classPath")
        if class_path not in member.published:
            raise Violation("ClassNotPublished", f"{member.name} does not publish {class_path}")
        if uuid in fed.objects:
            raise Violation("DuplicateObject", f"object {uuid!r} is already registered")
        fed.objects[uuid] = (member.name, class_path)
        for other in sorted(fed.members.values(), key=lambda m: m.name):
            if other.name != member.name and other.subscribed_attributes(class_path) is not None:
                self._discover(out, other, uuid, class_path, member.name)

    def _on_update(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        member = self._member(link_id, msg)
        fed = self._fed()
        uuid = msg.payload.get("objectUUID")
        values = msg.payload.get("values")
        if not isinstance(uuid, str) or not isinstance(values, dict):
            raise Violation("BadPayload", "UpdateAttributeValues needs objectUUID and values")
        if uuid not in fed.objects:
            raise Violation("UnknownObject", f"object {uuid!r} is not registered")
        owner, class_path = fed.objects[uuid]
        if owner != member.name:
            raise Violation("NotOwner", f"{member.name} does not own {uuid}")
        t = msg.timestamp
        if t < member.granted_time:
            raise Violation("StaleTimestamp", f"update at {t} is before granted time {member.granted_time}")
        allowed = member.published.get(class_path, set())
        for path, value in values.items():
            if path not in allowed:
                raise Violation("AttributeNotPublished", f"{member.name} does not publish {path}")
            if isinstance(value, (dict, list)) or value is None:
                raise Violation("BadPayload", f"{path}: attribute values must be JSON scalars")
        for other in sorted(fed.members.values(), key=lambda m: m.name):
            if other.name == owner or uuid not in other.discovered:
                continue
            wanted = other.subscribed_attributes(class_path) or set()
            filtered = {k: values[k] for k in sorted(values) if k in wanted}
            if not filtered:
                continue
            pending = PendingReflect(t, owner, uuid, class_path, filtered)
            if other.time_managed:
                other.reflect_buffer.append(pending)
            else:
                self._send(out, other, self._reflect_msg(pending))

    @staticmethod
    def _reflect_msg(p: PendingReflect) -> RtiMessage:
        payload = {"objectUUID": p.object_uuid, "classPath": p.class_path, "values": p.values}
        return RtiMessage(Kind.REFLECT_ATTRIBUTE_VALUES, RTI_SENDER, payload, p.timestamp)

    def _on_tar(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        member = self._member(link_id, msg)
        if not member.time_managed:
            raise Violation("NotTimeManaged", f"{member.name} joined without time management")
        if member.pending_tar is not None:
            raise Violation("TarPending", f"{member.name} already requested {member.pending_tar}")
        if msg.timestamp <= member.granted_time:
            raise Violation("InvalidTime", f"request {msg.timestamp} is not after granted {member.granted_time}")
        member.pending_tar = msg.timestamp
        self._grant(out)

    def _grant(self, out: list[Out]) -> None:
        fed = self.federation
        if fed is None or fed.faulted:
            return  # a faulted run never advances again
        managed = {m.name: m.pending_tar for m in fed.members.values() if m.time_managed}
        for name, t in compute_grants(managed):
            member = fed.members[name]
            due = sorted((p for p in member.reflect_buffer if p.timestamp <= t), key=PendingReflect.sort_key)
            member.reflect_buffer = [p for p in member.reflect_buffer if p.timestamp > t]
            for p in due:
                self._send(out, member, self._reflect_msg(p))
            member.granted_time = t
            member.pending_tar = None
            self._send(out, member, RtiMessage(Kind.TIME_ADVANCE_GRANT, RTI_SENDER, {}, t))

    def _on_register_sync(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        self._member(link_id, msg)
        fed = self._fed()
        label = msg.payload.get("label")
        names = msg.payload.get("federates")
        if not isinstance(label, str) or not label:
            raise Violation("BadPayload", "RegisterSyncPoint needs a label")
        if label in fed.sync_points:
            raise Violation("DuplicateLabel", f"sync point {label!r} already registered")
        if names is not None and (not isinstance(names, list) or not all(isinstance(n, str) for n in names)):
            raise Violation("BadPayload", "federates must be a list of names")
        sp = SyncPoint(label, set(names) if names is not None else None)
        fed.sync_points[label] = sp
        for m in sorted(fed.members.values(), key=lambda m: m.name):
            if sp.required is None or m.name in sp.required:
                sp.announced.add(m.name)
                self._send(out, m, RtiMessage(Kind.ANNOUNCE_SYNC_POINT, RTI_SENDER, {"label": label}))
        self._check_sync(out)

    def _on_achieved(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        member = self._member(link_id, msg)
        sp = self._fed().sync_points.get(msg.payload.get("label"))
        if sp is None or sp.done or member.name not in sp.announced:
            raise Violation("UnknownSyncPoint", f"no announced sync point {msg.payload.get('label')!r}")
        sp.achieved.add(member.name)
        self._check_sync(out)

    def _check_sync(self, out: list[Out]) -> None:
        fed = self.federation
        if fed is None:
            return
        for sp in fed.sync_points.values():
            if sp.done:
                continue
            required = sp.required if sp.required is not None else set(fed.members)
            if required <= sp.achieved and required:
                sp.done = True
                fed.started = True
                self._broadcast(out, RtiMessage(Kind.FEDERATION_SYNCHRONIZED, RTI_SENDER, {"label": sp.label}))

    def _on_resign(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        member = self._member(link_id, msg)
        error = msg.payload.get("error")
        fed = self._fed()
        if error and fed.faulted is None:
            fed.faulted = f"{member.name}: {error}"
        self._remove_member(member.name, out)
        if error:
            self._broadcast(out, _fault("MemberFault", f"{member.name}: {error}"))

    def _on_destroy(self, link_id: int, msg: RtiMessage, out: list[Out]) -> None:
        fed = self._fed()
        if link_id in self.links:
            raise Violation("StillJoined", "resign before destroying the federation")
        if msg.payload.get("federation") != fed.name:
            raise Violation("NoFederation", f"no federation named {msg.payload.get('federation')!r}")
        if fed.members:
            out.append((link_id, _fault("FederatesStillJoined", ", ".join(sorted(fed.members)))))
            return
        self.destroyed = True
        # Echoed back as the confirmation, so the destroyer closes first.
        out.append((link_id, RtiMessage(Kind.DESTROY_FEDERATION, RTI_SENDER, {"federation": fed.name})))


class CoordinatorServer:
    """Runs a ``Coordinator`` over an acceptor on a background thread."""

    def __init__(self, acceptor: Acceptor, close_grace: float = 2.0):
        self.acceptor = acceptor
        self.coordinator = Coordinator()
        self.close_grace = close_grace
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, name="rti-coordinator", daemon=True)
        self.error: BaseException | None = None

    def start(self) -> "CoordinatorServer":
        self._thread.start()
        return self

    def _loop(self) -> None:
        try:
            while not self._stop.is_set() and not self.coordinator.destroyed:
                try:
                    link_id, body = self.acceptor.inbox.get(timeout=0.05)
                except queue.Empty:
                    continue
                if body is None:
                    out = self.coordinator.disconnect(link_id)
                else:
                    out = self.coordinator.handle_frame(link_id, body)
                for target, msg in out:
                    link = self.acceptor.link(target)
                    if link is not None:
                        link.send(msg)
                while self.coordinator.to_close:
                    link = self.acceptor.link(self.coordinator.to_close.pop())
                    if link is not None:
                        link.close()
        except BaseException as exc:  # pragma: no cover - defensive
            log.exception("coordinator loop crashed")
            self.error = exc
        finally:
            self.acceptor.close(wait=self.close_grace)

    def stop(self) -> None:
        self._stop.set()

    def join(self, timeout: float | None = None) -> bool:
        self._thread.join(timeout)
        return not self._thread.is_alive()

    @property
    def alive(self) -> bool:
        return self._thread.is_alive()
