"""RTI wire messages and their length-prefixed JSON framing.

Every frame is a 4-byte big-endian length followed by a UTF-8 JSON object::

    {"kind": <Kind>, "sender": <federate name or "rti">,
     "timestamp": <float, only on Update/Reflect/TAR/TAG>, "payload": {...}}

Payload fields per kind:

==============================  ================================================
CreateFederation                federation
JoinFederation                  federation, federateType, timeManaged
FomModuleOffer                  xml (rendered FOM module)
RegisterSyncPoint               label, federates (list of names, or null = all)
AnnounceSyncPoint               label
SyncPointAchieved               label
FederationSynchronized          label
PublishObjectClass              classPath, attributePaths
SubscribeObjectClassAttributes  classPath, attributePaths
RegisterObjectInstance          objectUUID, classPath
DiscoverObjectInstance          objectUUID, classPath, owner
UpdateAttributeValues           objectUUID, values {attributePath: scalar}
ReflectAttributeValues          objectUUID, classPath, values
TimeAdvanceRequest              (timestamp only)
TimeAdvanceGrant                (timestamp only)
ResignFederation                error (null on a clean resign)
DestroyFederation               federation (echoed by the coordinator as the confirmation)
Fault                           code, reason
==============================  ================================================
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Any

HEADER = struct.Struct(">I")
MAX_FRAME = 64 * 1024 * 1024
RTI_SENDER = "rti"


class Kind(str, enum.Enum):
    CREATE_FEDERATION = "CreateFederation"
    JOIN_FEDERATION = "JoinFederation"
    FOM_MODULE_OFFER = "FomModuleOffer"
    REGISTER_SYNC_POINT = "RegisterSyncPoint"
    ANNOUNCE_SYNC_POINT = "AnnounceSyncPoint"
    SYNC_POINT_ACHIEVED = "SyncPointAchieved"
    FEDERATION_SYNCHRONIZED = "FederationSynchronized"
    PUBLISH_OBJECT_CLASS = "PublishObjectClass"
    SUBSCRIBE_OBJECT_CLASS_ATTRIBUTES = "SubscribeObjectClassAttributes"
    REGISTER_OBJECT_INSTANCE = "RegisterObjectInstance"
    DISCOVER_OBJECT_INSTANCE = "DiscoverObjectInstance"
    UPDATE_ATTRIBUTE_VALUES = "UpdateAttributeValues"
    REFLECT_ATTRIBUTE_VALUES = "ReflectAttributeValues"
    TIME_ADVANCE_REQUEST = "TimeAdvanceRequest"
    TIME_ADVANCE_GRANT = "TimeAdvanceGrant"
    RESIGN_FEDERATION = "ResignFederation"
    DESTROY_FEDERATION = "DestroyFederation"
    FAULT = "Fault"


KIND_RANK = {k: i for i, k in enumerate(Kind)}
TIMESTAMPED = frozenset(
    {Kind.UPDATE_ATTRIBUTE_VALUES, Kind.REFLECT_ATTRIBUTE_VALUES, Kind.TIME_ADVANCE_REQUEST, Kind.TIME_ADVANCE_GRANT}
)


class FrameError(ValueError):
    pass


@dataclass
class RtiMessage:
    kind: Kind
    sender: str
    payload: dict[str, Any] = field(default_factory=dict)
    timestamp: float | None = None

    def __post_init__(self):
        self.kind = Kind(self.kind)
        if self.kind in TIMESTAMPED:
            if self.timestamp is None:
                raise FrameError(f"{self.kind.value} needs a timestamp")
        elif self.timestamp is not None:
            raise FrameError(f"{self.kind.value} carries no timestamp")
        if self.timestamp is not None:
            if isinstance(self.timestamp, bool) or not isinstance(self.timestamp, (int, float)):
                raise FrameError("timestamp must be a number")
            self.timestamp = float(self.timestamp)
            if not math.isfinite(self.timestamp) or self.timestamp < 0:
                raise FrameError("timestamp must be finite and >= 0")

    def encode(self) -> bytes:
        obj: dict[str, Any] = {"kind": self.kind.value, "sender": self.sender}
        if self.timestamp is not None:
            obj["timestamp"] = self.timestamp
        obj["payload"] = self.payload
        return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode("utf-8")

    @classmethod
    def decode(cls, data: bytes) -> "RtiMessage":
        try:
            obj = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FrameError(f"undecodable frame: {exc}") from None
        if not isinstance(obj, dict) or not isinstance(obj.get("payload", {}), dict):
            raise FrameError("frame must be a JSON object with an object payload")
        try:
            return cls(Kind(obj["kind"]), str(obj["sender"]), obj.get("payload", {}), obj.get("timestamp"))
        except (KeyError, ValueError) as exc:
            raise FrameError(f"bad frame: {exc}") from None


def frame(body: bytes) -> bytes:
    if len(body) > MAX_FRAME:
        raise FrameError(f"frame of {len(body)} bytes exceeds {MAX_FRAME}")
    return HEADER.pack(len(body)) + body


def read_frame(recv_exactly) -> bytes | None:
    """Read one frame using ``recv_exactly(n)``, which returns None on EOF."""
    header = recv_exactly(HEADER.size)
    if header is None:
        return None
    (n,) = HEADER.unpack(header)
    if n > MAX_FRAME:
        raise FrameError(f"announced frame of {n} bytes exceeds {MAX_FRAME}")
    if n == 0:
        return b""
    return recv_exactly(n)
