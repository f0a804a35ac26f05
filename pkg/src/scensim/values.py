"""Attribute value kinds and their text / wire encodings."""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass
from typing import Any, Union

from .errors import DecodeError


class DataType(str, enum.Enum):
    BOOLEAN = "Boolean"
    INTEGER = "Integer"
    DOUBLE = "Double"
    STRING = "String"
    POSITION = "Position"
    ROUTE = "Route"

    @property
    def is_scalar(self) -> bool:
        return self not in (DataType.POSITION, DataType.ROUTE)


# Fully-qualified names seen in scenario documents written against the Java
# prototype's type system.
DATATYPE_ALIASES = {
    "java.lang.Boolean": DataType.BOOLEAN,
    "java.lang.Integer": DataType.INTEGER,
    "java.lang.Long": DataType.INTEGER,
    "java.lang.Double": DataType.DOUBLE,
    "java.lang.String": DataType.STRING,
}

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def parse_datatype(text: str) -> DataType:
    """Resolve a dataType name (or one of the fixed aliases)."""
    text = text.strip()
    if text in DATATYPE_ALIASES:
        return DATATYPE_ALIASES[text]
    try:
        return DataType(text)
    except ValueError:
        raise ValueError(f"unknown dataType {text!r}") from None


@dataclass(frozen=True)
class Position:
    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        for name in ("latitude", "longitude", "altitude"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise TypeError(f"Position.{name} must be a number, got {v!r}")
            if not math.isfinite(v):
                raise ValueError(f"Position.{name} must be finite")
            object.__setattr__(self, name, float(v))
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180]")


@dataclass(frozen=True)
class Route:
    waypoints: tuple[Position, ...]

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if len(self.waypoints) < 2:
            raise ValueError("a Route needs at least 2 waypoints")
        if not all(isinstance(p, Position) for p in self.waypoints):
            raise TypeError("Route waypoints must be Position values")

    def __len__(self) -> int:
        return len(self.waypoints)

    def __getitem__(self, i: int) -> Position:
        return self.waypoints[i]


AttributeValue = Union[bool, int, float, str, Position, Route]


def matches_kind(value: Any, data_type: DataType) -> bool:
    """Exact runtime-kind check (bool is not an Integer, int is not a Double)."""
    if data_type is DataType.BOOLEAN:
        return isinstance(value, bool)
    if data_type is DataType.INTEGER:
        return isinstance(value, int) and not isinstance(value, bool) and INT64_MIN <= value <= INT64_MAX
    if data_type is DataType.DOUBLE:
        return isinstance(value, float) and math.isfinite(value)
    if data_type is DataType.STRING:
        return isinstance(value, str)
    if data_type is DataType.POSITION:
        return isinstance(value, Position)
    if data_type is DataType.ROUTE:
        return isinstance(value, Route)
    return False


def default_value(data_type: DataType) -> AttributeValue:
    if data_type is DataType.BOOLEAN:
        return False
    if data_type is DataType.INTEGER:
        return 0
    if data_type is DataType.DOUBLE:
        return 0.0
    if data_type is DataType.STRING:
        return ""
    if data_type is DataType.POSITION:
        return Position(0.0, 0.0, 0.0)
    # A Route has no meaningful empty value.
    raise ValueError("Route attributes have no default value")


# -- scalar text syntax (scenario documents) ---------------------------------

_INT_RE = re.compile(r"[+-]?\d+")


def parse_scalar_text(text: str | None, data_type: DataType) -> AttributeValue:
    """Parse the text of a scalar <value>; raises ValueError on mismatch."""
    if data_type is DataType.STRING:
        return text or ""
    raw = (text or "").strip()
    if data_type is DataType.BOOLEAN:
        if raw in ("true", "1"):
            return True
        if raw in ("false", "0"):
            return False
        raise ValueError(f"{raw!r} is not a Boolean")
    if data_type is DataType.INTEGER:
        if not _INT_RE.fullmatch(raw):
            raise ValueError(f"{raw!r} is not an Integer")
        value = int(raw)
        if not INT64_MIN <= value <= INT64_MAX:
            raise ValueError(f"{raw!r} overflows a 64-bit Integer")
        return value
    if data_type is DataType.DOUBLE:
        try:
            value = float(raw)
        except ValueError:
            raise ValueError(f"{raw!r} is not a Double") from None
        if not math.isfinite(value):
            raise ValueError(f"{raw!r} is not a finite Double")
        return value
    raise ValueError(f"{data_type.value} is not a scalar type")


def format_scalar_text(value: AttributeValue, data_type: DataType) -> str:
    if data_type is DataType.BOOLEAN:
        return "true" if value else "false"
    if data_type is DataType.INTEGER:
        return str(int(value))
    if data_type is DataType.DOUBLE:
        return repr(float(value))
    if data_type is DataType.STRING:
        return str(value)
    raise ValueError(f"{data_type.value} is not a scalar type")


# -- flattening to scalar leaves (FOM / wire) ---------------------------------

POSITION_LEAVES = ("latitude", "longitude", "altitude")
ROUTE_LEAF = "encoded"


def flatten_attribute(name: str, data_type: DataType) -> list[tuple[str, DataType]]:
    """Scalar leaves an attribute is published as, in canonical order."""
    if data_type is DataType.POSITION:
        return [(f"{name}.{leaf}", DataType.DOUBLE) for leaf in POSITION_LEAVES]
    if data_type is DataType.ROUTE:
        return [(f"{name}.{ROUTE_LEAF}", DataType.STRING)]
    return [(name, data_type)]


def encode_route(route: Route) -> str:
    """Canonical JSON text of a route's waypoint list."""
    return json.dumps(
        [{"altitude": p.altitude, "latitude": p.latitude, "longitude": p.longitude} for p in route.waypoints],
        separators=(",", ":"),
        allow_nan=False,
    )


def decode_route(text: str) -> Route:
    try:
        items = json.loads(text)
        return Route(tuple(Position(i["latitude"], i["longitude"], i["altitude"]) for i in items))
    except (ValueError, TypeError, KeyError) as exc:
        raise DecodeError(f"malformed encoded route: {exc}") from None


def flatten_value(name: str, data_type: DataType, value: AttributeValue) -> dict[str, Any]:
    """Leaf name -> JSON scalar, mirroring flatten_attribute."""
    if data_type is DataType.POSITION:
        return {f"{name}.{leaf}": getattr(value, leaf) for leaf in POSITION_LEAVES}
    if data_type is DataType.ROUTE:
        return {f"{name}.{ROUTE_LEAF}": encode_route(value)}
    return {name: value}


def decode_scalar(raw: Any, data_type: DataType) -> AttributeValue:
    """Decode one JSON scalar leaf; strict about kinds."""
    if data_type is DataType.BOOLEAN and isinstance(raw, bool):
        return raw
    if data_type is DataType.INTEGER and isinstance(raw, int) and not isinstance(raw, bool):
        return raw
    if data_type is DataType.DOUBLE and isinstance(raw, (int, float)) and not isinstance(raw, bool):
        value = float(raw)
        if math.isfinite(value):
            return value
    if data_type is DataType.STRING and isinstance(raw, str):
        return raw
    raise DecodeError(f"{raw!r} is not a valid {data_type.value} leaf")


def recompose(data_type: DataType, current: AttributeValue | None, leaves: dict[str, Any]) -> AttributeValue:
    """Rebuild a value from (possibly partial) decoded leaves keyed by leaf suffix.

    ``leaves`` maps the part after the attribute name ("" for scalars,
    "latitude", "encoded", ...) to the raw JSON value.
    """
    if data_type is DataType.POSITION:
        base = current if isinstance(current, Position) else Position(0.0, 0.0, 0.0)
        parts = {leaf: getattr(base, leaf) for leaf in POSITION_LEAVES}
        for leaf, raw in leaves.items():
            if leaf not in parts:
                raise DecodeError(f"unknown Position leaf {leaf!r}")
            parts[leaf] = decode_scalar(raw, DataType.DOUBLE)
        try:
            return Position(**parts)
        except (TypeError, ValueError) as exc:
            raise DecodeError(str(exc)) from None
    if data_type is DataType.ROUTE:
        if set(leaves) != {ROUTE_LEAF}:
            raise DecodeError("a Route is carried by exactly one 'encoded' leaf")
        raw = leaves[ROUTE_LEAF]
        if not isinstance(raw, str):
            raise DecodeError("encoded route must be a string")
        return decode_route(raw)
    if set(leaves) != {""}:
        raise DecodeError(f"scalar attribute got leaves {sorted(leaves)}")
    return decode_scalar(leaves[""], data_type)


def to_json(value: AttributeValue) -> Any:
    """JSON rendering used in observer records and exit reports."""
    if isinstance(value, Position):
        return {"Lat": value.latitude, "Lon": value.longitude, "Alt": value.altitude}
    if isinstance(value, Route):
        return [to_json(p) for p in value.waypoints]
    return value
