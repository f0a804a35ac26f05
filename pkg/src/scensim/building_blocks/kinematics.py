"""Waypoint following on a local flat-earth (equirectangular) metric."""

from __future__ import annotations

import math

from ..errors import EmptyRouteError
from ..values import Position, Route

METERS_PER_DEG_LAT = 111320.0


def meters_per_deg_lon(latitude: float) -> float:
    return METERS_PER_DEG_LAT * math.cos(math.radians(latitude))


def local_offset(origin: Position, target: Position) -> tuple[float, float]:
    """(north, east) offset in meters, metric evaluated at the origin's latitude."""
    north = (target.latitude - origin.latitude) * METERS_PER_DEG_LAT
    east = (target.longitude - origin.longitude) * meters_per_deg_lon(origin.latitude)
    return north, east


def heading_deg(north: float, east: float) -> float:
    h = math.degrees(math.atan2(east, north)) % 360.0
    # -tiny % 360 rounds to 360.0
    return 0.0 if h >= 360.0 else h


def advance_along_route(
    p: Position,
    route: Route | tuple[Position, ...] | list[Position],
    cursor: int,
    speed: float,
    dt: float,
    heading: float = 0.0,
) -> tuple[Position, int, float]:
    """Move ``speed * dt`` meters toward ``route[cursor]``.

    Distance left over after reaching a waypoint carries into the next leg.
    At the final waypoint the position clamps and the cursor saturates.
    ``heading`` is returned unchanged when no movement happens.
    """
    waypoints = route.waypoints if isinstance(route, Route) else tuple(route)
    if not waypoints:
        raise EmptyRouteError("route has no waypoints")
    if not 0 <= cursor < len(waypoints):
        raise ValueError(f"cursor {cursor} outside route of {len(waypoints)} waypoints")
    if speed < 0 or dt <= 0:
        raise ValueError("speed must be >= 0 and dt > 0")

    remaining = speed * dt
    if remaining == 0.0:
        return p, cursor, heading

    lat, lon = p.latitude, p.longitude
    last = len(waypoints) - 1
    while True:
        target = waypoints[cursor]
        here = Position(lat, lon, p.altitude)
        north, east = local_offset(here, target)
        dist = math.hypot(north, east)
        if dist <= remaining:
            if dist > 0.0:
                heading = heading_deg(north, east)
            lat, lon = target.latitude, target.longitude
            remaining -= dist
            if cursor == last:
                break
            cursor += 1
            if remaining <= 0.0:
                break
        else:
            frac = remaining / dist
            heading = heading_deg(north, east)
            lat += (target.latitude - lat) * frac
            lon += (target.longitude - lon) * frac
            break
    return Position(lat, lon, p.altitude), cursor, heading
