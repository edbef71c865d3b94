"""Local NED <-> WGS84 conversion (equirectangular about a fixed origin)."""

from __future__ import annotations

import math

EARTH_RADIUS = 6371000.0


def ned_to_geodetic(x: float, y: float, origin_lat: float, origin_lon: float) -> tuple[float, float]:
    lat = origin_lat + math.degrees(x / EARTH_RADIUS)
    lon = origin_lon + math.degrees(y / (EARTH_RADIUS * math.cos(math.radians(origin_lat))))
    if not -180.0 <= lon < 180.0:
        lon = (lon + 180.0) % 360.0 - 180.0
    return lat, lon


def geodetic_to_ned(lat: float, lon: float, origin_lat: float, origin_lon: float) -> tuple[float, float]:
    dlon = (lon - origin_lon + 180.0) % 360.0 - 180.0
    x = math.radians(lat - origin_lat) * EARTH_RADIUS
    y = math.radians(dlon) * EARTH_RADIUS * math.cos(math.radians(origin_lat))
    return x, y


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    if -math.pi <= a < math.pi:
        return a
    w = (a + math.pi) % (2.0 * math.pi) - math.pi
    return w if w < math.pi else -math.pi
