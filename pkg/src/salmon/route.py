"""Waypoint route generation.

Mission elements are first reduced to a horizontal path (legs and circular
turns), arcs are discretised into chord waypoints, transition points are
placed ``d_arc`` before and after every arc, and finally a sawtooth dive
profile with GPS surfacing runs assigns depths.

Frame: x North, y East, z depth (m, positive down). Angles are degrees in
every public signature.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

from .geo import ned_to_geodetic
from .plan import (
    Arc,
    Final,
    Initial,
    Line,
    MeanderElement,
    MissionPlan,
    WaypointElement,
    validate_plan,
)

log = logging.getLogger(__name__)

_SAME_POINT = 1e-9  # m, waypoints closer than this are merged
_EVENT_SNAP = 1e-6  # m, path vertices this close to a profile event are dropped
_MIN_DIVE = 1e-6  # m of remaining track below which no further dive is planned


class RouteConfigError(ValueError):
    pass


class WaypointKind(str, Enum):
    TRACK = "track"
    ARC_POINT = "arc_point"
    ARC_TRANSITION = "arc_transition"  # "x" mark
    SUBMERGE_PIVOT = "submerge_pivot"  # "+" mark, thruster/propeller handover at z_min
    SURFACE_START = "surface_start"
    SURFACE_END = "surface_end"


@dataclass(frozen=True)
class RouteProfile:
    alpha_arc: float = 30.0
    d_arc: float = 5.0
    z_min: float = 1.0
    alpha_dive: float = 20.0
    d_dive: float = 250.0
    l_gps: float = 30.0
    cruise_speed: float = 1.5

    def violations(self, z_max: float | None = None) -> list[str]:
        out = []
        if not 0 < self.alpha_arc <= 90:
            out.append("alpha_arc must lie in (0, 90]")
        if not self.d_arc >= 0:
            out.append("d_arc must be >= 0")
        if not self.z_min > 0:
            out.append("z_min must be > 0")
        if z_max is not None and not self.z_min < z_max:
            out.append(f"z_min must be < z_max ({z_max})")
        if not 0 < self.alpha_dive < 90:
            out.append("alpha_dive must lie in (0, 90)")
        if not self.d_dive > 0:
            out.append("d_dive must be > 0")
        if not self.l_gps > 0:
            out.append("l_gps must be > 0")
        if not self.cruise_speed > 0:
            out.append("cruise_speed must be > 0")
        return out


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    z: float
    kind: WaypointKind = WaypointKind.TRACK
    speed: float = 1.5


@dataclass(frozen=True)
class Route:
    waypoints: tuple[Waypoint, ...]
    horizontal_length: float
    submerged_segments: tuple[tuple[int, int], ...] = ()

    @classmethod
    def build(cls, waypoints: Sequence[Waypoint]) -> "Route":
        wps = tuple(waypoints)
        length = sum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(wps, wps[1:]))
        segments = []
        start = None
        for i, w in enumerate(wps):
            if w.kind is WaypointKind.SUBMERGE_PIVOT:
                prev_surface = i > 0 and wps[i - 1].z == 0.0
                next_surface = i + 1 < len(wps) and wps[i + 1].z == 0.0
                if prev_surface and start is None:
                    start = i
                elif next_surface and start is not None:
                    segments.append((start, i))
                    start = None
        return cls(wps, length, tuple(segments))


# --------------------------------------------------------------------------
# horizontal geometry


@dataclass(frozen=True)
class Leg:
    start: tuple[float, float]
    end: tuple[float, float]


@dataclass(frozen=True)
class Turn:
    center: tuple[float, float]
    radius: float
    start_angle: float  # deg, bearing of the start point from the centre
    end_angle: float

    def point(self, angle_deg: float) -> tuple[float, float]:
        a = math.radians(angle_deg)
        return (self.center[0] + self.radius * math.cos(a), self.center[1] + self.radius * math.sin(a))


Segment = Union[Leg, Turn]


@dataclass(frozen=True)
class PathPoint:
    x: float
    y: float
    kind: WaypointKind = WaypointKind.TRACK
    arc: int | None = None


def _rotate(p, origin, c, s):
    dx, dy = p[0] - origin[0], p[1] - origin[1]
    return (origin[0] + dx * c - dy * s, origin[1] + dx * s + dy * c)


def expand_meander(m: MeanderElement) -> list[Segment]:
    """Legs and U-turns of a meander, rotated by ``theta_meander`` about its start.

    Legs run along the rotated +x axis (odd legs back along -x) and step by
    ``d_leg`` towards +y; turns are half circles of radius ``d_leg / 2``.
    """
    problems = meander_problems(m)
    if problems:
        raise RouteConfigError("; ".join(problems))
    origin = (m.x_meander, m.y_meander)
    th = math.radians(m.theta_meander)
    c, s = math.cos(th), math.sin(th)
    r = m.d_leg / 2.0
    out: list[Segment] = []
    for k in range(m.n_legs):
        y = k * m.d_leg
        a, b = (0.0, m.l_leg) if k % 2 == 0 else (m.l_leg, 0.0)
        start = _rotate((origin[0] + a, origin[1] + y), origin, c, s)
        end = _rotate((origin[0] + b, origin[1] + y), origin, c, s)
        out.append(Leg(start, end))
        if k + 1 < m.n_legs:
            cx = b
            center = _rotate((origin[0] + cx, origin[1] + y + r), origin, c, s)
            # even legs bulge towards +x (sweep -90 -> +90), odd legs towards -x
            if k % 2 == 0:
                a0, a1 = -90.0, 90.0
            else:
                a0, a1 = -90.0, -270.0
            out.append(Turn(center, r, a0 + m.theta_meander, a1 + m.theta_meander))
    return out


def meander_problems(m: MeanderElement) -> list[str]:
    out = []
    if not m.z_max > 0:
        out.append("z_max must be > 0")
    if not m.l_leg > 0:
        out.append("l_leg must be > 0")
    if not m.d_leg > 0:
        out.append("d_leg must be > 0")
    if not (isinstance(m.n_legs, int) and m.n_legs >= 1):
        out.append("n_legs must be an integer >= 1")
    return out


def discretize_arc(center, radius: float, start_angle: float, end_angle: float, alpha_arc: float):
    """Points on the arc at equal angular steps no larger than ``alpha_arc`` (deg).

    Both endpoints are included; the step is ``sweep / ceil(|sweep| / alpha_arc)``.
    """
    if not radius > 0:
        raise RouteConfigError("arc radius must be > 0")
    if not alpha_arc > 0:
        raise RouteConfigError("alpha_arc must be > 0")
    sweep = end_angle - start_angle
    if sweep == 0:
        raise RouteConfigError("degenerate arc: zero sweep")
    n = max(1, math.ceil(abs(sweep) / alpha_arc - 1e-12))
    turn = Turn(tuple(center), radius, start_angle, end_angle)
    pts = [turn.point(start_angle + sweep * k / n) for k in range(n)]
    pts.append(turn.point(end_angle))
    return pts


def trace_path(segments: Sequence[Segment], alpha_arc: float) -> list[PathPoint]:
    """Flatten segments to path vertices; arc points carry the index of their turn."""
    pts: list[PathPoint] = []

    def add(p: PathPoint):
        if pts and math.hypot(p.x - pts[-1].x, p.y - pts[-1].y) <= _SAME_POINT:
            if p.kind is WaypointKind.ARC_POINT:
                pts[-1] = p
            return
        pts.append(p)

    for i, seg in enumerate(segments):
        if isinstance(seg, Leg):
            add(PathPoint(*seg.start))
            add(PathPoint(*seg.end))
        else:
            for x, y in discretize_arc(seg.center, seg.radius, seg.start_angle, seg.end_angle, alpha_arc):
                add(PathPoint(x, y, WaypointKind.ARC_POINT, i))
    return pts


def insert_arc_transitions(points: Sequence[PathPoint], d_arc: float) -> list[PathPoint]:
    """Add an ``ARC_TRANSITION`` vertex ``d_arc`` before and after every arc.

    The points are placed on the adjoining straight legs. With ``d_arc == 0``
    the arc endpoints themselves become the transition points; so do offsets
    below a micrometre.
    """
    if d_arc < 0:
        raise RouteConfigError("d_arc must be >= 0")
    pts = list(points)
    first: dict[int, int] = {}
    last: dict[int, int] = {}
    for i, p in enumerate(pts):
        if p.arc is not None:
            first.setdefault(p.arc, i)
            last[p.arc] = i

    before: dict[int, PathPoint] = {}  # inserted ahead of index
    after: dict[int, PathPoint] = {}  # inserted behind index
    relabel: dict[int, PathPoint] = {}
    for arc in first:
        for idx, nb, store in ((first[arc], first[arc] - 1, before), (last[arc], last[arc] + 1, after)):
            if nb < 0 or nb >= len(pts):
                continue
            p, q = pts[idx], pts[nb]
            leg = math.hypot(q.x - p.x, q.y - p.y)
            if d_arc >= leg / 2.0:
                raise RouteConfigError(
                    f"d_arc={d_arc} must be shorter than half the adjoining leg ({leg / 2.0:.3f} m)"
                )
            if d_arc <= _EVENT_SNAP:
                relabel[idx] = PathPoint(p.x, p.y, WaypointKind.ARC_TRANSITION, p.arc)
                continue
            f = d_arc / leg
            store[idx] = PathPoint(p.x + (q.x - p.x) * f, p.y + (q.y - p.y) * f, WaypointKind.ARC_TRANSITION)

    out = []
    for i, p in enumerate(pts):
        if i in before:
            out.append(before[i])
        out.append(relabel.get(i, p))
        if i in after:
            out.append(after[i])
    return out


def _cumulative(points: Sequence[PathPoint]) -> list[float]:
    s = [0.0]
    for a, b in zip(points, points[1:]):
        s.append(s[-1] + math.hypot(b.x - a.x, b.y - a.y))
    return s


def _locate(points, cum, s):
    """(x, y) at arc length ``s`` along the polyline."""
    if s <= 0:
        return points[0].x, points[0].y
    if s >= cum[-1]:
        return points[-1].x, points[-1].y
    lo, hi = 0, len(cum) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cum[mid] <= s:
            lo = mid
        else:
            hi = mid
    a, b = points[lo], points[hi]
    span = cum[hi] - cum[lo]
    f = (s - cum[lo]) / span if span > 0 else 0.0
    return a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f


def dive_events(length: float, profile: RouteProfile, z_max: float) -> list[tuple[float, float, WaypointKind]]:
    """Depth profile vertices ``(s, z, kind)`` for a submerged piece of track.

    The piece starts on the surface at s = 0 with a vertical thruster descent
    to ``z_min``; the sawtooth then runs between ``z_min`` and ``z_max``. At
    each top vertex a further full cycle is flown only if it keeps the
    submerged distance within ``d_dive`` plus one half cycle; otherwise the
    vehicle surfaces, runs ``l_gps`` on the surface and descends again.
    """
    problems = profile.violations(z_max)
    if problems:
        raise RouteConfigError("; ".join(problems))
    tan_a = math.tan(math.radians(profile.alpha_dive))
    cos_a = math.cos(math.radians(profile.alpha_dive))
    dz = z_max - profile.z_min
    h = dz / tan_a  # horizontal run of one half cycle
    hc = h / cos_a  # along-track length of one half cycle
    fresh_h = min(h, 0.5 * profile.d_dive * cos_a)
    if length < h:
        log.warning("track of %.2f m is shorter than one descent (%.2f m): single partial dive", length, h)

    S = WaypointKind
    ev = [(0.0, 0.0, S.TRACK), (0.0, profile.z_min, S.SUBMERGE_PIVOT)]
    s, acc = 0.0, 0.0
    while True:
        rem = length - s
        if rem <= _MIN_DIVE:
            ev[-1] = (ev[-1][0], profile.z_min, S.SUBMERGE_PIVOT)
            ev.append((ev[-1][0], 0.0, S.SURFACE_START))
            return ev
        if acc + hc <= profile.d_dive:
            half = min(h, rem / 2.0)
        elif acc == 0.0:
            half = min(rem / 2.0, fresh_h)
        else:
            # surface for a GPS fix
            ev[-1] = (s, profile.z_min, S.SUBMERGE_PIVOT)
            ev.append((s, 0.0, S.SURFACE_START))
            if rem - profile.l_gps >= 2.0 * fresh_h and rem - profile.l_gps > _MIN_DIVE:
                s += profile.l_gps
                ev.append((s, 0.0, S.SURFACE_END))
                ev.append((s, profile.z_min, S.SUBMERGE_PIVOT))
                acc = 0.0
                continue
            ev.append((length, 0.0, S.TRACK))
            return ev
        bottom = z_max if half == h else min(z_max, profile.z_min + half * tan_a)
        ev.append((s + half, bottom, S.TRACK))
        s = s + 2.0 * half if half < rem / 2.0 else length
        ev.append((s, profile.z_min, S.TRACK))
        acc += 2.0 * math.hypot(half, half * tan_a)


def apply_dive_profile(points: Sequence[PathPoint], profile: RouteProfile, z_max: float) -> Route:
    """Assign sawtooth depths and surfacing runs to a horizontal path."""
    pts = list(points)
    if len(pts) < 2:
        raise RouteConfigError("dive profile needs a path of at least two points")
    cum = _cumulative(pts)
    events = dive_events(cum[-1], profile, z_max)
    speed = profile.cruise_speed

    def depth_at(s):
        for (s0, z0, _), (s1, z1, _) in zip(events, events[1:]):
            if s0 <= s <= s1 and s1 > s0:
                return z0 + (z1 - z0) * (s - s0) / (s1 - s0)
        return 0.0

    out: list[Waypoint] = []
    j = 0  # next path vertex
    prev_s = None
    for s, z, kind in events:
        while j < len(pts) and cum[j] < s - _EVENT_SNAP:
            out.append(Waypoint(pts[j].x, pts[j].y, depth_at(cum[j]), pts[j].kind, speed))
            j += 1
        snapped = None
        while j < len(pts) and abs(cum[j] - s) <= _EVENT_SNAP:
            snapped = pts[j]
            j += 1
        if s == prev_s:
            x, y = out[-1].x, out[-1].y  # vertical transition: identical position
        elif snapped is not None:
            x, y = snapped.x, snapped.y
        else:
            x, y = _locate(pts, cum, s)
        if snapped is not None and z == 0.0 and kind is WaypointKind.TRACK:
            kind = snapped.kind
        out.append(Waypoint(x, y, z, kind, speed))
        prev_s = s
    while j < len(pts):
        out.append(Waypoint(pts[j].x, pts[j].y, depth_at(cum[j]), pts[j].kind, speed))
        j += 1
    return Route.build(_dedupe(out))


def _dedupe(wps: Sequence[Waypoint]) -> list[Waypoint]:
    out: list[Waypoint] = []
    for w in wps:
        if out:
            p = out[-1]
            if math.hypot(w.x - p.x, w.y - p.y) <= _SAME_POINT and abs(w.z - p.z) <= _SAME_POINT:
                continue
        out.append(w)
    return out


def _surface_route(points: Sequence[PathPoint], speed: float) -> list[Waypoint]:
    return [Waypoint(p.x, p.y, 0.0, p.kind, speed) for p in points]


def _piece(segments, depth, profile) -> list[Waypoint]:
    pts = insert_arc_transitions(trace_path(segments, profile.alpha_arc), profile.d_arc)
    if depth == 0:
        return _surface_route(pts, profile.cruise_speed)
    if depth <= profile.z_min:
        raise RouteConfigError(f"element depth {depth} must be 0 (surface) or deeper than z_min={profile.z_min}")
    return list(apply_dive_profile(pts, profile, depth).waypoints)


def generate_route(plan: MissionPlan, profile: RouteProfile) -> Route:
    """Compile a mission plan into a 3D waypoint route.

    Initial/final elements become surface track points; transits between
    elements run on the surface; submerged elements get the sawtooth profile
    with their own maximum depth.
    """
    problems = validate_plan(plan) + profile.violations()
    if problems:
        raise RouteConfigError("; ".join(problems))
    speed = profile.cruise_speed
    wps: list[Waypoint] = []
    cursor = None

    def transit(target):
        if cursor is not None and math.hypot(target[0] - cursor[0], target[1] - cursor[1]) > _SAME_POINT:
            wps.extend(_piece([Leg(cursor, target)], 0.0, profile))

    for el in plan.elements:
        if isinstance(el, Initial):
            wps.append(Waypoint(el.x, el.y, 0.0, WaypointKind.TRACK, speed))
            cursor = (el.x, el.y)
        elif isinstance(el, Final):
            transit((el.x, el.y))
            wps.append(Waypoint(el.x, el.y, 0.0, WaypointKind.TRACK, speed))
            cursor = (el.x, el.y)
        elif isinstance(el, WaypointElement):
            if math.hypot(el.x - cursor[0], el.y - cursor[1]) > _SAME_POINT:
                wps.extend(_piece([Leg(cursor, (el.x, el.y))], el.z, profile))
            cursor = (el.x, el.y)
        elif isinstance(el, Line):
            transit((el.x1, el.y1))
            wps.extend(_piece([Leg((el.x1, el.y1), (el.x2, el.y2))], el.z, profile))
            cursor = (el.x2, el.y2)
        elif isinstance(el, Arc):
            turn = Turn((el.cx, el.cy), el.radius, el.start_angle, el.end_angle)
            transit(turn.point(el.start_angle))
            wps.extend(_piece([turn], el.z, profile))
            cursor = turn.point(el.end_angle)
        elif isinstance(el, MeanderElement):
            segs = expand_meander(el)
            transit(segs[0].start)
            wps.extend(_piece(segs, el.z_max, profile))
            cursor = segs[-1].end
    return Route.build(_dedupe(wps))


def route_track_length(route: Route) -> float:
    """Sum of 3D segment lengths; vertical transitions count as |dz|."""
    w = route.waypoints
    return sum(math.dist((a.x, a.y, a.z), (b.x, b.y, b.z)) for a, b in zip(w, w[1:]))


def meander_path_length(m: MeanderElement, profile: RouteProfile) -> float:
    """Horizontal length of the discretised meander track (no transits)."""
    pts = insert_arc_transitions(trace_path(expand_meander(m), profile.alpha_arc), profile.d_arc)
    return _cumulative(pts)[-1]


# --------------------------------------------------------------------------
# export

CSV_HEADER = ("index", "x", "y", "z", "kind", "speed")


def route_to_csv(route: Route) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for i, w in enumerate(route.waypoints):
        wr.writerow([i, repr(w.x), repr(w.y), repr(w.z), w.kind.value, repr(w.speed)])
    return buf.getvalue()


def route_from_csv(text: str) -> Route:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"route CSV must start with header {','.join(CSV_HEADER)}")
    wps = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            _, x, y, z, kind, speed = row
            wps.append(Waypoint(float(x), float(y), float(z), WaypointKind(kind), float(speed)))
        except ValueError as exc:
            raise ValueError(f"route CSV line {n}: {exc}") from None
    return Route.build(wps)


def route_to_geojson(route: Route, origin_lat: float, origin_lon: float) -> dict:
    coords = []
    for w in route.waypoints:
        lat, lon = ned_to_geodetic(w.x, w.y, origin_lat, origin_lon)
        if not coords or coords[-1] != [lon, lat]:
            coords.append([lon, lat])
    return {
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": coords},
        "properties": {
            "waypoints": len(route.waypoints),
            "horizontal_length_m": route.horizontal_length,
            "surfacings": sum(w.kind is WaypointKind.SURFACE_START for w in route.waypoints),
        },
    }
