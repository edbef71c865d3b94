"""Mission plan model and the ``.mis`` plan-file format.

A plan is an ordered list of elements: an ``initial`` element, any number of
base manoeuvres (``waypoint``, ``line``, ``arc``) and ``meander`` survey
patterns, and a ``final`` element. Coordinates are local metres about the
plan origin, x North and y East; depth z is positive down. Angles in the file
are degrees.

File layout::

    [mission]
    name = fjord survey
    origin_lat = 60.39
    origin_lon = 5.32

    [element.1]
    type = initial
    x = 0
    y = 0

    [element.2]
    type = meander
    x = 20
    ...
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields
from typing import Union

from .kvfile import KVSyntaxError, read_sections, write_sections


class PlanError(ValueError):
    """Base class for everything :func:`parse_plan` can raise."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class PlanSyntaxError(PlanError):
    pass


class UnknownElementError(PlanError):
    pass


class MissingKeyError(PlanError):
    def __init__(self, section: str, key: str, line: int | None = None):
        self.section = section
        self.key = key
        super().__init__(f"[{section}] missing required key {key!r}", line)


class PlanValueError(PlanError):
    pass


class OrderingError(PlanError):
    pass


@dataclass(frozen=True)
class Initial:
    x: float
    y: float


@dataclass(frozen=True)
class Final:
    x: float
    y: float


@dataclass(frozen=True)
class WaypointElement:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Line:
    x1: float
    y1: float
    x2: float
    y2: float
    z: float


@dataclass(frozen=True)
class Arc:
    """Circular arc; angles are bearings from the centre, degrees, swept start -> end."""

    cx: float
    cy: float
    radius: float
    start_angle: float
    end_angle: float
    z: float


@dataclass(frozen=True)
class MeanderElement:
    x_meander: float
    y_meander: float
    z_max: float
    theta_meander: float
    l_leg: float
    d_leg: float
    n_legs: int


MissionElement = Union[Initial, Final, WaypointElement, Line, Arc, MeanderElement]


@dataclass(frozen=True)
class MissionPlan:
    name: str
    origin_lat: float
    origin_lon: float
    elements: tuple[MissionElement, ...]


# file key -> dataclass field, per element type
_ELEMENT_KEYS: dict[str, tuple[type, dict[str, str]]] = {
    "initial": (Initial, {"x": "x", "y": "y"}),
    "final": (Final, {"x": "x", "y": "y"}),
    "waypoint": (WaypointElement, {"x": "x", "y": "y", "z": "z"}),
    "line": (Line, {"x1": "x1", "y1": "y1", "x2": "x2", "y2": "y2", "z": "z"}),
    "arc": (
        Arc,
        {
            "cx": "cx",
            "cy": "cy",
            "radius": "radius",
            "start_angle": "start_angle",
            "end_angle": "end_angle",
            "z": "z",
        },
    ),
    "meander": (
        MeanderElement,
        {
            "x": "x_meander",
            "y": "y_meander",
            "z_max": "z_max",
            "rotation_deg": "theta_meander",
            "leg_length": "l_leg",
            "leg_distance": "d_leg",
            "n_legs": "n_legs",
        },
    ),
}
_TYPE_NAMES = {cls: name for name, (cls, _) in _ELEMENT_KEYS.items()}
_MISSION_KEYS = ("name", "origin_lat", "origin_lon")
_SECTION_RE = re.compile(r"^\[([^\]]*)\]")
_ELEMENT_RE = re.compile(r"^element\.([0-9]+)$")


def _section_lines(text: str) -> dict[str, int]:
    lines = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(raw)
        if m:
            lines.setdefault(m.group(1), no)
    return lines


def _number(section: str, key: str, raw: str, line: int | None, integer=False):
    try:
        value = int(raw) if integer else float(raw)
    except ValueError:
        kind = "an integer" if integer else "a number"
        raise PlanValueError(f"[{section}] {key} must be {kind}, got {raw!r}", line) from None
    if not integer and not math.isfinite(value):
        raise PlanValueError(f"[{section}] {key} must be finite, got {raw!r}", line)
    return value


def parse_plan(text: str | bytes) -> MissionPlan:
    """Parse plan-file content into a :class:`MissionPlan`.

    Raises a :class:`PlanError` subclass on syntax errors, unknown element
    types, missing or malformed keys, non-consecutive element numbering, and
    when the plan does not start with ``initial`` and end with ``final``.
    """
    try:
        sections = read_sections(text)
    except KVSyntaxError as exc:
        raise PlanSyntaxError(str(exc).split(": ", 1)[-1], exc.line) from None
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    where = _section_lines(text)

    if "mission" not in sections:
        raise PlanSyntaxError("missing [mission] section")
    mission = sections["mission"]
    mline = where.get("mission")
    for key in _MISSION_KEYS:
        if key not in mission:
            raise MissingKeyError("mission", key, mline)
    extra = set(mission) - set(_MISSION_KEYS)
    if extra:
        raise PlanSyntaxError(f"[mission] unknown key {sorted(extra)[0]!r}", mline)

    numbered = {}
    for name in sections:
        if name == "mission":
            continue
        m = _ELEMENT_RE.match(name)
        if not m:
            raise PlanSyntaxError(f"unexpected section [{name}]", where.get(name))
        idx = int(m.group(1))
        if idx in numbered:
            raise PlanSyntaxError(f"duplicate element index {idx}", where.get(name))
        numbered[idx] = name
    if sorted(numbered) != list(range(1, len(numbered) + 1)):
        raise PlanSyntaxError("element sections must be numbered consecutively from 1")

    elements = []
    for idx in range(1, len(numbered) + 1):
        name = numbered[idx]
        items = sections[name]
        line = where.get(name)
        if "type" not in items:
            raise MissingKeyError(name, "type", line)
        etype = items["type"].strip().lower()
        if etype not in _ELEMENT_KEYS:
            raise UnknownElementError(f"[{name}] unknown element type {items['type']!r}", line)
        cls, keymap = _ELEMENT_KEYS[etype]
        unknown = set(items) - set(keymap) - {"type"}
        if unknown:
            raise PlanSyntaxError(f"[{name}] unknown key {sorted(unknown)[0]!r} for {etype}", line)
        kwargs = {}
        for key, field_name in keymap.items():
            if key not in items:
                raise MissingKeyError(name, key, line)
            kwargs[field_name] = _number(name, key, items[key], line, integer=field_name == "n_legs")
        elements.append(cls(**kwargs))

    if not elements or not isinstance(elements[0], Initial):
        raise OrderingError("first element must be of type initial")
    if len(elements) < 2 or not isinstance(elements[-1], Final):
        raise OrderingError("last element must be of type final")
    for el in elements[1:-1]:
        if isinstance(el, (Initial, Final)):
            raise OrderingError("initial/final elements may only appear first/last")

    return MissionPlan(
        name=mission["name"],
        origin_lat=_number("mission", "origin_lat", mission["origin_lat"], mline),
        origin_lon=_number("mission", "origin_lon", mission["origin_lon"], mline),
        elements=tuple(elements),
    )


def _fmt(value) -> str:
    return str(value) if isinstance(value, int) else repr(float(value))


def serialize_plan(plan: MissionPlan) -> str:
    sections: dict[str, dict[str, str]] = {
        "mission": {
            "name": plan.name,
            "origin_lat": _fmt(plan.origin_lat),
            "origin_lon": _fmt(plan.origin_lon),
        }
    }
    for i, el in enumerate(plan.elements, start=1):
        etype = _TYPE_NAMES[type(el)]
        _, keymap = _ELEMENT_KEYS[etype]
        items = {"type": etype}
        for key, field_name in keymap.items():
            items[key] = _fmt(getattr(el, field_name))
        sections[f"element.{i}"] = items
    return write_sections(sections)


def validate_plan(plan: MissionPlan) -> list[str]:
    """Return the list of invariant violations; empty means the plan is valid."""
    out = []
    if plan.name != plan.name.strip() or "\n" in plan.name or "\r" in plan.name:
        out.append("mission: name must be a single line without surrounding whitespace")
    if not (math.isfinite(plan.origin_lat) and -90.0 <= plan.origin_lat <= 90.0):
        out.append("mission: origin_lat must lie in [-90, 90]")
    if not (math.isfinite(plan.origin_lon) and -180.0 <= plan.origin_lon < 180.0):
        out.append("mission: origin_lon must lie in [-180, 180)")

    els = plan.elements
    if not els or not isinstance(els[0], Initial):
        out.append("plan: first element must be initial")
    if len(els) < 2 or not isinstance(els[-1], Final):
        out.append("plan: last element must be final")
    for i, el in enumerate(els, start=1):
        tag = f"element.{i}"
        if 1 < i < len(els) and isinstance(el, (Initial, Final)):
            out.append(f"{tag}: initial/final only allowed first/last")
        for f in fields(el):
            v = getattr(el, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                out.append(f"{tag}: {f.name} must be finite")
        if isinstance(el, (WaypointElement, Line, Arc)) and el.z < 0:
            out.append(f"{tag}: z must be >= 0")
        if isinstance(el, Line) and (el.x1, el.y1) == (el.x2, el.y2):
            out.append(f"{tag}: line endpoints must be distinct")
        if isinstance(el, Arc):
            if not el.radius > 0:
                out.append(f"{tag}: radius must be > 0")
            if el.start_angle == el.end_angle:
                out.append(f"{tag}: arc sweep must be non-zero")
        if isinstance(el, MeanderElement):
            if not el.z_max > 0:
                out.append(f"{tag}: z_max must be > 0")
            if not el.l_leg > 0:
                out.append(f"{tag}: l_leg must be > 0")
            if not el.d_leg > 0:
                out.append(f"{tag}: d_leg must be > 0")
            if not (isinstance(el.n_legs, int) and el.n_legs >= 1):
                out.append(f"{tag}: n_legs must be an integer >= 1")
    return out


def load_plan(path) -> MissionPlan:
    with open(path, "rb") as fh:
        return parse_plan(fh.read())
