"""Offline checks over a run's log directory.

Expected files: ``state.csv``, ``telegrams.bin``, ``mission.jsonl``,
``measurements.csv``, ``route.csv`` and ``run.json``. Every check appends a
human-readable violation string; an empty list means the run is clean.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .guidance import TRANSITIONS, GuidanceMode
from .measurement import CSV_HEADER as MEAS_HEADER
from .measurement import MAX_NAV_AGE, SensorConfig
from .protocol import PWM_LIMIT, DecodeError, LlcCommand, LlcMode, LlcSetpointsCWolf, NavData, decode
from .route import Route, route_from_csv
from .simulator import GPS_DEPTH, INBOUND, MAX_PITCH, MIN_SPEED, STATE_HEADER, VehicleParams, read_telegram_log

LOG_FILES = ("state.csv", "telegrams.bin", "mission.jsonl", "measurements.csv", "route.csv", "run.json")


class LogError(ValueError):
    """Log directory missing or unreadable."""


@dataclass
class Report:
    violations: list[str] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


# --------------------------------------------------------------------------
# geometry


def horizontal_segments(route: Route) -> np.ndarray:
    """(n, 4) array of x0, y0, x1, y1 for every non-vertical route segment."""
    w = route.waypoints
    segs = [(a.x, a.y, b.x, b.y) for a, b in zip(w, w[1:]) if math.hypot(b.x - a.x, b.y - a.y) > 1e-9]
    if not segs:
        raise ValueError("route has no horizontal extent")
    return np.asarray(segs, dtype=float)


def cross_track_errors(xy, route: Route) -> np.ndarray:
    """Horizontal distance from each point to the nearest route segment."""
    segs = horizontal_segments(route)
    p = np.asarray(xy, dtype=float).reshape(-1, 2)
    a, b = segs[:, :2], segs[:, 2:]
    d = b - a
    l2 = (d**2).sum(axis=1)
    rel = p[:, None, :] - a[None, :, :]
    f = np.clip((rel * d[None]).sum(axis=2) / l2[None], 0.0, 1.0)
    foot = a[None] + f[..., None] * d[None]
    return np.sqrt(((p[:, None, :] - foot) ** 2).sum(axis=2)).min(axis=1)


@dataclass(frozen=True)
class Surfacing:
    t_start: float
    t_end: float
    span: float  # horizontal distance covered while shallower than the GPS depth
    terminal: bool  # the run ended while still on the surface


def surfacings(t, x, y, z, depth: float = GPS_DEPTH) -> list[Surfacing]:
    """Contiguous shallow intervals that follow a submerged stretch."""
    out = []
    been_down = False
    start = None
    dist = 0.0
    for i in range(len(t)):
        shallow = z[i] < depth
        if not shallow:
            if start is not None:
                out.append(Surfacing(t[start], t[i - 1], dist, False))
                start = None
            been_down = True
            continue
        if start is None and been_down:
            start, dist = i, 0.0
        elif start is not None:
            dist += math.hypot(x[i] - x[i - 1], y[i] - y[i - 1])
    if start is not None:
        out.append(Surfacing(t[start], t[-1], dist, True))
    return out


# --------------------------------------------------------------------------
# readers


def read_state(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != STATE_HEADER:
        raise LogError(f"{path}: bad header")
    data = np.asarray([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, len(STATE_HEADER))
    return {name: data[:, i] for i, name in enumerate(STATE_HEADER)}


def read_mission_log(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise LogError(f"{path}:{n}: {exc}") from None
    return out


# --------------------------------------------------------------------------
# checks


def check_state(state, report: Report, params: VehicleParams = VehicleParams()):
    z, pitch, u = state["z"], state["pitch"], state["u"]
    if len(z) and z.min() < 0:
        report.violations.append(f"state: depth below surface ({z.min():.3g} m)")
    if len(pitch) and np.abs(pitch).max() > MAX_PITCH + 1e-9:
        report.violations.append(f"state: |pitch| above 45 deg ({math.degrees(np.abs(pitch).max()):.2f})")
    if len(u) and (u.min() < MIN_SPEED - 1e-9 or u.max() > params.max_speed + 1e-9):
        report.violations.append("state: speed outside [-0.5, max_speed]")


def check_mission_log(records: list[dict], report: Report, z_min: float, tol: float = 0.3):
    modes = [GuidanceMode.IDLE]
    ticks = [r for r in records if "pwm" in r]
    for r in records:
        if r.get("event") == "mode":
            try:
                modes.append(GuidanceMode(r["to"]))
            except ValueError:
                report.violations.append(f"mission log: unknown mode {r['to']!r}")
    for a, b in zip(modes, modes[1:]):
        if b not in TRANSITIONS[a]:
            report.violations.append(f"mode machine: illegal transition {a.value} -> {b.value}")
    for r in ticks:
        pwm = r["pwm"]
        if pwm is None:
            continue
        if len(pwm) != 6 or any(abs(v) > PWM_LIMIT for v in pwm):
            report.violations.append(f"PWM saturation: t={r['t']} pwm={pwm}")
            break
    # descent must start near the surface, never below z_min
    prev_mode = "Idle"
    for r in ticks:
        if r["mode"] == GuidanceMode.THRUSTER_DESCENT.value and prev_mode != r["mode"]:
            depth = r["nav"][2]
            if depth > z_min + tol:
                report.violations.append(f"mode machine: ThrusterDescent started at depth {depth:.2f} m")
        prev_mode = r["mode"]
    report.metrics["modes"] = [m.value for m in modes]
    report.metrics["final_mode"] = modes[-1].value
    report.metrics["setpoint_ticks"] = sum(1 for r in ticks if r["pwm"] is not None)


def check_telegrams(frames, report: Report):
    """Direct-mode safety, PWM bounds and GPS gating from the simulator's telegram log."""
    mode = LlcMode.NO_CONTROL
    ended = False
    navs: list[float] = []
    for t, direction, raw in frames:
        try:
            tel = decode(raw)
        except DecodeError as exc:
            report.violations.append(f"telegram log: malformed frame at t={t}: {exc}")
            continue
        if direction == INBOUND:
            if isinstance(tel, LlcCommand):
                if tel.mode is LlcMode.NO_CONTROL and mode is not LlcMode.NO_CONTROL:
                    ended = True
                mode = tel.mode
            elif isinstance(tel, LlcSetpointsCWolf):
                if mode is not LlcMode.DIRECT or ended:
                    report.violations.append(f"direct-mode safety: setpoints at t={t} outside Direct mode")
        elif isinstance(tel, NavData):
            navs.append(tel.timestamp)
            if tel.gps_fix and not tel.depth < GPS_DEPTH:
                report.violations.append(f"GPS gating: fix reported at depth {tel.depth:.2f} m")
    report.metrics["nav_telegrams"] = len(navs)
    return navs


def check_measurements(path, navs: list[float], report: Report, cfg: SensorConfig = SensorConfig()):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != MEAS_HEADER:
        report.violations.append("measurements: bad header")
        return
    rows = rows[1:]
    counts = dict.fromkeys(("nano3", "o2", "cond", "temp"), 0)
    nav_arr = np.asarray(sorted(navs)) if navs else np.zeros(0)
    for r in rows:
        t = float(r[0])
        for name, raw in zip(counts, r[4:8]):
            if raw == "":
                continue
            counts[name] += 1
            v, spec = float(raw), cfg.channel(name)
            if not spec.lo <= v <= spec.hi:
                report.violations.append(f"measurement range: {name}={v} at t={t}")
        if len(nav_arr):
            k = np.searchsorted(nav_arr, t, side="right") - 1
            if k < 0 or t - nav_arr[k] > MAX_NAV_AGE:
                report.violations.append(f"position freshness: sample at t={t} has no fix within 1 s")
    report.metrics["measurement_rows"] = len(rows)
    report.metrics["channel_counts"] = counts
    if navs and rows:
        window = (len(navs)) * _dt(navs)
        fast_lo = math.floor(window / cfg.o2.period)
        nit_lo = math.floor(window / cfg.nano3.period)
        for name, lo in (("o2", fast_lo), ("cond", fast_lo), ("temp", fast_lo), ("nano3", nit_lo)):
            if counts[name] not in (lo, lo + 1):
                report.violations.append(f"cadence: {name} has {counts[name]} samples, expected {lo} or {lo + 1}")


def _dt(navs):
    return (navs[-1] - navs[0]) / (len(navs) - 1) if len(navs) > 1 else 0.0


def analyze(log_dir, depth_profile: bool = True) -> Report:
    d = Path(log_dir)
    if not d.is_dir():
        raise LogError(f"{d} is not a directory")
    missing = [f for f in LOG_FILES if not (d / f).is_file()]
    if len(missing) == len(LOG_FILES):
        raise LogError(f"{d} contains no run logs")
    report = Report()
    for f in missing:
        report.violations.append(f"missing log file {f}")
    run = json.loads((d / "run.json").read_text()) if "run.json" not in missing else {}
    z_min = run.get("z_min", 1.0)
    l_gps = run.get("l_gps", 30.0)

    state = read_state(d / "state.csv") if "state.csv" not in missing else None
    route = route_from_csv((d / "route.csv").read_text()) if "route.csv" not in missing else None
    if state is not None:
        check_state(state, report)
        report.metrics["sim_time"] = float(state["t"][-1]) if len(state["t"]) else 0.0
        events = surfacings(state["t"], state["x"], state["y"], state["z"])
        report.metrics["surfacings"] = [(e.t_start, e.t_end, round(e.span, 3)) for e in events]
        for e in events:
            if e.span < l_gps and not e.terminal:
                report.violations.append(
                    f"surfacing span: {e.span:.1f} m < l_gps={l_gps} m (t={e.t_start:.1f}..{e.t_end:.1f})")
        if route is not None and len(state["x"]):
            xt = cross_track_errors(np.column_stack([state["x"], state["y"]]), route)
            report.metrics["cross_track_rms"] = float(np.sqrt(np.mean(xt**2)))
            report.metrics["cross_track_max"] = float(xt.max())
            if depth_profile:
                with open(d / "depth_profile.csv", "w", newline="") as fh:
                    wr = csv.writer(fh, lineterminator="\n")
                    wr.writerow(("t", "depth", "cross_track"))
                    for t, z, e in zip(state["t"], state["z"], xt):
                        wr.writerow((repr(float(t)), repr(float(z)), repr(float(e))))
    if "mission.jsonl" not in missing:
        check_mission_log(read_mission_log(d / "mission.jsonl"), report, z_min)
    navs: list[float] = []
    if "telegrams.bin" not in missing:
        try:
            navs = check_telegrams(read_telegram_log(d / "telegrams.bin"), report)
        except ValueError as exc:
            report.violations.append(f"telegram log: {exc}")
    if "measurements.csv" not in missing:
        check_measurements(d / "measurements.csv", navs, report)
    return report
