"""Scientific-computer runtime: mission management, mode machine and autopilot.

The route is split into *sections* at every vertical transition (two
consecutive waypoints with the same horizontal position). Surface sections are
flown in ``SurfaceRun``; dive sections start with a thruster descent to
``z_min`` and are then flown diagonally on the propellers. Each section gets
its own spline so the reference never has to bend through a vertical step.

Control is event driven: exactly one ``LlcSetpointsCWolf`` per fresh NavData.
The core holds no wall-clock dependence, so the same NavData sequence always
produces the same setpoints.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional, Sequence

from .geo import geodetic_to_ned, wrap_angle
from .protocol import PWM_LIMIT, DecodeError, LlcCommand, LlcMode, LlcSetpointsCWolf, NavData, decode
from .route import Route, RouteProfile, Waypoint, WaypointKind
from .trajectory import SplineTrajectory
from .transport import Port

log = logging.getLogger(__name__)


class GuidanceMode(str, Enum):
    IDLE = "Idle"
    THRUSTER_DESCENT = "ThrusterDescent"
    DIAGONAL_TRANSIT = "DiagonalTransit"
    THRUSTER_ASCENT = "ThrusterAscent"
    SURFACE_RUN = "SurfaceRun"
    COMPLETE = "Complete"


M = GuidanceMode
TRANSITIONS: dict[GuidanceMode, frozenset] = {
    M.IDLE: frozenset({M.SURFACE_RUN, M.THRUSTER_DESCENT, M.COMPLETE}),
    M.SURFACE_RUN: frozenset({M.THRUSTER_DESCENT, M.COMPLETE}),
    M.THRUSTER_DESCENT: frozenset({M.DIAGONAL_TRANSIT, M.COMPLETE}),
    M.DIAGONAL_TRANSIT: frozenset({M.THRUSTER_ASCENT, M.COMPLETE}),
    M.THRUSTER_ASCENT: frozenset({M.SURFACE_RUN, M.COMPLETE}),
    M.COMPLETE: frozenset(),
}


def is_valid_path(modes: Sequence[GuidanceMode | str]) -> bool:
    seq = [GuidanceMode(m) for m in modes]
    return all(b in TRANSITIONS[a] for a, b in zip(seq, seq[1:]))


class GuidanceError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# gains and settings


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    i_limit: float = PWM_LIMIT  # anti-windup bound on the integral contribution


@dataclass(frozen=True)
class ControlGains:
    heading: PidGains = PidGains(1500.0, 20.0, 400.0)  # PWM per rad
    depth: PidGains = PidGains(600.0, 40.0, 300.0)  # PWM per m, thruster modes
    speed: PidGains = PidGains(300.0, 40.0, 0.0)  # PWM per m/s, on top of feed-forward
    pitch: PidGains = PidGains(2500.0, 200.0, 1500.0)  # PWM per rad, lateral pair
    depth_to_pitch: float = 0.15  # rad of pitch demand per m of depth error
    max_pitch_correction: float = 0.25  # rad
    max_pitch: float = 0.52  # rad, bound on the pitch demand
    lookahead_distance: float = 5.0

    def violations(self) -> list[str]:
        out = []
        for name in ("heading", "depth", "speed", "pitch"):
            g = getattr(self, name)
            if not all(math.isfinite(v) for v in (g.kp, g.ki, g.kd, g.i_limit)):
                out.append(f"{name} gains must be finite")
        if not all(math.isfinite(v) for v in (self.depth_to_pitch, self.max_pitch_correction, self.max_pitch)):
            out.append("depth_to_pitch gains must be finite")
        if not self.lookahead_distance > 0:
            out.append("lookahead_distance must be > 0")
        return out


@dataclass(frozen=True)
class GuidanceSettings:
    capture_radius: float = 3.0
    section_tolerance: float = 0.5  # m before a section end counts as reached
    thruster_speed: float = 0.3  # m/s while descending or ascending on thrusters
    descent_overshoot: float = 0.3  # m below z_min aimed at during a descent
    depth_tolerance: float = 0.1  # m, descent is over at z_min - tolerance
    surface_depth: float = 0.1  # m, ascent is over above this
    ascent_target: float = -0.5  # m, aim above the surface so the thrusters keep pushing
    min_spacing: float = 0.5  # m, closer route points are thinned before spline fitting
    projection_window: float = 6.0
    max_speed: float = 3.09
    watchdog: float = 5.0  # wall s without NavData before aborting (runtime only)

    def violations(self) -> list[str]:
        out = [f"{k} must be > 0" for k in ("capture_radius", "section_tolerance", "thruster_speed",
                                             "depth_tolerance", "surface_depth", "min_spacing",
                                             "projection_window", "max_speed", "watchdog")
               if not getattr(self, k) > 0]
        if not self.descent_overshoot >= 0:
            out.append("descent_overshoot must be >= 0")
        return out


class Pid:
    def __init__(self, gains: PidGains):
        self.g = gains
        self.reset()

    def reset(self):
        self.integral = 0.0
        self.prev: Optional[float] = None

    def update(self, error: float, dt: float, saturated_at: float = PWM_LIMIT) -> float:
        g = self.g
        d = 0.0 if self.prev is None or dt <= 0 else (error - self.prev) / dt
        self.prev = error
        p_term = g.kp * error + g.kd * d
        if g.ki:
            cand = self.integral + g.ki * error * dt
            # clamp the integrator and stop it growing while the output saturates
            if abs(p_term + cand) < saturated_at or abs(cand) < abs(self.integral):
                self.integral = min(max(cand, -g.i_limit), g.i_limit)
        return p_term + self.integral


def saturate(v: float) -> int:
    return int(min(max(round(v), -PWM_LIMIT), PWM_LIMIT))


# --------------------------------------------------------------------------
# route sections


@dataclass
class Section:
    kind: str  # "surface" or "dive"
    indices: list[int]  # route indices covered
    points: list[tuple[float, float, float]]  # thinned spline knots
    traj: Optional[SplineTrajectory]
    s_wp: list[float]  # arc parameter of each covered route waypoint
    gps_run: bool  # starts with a SurfaceStart: must cover its full length on the surface

    @property
    def length(self) -> float:
        return self.traj.total_length if self.traj is not None else 0.0

    @property
    def end(self) -> tuple[float, float, float]:
        return self.points[-1]


def _vertical(a: Waypoint, b: Waypoint) -> bool:
    return math.hypot(b.x - a.x, b.y - a.y) <= 1e-9 and a.z != b.z


def _thin(points, spacing):
    if len(points) == 1:
        return [points[0]]
    out = [points[0]]
    for p in points[1:-1]:
        if math.dist(p, out[-1]) >= spacing:
            out.append(p)
    while len(out) > 1 and math.dist(points[-1], out[-1]) < spacing:
        out.pop()
    if math.dist(points[-1], out[0]) > 1e-9:
        out.append(points[-1])
    return out


def build_sections(route: Route, min_spacing: float = 0.5) -> list[Section]:
    wps = route.waypoints
    if not wps:
        raise GuidanceError("empty route")
    groups: list[list[int]] = [[0]]
    for i in range(1, len(wps)):
        if _vertical(wps[i - 1], wps[i]):
            groups.append([i])
        else:
            groups[-1].append(i)
    sections = []
    for g in groups:
        pts = [(wps[i].x, wps[i].y, wps[i].z) for i in g]
        thinned = _thin(pts, min_spacing)
        traj = SplineTrajectory(thinned) if len(thinned) >= 2 else None
        s_wp, hint, prev = [], 0.0, pts[0]
        for p in pts:
            if traj is None:
                s_wp.append(0.0)
                continue
            reach = math.dist(p, prev) + max(2.0 * min_spacing, 1.0) + 5.0
            hint = max(hint, traj.project(p, hint, window=reach))
            s_wp.append(hint)
            prev = p
        kind = "dive" if any(wps[i].z > 0 for i in g) else "surface"
        gps = wps[g[0]].kind is WaypointKind.SURFACE_START
        sections.append(Section(kind, list(g), thinned, traj, s_wp, gps))
    return sections


def los_target(traj: SplineTrajectory, s: float, lookahead: float) -> tuple[float, float, float]:
    return traj.eval(min(s + lookahead, traj.total_length))


def los_heading(position, traj: SplineTrajectory, s_hint: float, lookahead: float,
                window: float = 25.0) -> float:
    """Heading (rad, NED) from ``position`` towards the point ``lookahead`` metres past its projection."""
    if traj is None or traj.total_length <= 0:
        raise GuidanceError("degenerate zero-length section")
    if not lookahead > 0:
        raise GuidanceError("lookahead must be > 0")
    s = traj.project(position, s_hint, window)
    tx, ty, _ = los_target(traj, s, lookahead)
    return wrap_angle(math.atan2(ty - position[1], tx - position[0]))


# --------------------------------------------------------------------------
# mission log


class MissionLog:
    """JSON-lines record of ticks and events; kept in memory, optionally streamed to a file."""

    def __init__(self, path=None):
        self.records: list[dict] = []
        self._fh = open(path, "w") if path is not None else None

    def write(self, rec: dict):
        self.records.append(rec)
        if self._fh is not None:
            self._fh.write(json.dumps(rec, allow_nan=True) + "\n")

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


@dataclass
class TrackerState:
    current_mode: GuidanceMode = GuidanceMode.IDLE
    s_hint: float = 0.0
    active_waypoint_index: int = 0
    submerged_distance_accumulator: float = 0.0
    last_nav: Optional[NavData] = None
    section: int = 0
    odometer: float = 0.0


@dataclass(frozen=True)
class Progress:
    mode: GuidanceMode
    waypoint_index: int
    fraction: float
    surfacings: int


# --------------------------------------------------------------------------
# autopilot


class Autopilot:
    """Maneuver processor plus autopilot bound to one output port."""

    def __init__(self, route: Route, port: Port, origin: tuple[float, float],
                 profile: RouteProfile = RouteProfile(), gains: ControlGains = ControlGains(),
                 settings: GuidanceSettings = GuidanceSettings(), mission_log: MissionLog | None = None):
        problems = gains.violations() + settings.violations()
        if problems:
            raise GuidanceError("; ".join(problems))
        self.route = route
        self.port = port
        self.origin = origin
        self.profile = profile
        self.gains = gains
        self.cfg = settings
        self.log = mission_log if mission_log is not None else MissionLog()
        self.sections = build_sections(route, settings.min_spacing)
        self._offsets = []
        acc = 0.0
        for sec in self.sections:
            self._offsets.append(acc)
            acc += sec.length
        self._total = acc
        self.state = TrackerState()
        self.heading_pid = Pid(gains.heading)
        self.depth_pid = Pid(gains.depth)
        self.speed_pid = Pid(gains.speed)
        self.pitch_pid = Pid(gains.pitch)
        self.activated = False
        self.shut_down = False
        self.aborted: Optional[str] = None
        self.last_setpoints = LlcSetpointsCWolf()
        self.mode_history: list[GuidanceMode] = [GuidanceMode.IDLE]
        self.transitions: list[tuple[float, GuidanceMode, GuidanceMode]] = []
        self.reached: list[int] = []
        self.surfacings = 0
        self.errors = 0
        self._fraction = 0.0
        self._pos: Optional[tuple[float, float, float]] = None
        self._pos_prev_dive: Optional[tuple[float, float, float]] = None
        self._borrow_s = 0.0

    # -- commands
    def activate(self, port: Port | None = None):
        if port is not None:
            self.port = port
        if self.activated:
            return
        self.activated = True
        self.port.send(LlcCommand(LlcMode.DIRECT))
        self.log.write({"event": "command", "mode": "Direct"})

    def shutdown(self):
        if not self.activated or self.shut_down:
            return
        self.shut_down = True
        self.port.send(LlcCommand(LlcMode.NO_CONTROL))
        self.log.write({"event": "command", "mode": "NoControl"})

    def abort(self, reason: str):
        if self.state.current_mode is not GuidanceMode.COMPLETE:
            self.aborted = reason
            self.log.write({"event": "abort", "reason": reason})
            self._set_mode(GuidanceMode.COMPLETE, self.state.last_nav.timestamp if self.state.last_nav else 0.0)
        self.shutdown()

    @property
    def mode(self) -> GuidanceMode:
        return self.state.current_mode

    @property
    def complete(self) -> bool:
        return self.state.current_mode is GuidanceMode.COMPLETE

    # -- reporting
    def mission_progress(self) -> Progress:
        st = self.state
        if st.current_mode is GuidanceMode.COMPLETE and self.aborted is None:
            return Progress(st.current_mode, len(self.route.waypoints) - 1, 1.0, self.surfacings)
        return Progress(st.current_mode, st.active_waypoint_index, self._fraction, self.surfacings)

    # -- internals
    def _set_mode(self, new: GuidanceMode, t: float):
        old = self.state.current_mode
        if new is old:
            return
        if new not in TRANSITIONS[old]:
            raise GuidanceError(f"illegal mode transition {old.value} -> {new.value}")
        self.state.current_mode = new
        self.mode_history.append(new)
        self.transitions.append((t, old, new))
        self.depth_pid.reset()
        self.pitch_pid.reset()
        self.log.write({"event": "mode", "t": t, "from": old.value, "to": new.value})

    def _mark_reached(self, upto: int, t: float):
        """Mark every route waypoint with index <= ``upto`` as reached."""
        start = self.reached[-1] + 1 if self.reached else 0
        for i in range(start, upto + 1):
            self.reached.append(i)
            self.log.write({"event": "waypoint", "t": t, "index": i})
        self.state.active_waypoint_index = min(upto + 1, len(self.route.waypoints) - 1)

    def _enter_section(self, k: int, s: float = 0.0):
        self.state.section = k
        self.state.s_hint = s
        self.state.odometer = 0.0
        self._borrow_s = 0.0

    def _project(self, sec: Section, pos, hint: float) -> float:
        if sec.traj is None:
            return 0.0
        return max(hint, sec.traj.project(pos, hint, self.cfg.projection_window))

    def _advance(self, sec: Section, pos, t: float) -> float:
        """Project onto the active section, update waypoint arrival; returns s."""
        st = self.state
        if sec.traj is None:
            return 0.0
        s = st.s_hint = self._project(sec, pos, st.s_hint)
        cap = self.cfg.capture_radius
        upto = None
        wps = self.route.waypoints
        for idx, s_w in zip(sec.indices, sec.s_wp):
            if self.reached and idx <= self.reached[-1]:
                continue
            w = wps[idx]
            if s >= s_w or math.dist(pos, (w.x, w.y, w.z)) <= cap:
                upto = idx
            else:
                break
        if upto is not None:
            self._mark_reached(upto, t)
        frac = (self._offsets[st.section] + s) / self._total if self._total > 0 else 0.0
        self._fraction = max(self._fraction, min(frac, 1.0))
        return s

    def _section_done(self, sec: Section, s: float) -> bool:
        return sec.traj is None or s >= sec.length - self.cfg.section_tolerance

    def _heading_to(self, sec: Section, s: float, pos, extend: bool = False) -> float:
        if sec.traj is None:
            return self._pos_heading()
        la = self.gains.lookahead_distance
        if extend and s + la > sec.length:
            # keep going straight past the end of the section (GPS run not yet long enough)
            ex, ey, _ = sec.traj.eval(sec.length)
            tx, ty, _ = sec.traj.eval_tangent(sec.length)
            n = math.hypot(tx, ty) or 1.0
            over = s + la - sec.length
            target = (ex + tx / n * over, ey + ty / n * over)
        else:
            target = los_target(sec.traj, s, la)
        return wrap_angle(math.atan2(target[1] - pos[1], target[0] - pos[0]))

    def _pos_heading(self) -> float:
        return self.state.last_nav.yaw if self.state.last_nav is not None else 0.0

    def _zero(self) -> LlcSetpointsCWolf:
        return LlcSetpointsCWolf()

    # -- main entry
    def step(self, nav: NavData) -> LlcSetpointsCWolf | None:
        """Consume one NavData; sends and returns the setpoints (None once the mission is over)."""
        if not self.activated:
            raise GuidanceError("autopilot not activated")
        st = self.state
        if self.complete:
            self.shutdown()
            return None
        if st.last_nav is not None and not nav.timestamp > st.last_nav.timestamp:
            return self.last_setpoints
        used = (nav.timestamp, nav.latitude, nav.longitude, nav.depth, nav.pitch, nav.yaw, nav.speed)
        if any(math.isnan(v) for v in used):
            self.errors += 1
            self.log.write({"event": "error", "t": nav.timestamp if math.isfinite(nav.timestamp) else None,
                            "reason": "NaN in NavData"})
            sp = self._zero()
            self.port.send(sp)
            self.last_setpoints = sp
            return sp

        dt = nav.timestamp - st.last_nav.timestamp if st.last_nav is not None else 0.0
        x, y = geodetic_to_ned(nav.latitude, nav.longitude, *self.origin)
        pos = (x, y, nav.depth)
        if self._pos is not None and st.current_mode is GuidanceMode.SURFACE_RUN:
            st.odometer += math.hypot(x - self._pos[0], y - self._pos[1])
        self._pos = pos
        st.last_nav = nav
        t = nav.timestamp

        sp = self._control(nav, pos, dt, t)
        if sp is None:
            self.shutdown()
            self._tick_log(nav, None)
            return None
        self.port.send(sp)
        self.last_setpoints = sp
        self._tick_log(nav, sp)
        return sp

    def _tick_log(self, nav: NavData, sp):
        st = self.state
        self.log.write({
            "t": nav.timestamp, "mode": st.current_mode.value, "wp": st.active_waypoint_index,
            "section": st.section, "s": st.s_hint,
            "nav": [nav.latitude, nav.longitude, nav.depth, nav.pitch, nav.yaw, nav.speed, nav.gps_fix],
            "pwm": list(sp.pwm) if sp is not None else None,
        })

    def _control(self, nav: NavData, pos, dt: float, t: float) -> LlcSetpointsCWolf | None:
        st = self.state
        cfg = self.cfg
        M = GuidanceMode
        secs = self.sections

        if st.current_mode is M.IDLE:
            self._enter_section(0)
            self._set_mode(M.THRUSTER_DESCENT if secs[0].kind == "dive" else M.SURFACE_RUN, t)
            if secs[0].kind != "dive":
                self._mark_reached(secs[0].indices[0], t)

        # mode transitions, possibly several in one tick
        for _ in range(4):
            sec = secs[st.section]
            last = st.section == len(secs) - 1
            if st.current_mode is M.SURFACE_RUN:
                s = self._advance(sec, pos, t)
                need = sec.length if sec.gps_run else 0.0
                fin = self.route.waypoints[-1]
                at_goal = last and math.hypot(pos[0] - fin.x, pos[1] - fin.y) <= cfg.capture_radius
                if at_goal or (self._section_done(sec, s) and st.odometer >= need - cfg.section_tolerance):
                    if last:
                        self._mark_reached(len(self.route.waypoints) - 1, t)
                        self._set_mode(M.COMPLETE, t)
                        return None
                    self._mark_reached(sec.indices[-1], t)
                    self._enter_section(st.section + 1, self._borrow_s)
                    self._set_mode(M.THRUSTER_DESCENT, t)
                    continue
            elif st.current_mode is M.THRUSTER_DESCENT:
                if nav.depth >= self.profile.z_min - cfg.depth_tolerance:
                    self._mark_reached(sec.indices[0], t)
                    st.submerged_distance_accumulator = 0.0
                    self._set_mode(M.DIAGONAL_TRANSIT, t)
                    continue
            elif st.current_mode is M.DIAGONAL_TRANSIT:
                s = self._advance(sec, pos, t)
                if self._section_done(sec, s):
                    self._mark_reached(sec.indices[-1], t)
                    if not last:
                        self._enter_section(st.section + 1)
                    self._set_mode(M.THRUSTER_ASCENT, t)
                    continue
            elif st.current_mode is M.THRUSTER_ASCENT:
                if nav.depth < cfg.surface_depth:
                    if last and secs[st.section].kind == "dive":
                        self._set_mode(M.COMPLETE, t)
                        return None
                    if self.route.waypoints[sec.indices[0]].kind is WaypointKind.SURFACE_START:
                        self.surfacings += 1
                    self._mark_reached(sec.indices[0], t)
                    st.submerged_distance_accumulator = 0.0
                    self._set_mode(M.SURFACE_RUN, t)
                    continue
            break

        sec = secs[st.section]
        mode = st.current_mode
        g = self.gains
        if mode is M.DIAGONAL_TRANSIT and self._pos_prev_dive is not None:
            st.submerged_distance_accumulator += math.dist(self._pos_prev_dive, pos)
        self._pos_prev_dive = pos if mode is M.DIAGONAL_TRANSIT else None

        # references
        if mode is M.SURFACE_RUN:
            s = st.s_hint
            need = sec.length if sec.gps_run else 0.0
            short = st.odometer < need and self._section_done(sec, s)
            if short and st.section + 1 < len(secs):
                # GPS run not long enough yet: carry on along the next section, still surfaced
                nxt = secs[st.section + 1]
                self._borrow_s = self._project(nxt, (pos[0], pos[1], 0.0), self._borrow_s)
                heading = self._heading_to(nxt, self._borrow_s, pos)
            else:
                heading = self._heading_to(sec, s, pos, extend=short)
            speed_ref = self._speed_ref(sec, s)
            pitch_ref = 0.0
            vertical = 0.0
        elif mode is M.DIAGONAL_TRANSIT:
            s = st.s_hint
            heading = self._heading_to(sec, s, pos)
            speed_ref = self._speed_ref(sec, s)
            _, _, z_ref = sec.traj.eval(s)
            tz = sec.traj.eval_tangent(s)[2]
            ff = -math.asin(max(-1.0, min(1.0, tz)))
            corr = g.depth_to_pitch * (nav.depth - z_ref)
            corr = max(-g.max_pitch_correction, min(g.max_pitch_correction, corr))
            pitch_ref = max(-g.max_pitch, min(g.max_pitch, ff + corr))
            vertical = 0.0
        else:
            # thruster modes: slow, hold the track, depth on the vertical pair
            s = st.s_hint = self._project(sec, pos, st.s_hint)
            heading = self._heading_to(sec, s, pos)
            speed_ref = cfg.thruster_speed
            pitch_ref = 0.0
            z_target = (self.profile.z_min + cfg.descent_overshoot if mode is M.THRUSTER_DESCENT
                        else cfg.ascent_target)
            vertical = self.depth_pid.update(z_target - nav.depth, dt)

        e_psi = wrap_angle(heading - nav.yaw)
        diff = self.heading_pid.update(e_psi, dt)
        common = PWM_LIMIT * speed_ref / cfg.max_speed + self.speed_pid.update(speed_ref - nav.speed, dt)
        lat = self.pitch_pid.update(pitch_ref - nav.pitch, dt)
        pwm = (
            saturate(common + diff),
            saturate(common - diff),
            saturate(lat),
            saturate(-lat),
            saturate(vertical),
            saturate(vertical),
        )
        return LlcSetpointsCWolf(pwm)


    def _speed_ref(self, sec: Section, s: float) -> float:
        wps = self.route.waypoints
        for idx, s_w in zip(sec.indices, sec.s_wp):
            if s_w >= s:
                return wps[idx].speed
        return wps[sec.indices[-1]].speed


# --------------------------------------------------------------------------
# process wrapper


class ScientificComputer:
    """Feeds NavData from a port into an :class:`Autopilot`; watches for navigation loss."""

    def __init__(self, autopilot: Autopilot, port: Port):
        self.autopilot = autopilot
        self.port = port
        self.nav_count = 0
        self.other = 0

    def handle(self, telegram):
        if isinstance(telegram, NavData):
            self.nav_count += 1
            self.autopilot.step(telegram)
        else:
            self.other += 1

    def drain(self):
        while True:
            data = self.port.receive_bytes(0)
            if data is None:
                return
            try:
                self.handle(decode(data))
            except DecodeError as exc:
                log.warning("guidance: malformed datagram: %s", exc)

    def run(self, stop=None, clock=None) -> str:
        """Blocking loop until the mission completes, navigation is lost, or ``stop`` is set."""
        clock = clock or time.monotonic
        ap = self.autopilot
        ap.activate()
        last = clock()
        while not ap.complete:
            if stop is not None and stop.is_set():
                ap.abort("stopped")
                return "stopped"
            data = self.port.receive_bytes(0.2)
            now = clock()
            if data is None:
                if now - last > ap.cfg.watchdog:
                    ap.abort("navigation lost")
                    return "navigation lost"
                continue
            try:
                t = decode(data)
            except DecodeError as exc:
                log.warning("guidance: malformed datagram: %s", exc)
                continue
            if isinstance(t, NavData):
                last = now
            self.handle(t)
        ap.shutdown()
        return "aborted: " + ap.aborted if ap.aborted else "complete"


def progress_dict(p: Progress) -> dict:
    d = asdict(p)
    d["mode"] = p.mode.value
    return d
