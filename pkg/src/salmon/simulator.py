"""Control-computer stand-in: reduced vehicle dynamics, navigation output and a nitrate plume.

The vehicle model has four degrees of freedom (surge, yaw, heave, pitch; roll
is frozen at zero). Motor order follows :data:`salmon.protocol.MOTOR_NAMES`.
Sign conventions: positive vertical PWM pushes the vehicle down, positive
pitch is nose up, and a lateral-pair differential (bow minus stern) pitches
the nose up. Main thrust grows with ``pwm * |pwm|`` so the steady speed is
linear in a common main command.
"""

from __future__ import annotations

import csv
import logging
import math
import random
import struct
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

from .geo import ned_to_geodetic, wrap_angle
from .protocol import (
    PWM_LIMIT,
    DecodeError,
    LlcCommand,
    LlcMode,
    LlcSetpointsCWolf,
    NavData,
    decode,
    encode,
)
from .transport import Port

log = logging.getLogger(__name__)

RHO = 1025.0
GPS_DEPTH = 0.3  # m, shallower than this the antenna gets a fix
MAX_PITCH = math.radians(45.0)
MIN_SPEED = -0.5


@dataclass(frozen=True)
class VehicleParams:
    length: float = 2.20
    diameter: float = 0.30
    mass: float = 135.0
    max_speed: float = 3.09  # 6 kn
    endurance_hours: float = 3.0
    payload_kg: float = 15.0
    drag_cd: float = 0.5  # axial drag coefficient on the frontal area
    added_mass_surge: float = 0.1  # fraction of dry mass
    motor_tau: float = 0.2  # s, first-order motor lag
    main_lever: float = 0.15  # m, half distance between the main propellers
    yaw_inertia: float = 30.0
    yaw_damping: float = 30.0
    lateral_thrust: float = 20.0  # N per tunnel thruster at full PWM
    lateral_lever: float = 0.8
    vertical_thrust: float = 25.0
    vertical_lever: float = 0.8
    pitch_inertia: float = 40.0
    pitch_damping: float = 60.0
    pitch_restoring: float = 20.0  # N m per unit sin(pitch), metacentric surrogate
    heave_mass: float = 270.0
    heave_damping: float = 100.0
    buoyancy: float = 1.0  # N of net upward force
    fade_start: float = 1.0  # m/s, vertical thrusters lose authority linearly above this
    fade_end: float = 2.0

    @property
    def frontal_area(self) -> float:
        return math.pi * (self.diameter / 2.0) ** 2

    @property
    def drag(self) -> float:
        """Quadratic surge drag c_d in N/(m/s)^2."""
        return 0.5 * RHO * self.drag_cd * self.frontal_area

    @property
    def surge_mass(self) -> float:
        return self.mass * (1.0 + self.added_mass_surge)

    @property
    def main_thrust(self) -> float:
        """Thrust of one main propeller at full PWM; two of them balance drag at max_speed."""
        return 0.5 * self.drag * self.max_speed**2

    def fade(self, u: float) -> float:
        if u <= self.fade_start:
            return 1.0
        if u >= self.fade_end:
            return 0.0
        return (self.fade_end - u) / (self.fade_end - self.fade_start)

    def violations(self) -> list[str]:
        return [f"{k} must be > 0" for k, v in vars(self).items() if not v > 0]


@dataclass
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    u: float = 0.0
    w: float = 0.0  # heave rate from the vertical thrusters, m/s down
    r: float = 0.0
    q: float = 0.0
    motors: list[float] = field(default_factory=lambda: [0.0] * 6)

    @property
    def roll(self) -> float:
        return 0.0

    def values(self) -> tuple:
        return (self.x, self.y, self.z, self.pitch, self.yaw, self.u, self.w, self.r, self.q, *self.motors)

    def copy(self) -> "VehicleState":
        return replace(self, motors=list(self.motors))


class SimulationError(ValueError):
    pass


def step_dynamics(state: VehicleState, setpoints: LlcSetpointsCWolf, dt: float,
                  params: VehicleParams = VehicleParams(), substeps: int = 4) -> VehicleState:
    """Advance ``state`` by ``dt`` seconds under constant PWM commands (returns a new state)."""
    if not 0 < dt <= 1:
        raise SimulationError(f"dt must lie in (0, 1], got {dt}")
    if any(math.isnan(v) for v in state.values()):
        raise SimulationError("NaN in vehicle state")
    pwm = setpoints.pwm
    if len(pwm) != 6 or any(abs(p) > PWM_LIMIT for p in pwm):
        raise SimulationError(f"setpoints out of range: {pwm}")
    cmd = [p / PWM_LIMIT for p in pwm]
    p = params
    h = dt / substeps
    lag = 1.0 - math.exp(-h / p.motor_tau)
    m = list(state.motors)
    x, y, z, th, psi, u, w, r, q = state.x, state.y, state.z, state.pitch, state.yaw, state.u, state.w, state.r, state.q
    c_d, m_u, t_main = p.drag, p.surge_mass, p.main_thrust
    for _ in range(substeps):
        for i in range(6):
            m[i] += (cmd[i] - m[i]) * lag
        t_port = t_main * m[0] * abs(m[0])
        t_stbd = t_main * m[1] * abs(m[1])
        fade = p.fade(u)
        v_bow = p.vertical_thrust * m[4] * fade
        v_stern = p.vertical_thrust * m[5] * fade

        du = (t_port + t_stbd - c_d * u * abs(u)) / m_u
        dr = (p.main_lever * (t_port - t_stbd) - p.yaw_damping * r) / p.yaw_inertia
        moment = p.lateral_lever * p.lateral_thrust * (m[2] - m[3]) + p.vertical_lever * (v_stern - v_bow)
        dq = (moment - p.pitch_restoring * math.sin(th) - p.pitch_damping * q) / p.pitch_inertia
        dw = (v_bow + v_stern - p.buoyancy - p.heave_damping * w) / p.heave_mass

        ct = math.cos(th)
        x += h * u * ct * math.cos(psi)
        y += h * u * ct * math.sin(psi)
        z += h * (w - u * math.sin(th))
        psi += h * r
        th += h * q
        u += h * du
        r += h * dr
        q += h * dq
        w += h * dw

        if z < 0.0:
            z = 0.0
            w = max(w, 0.0)
        u = min(max(u, MIN_SPEED), p.max_speed)
        if th > MAX_PITCH:
            th, q = MAX_PITCH, min(q, 0.0)
        elif th < -MAX_PITCH:
            th, q = -MAX_PITCH, max(q, 0.0)
    return VehicleState(x, y, z, th, wrap_angle(psi), u, w, r, q, m)


# --------------------------------------------------------------------------
# plume


@dataclass(frozen=True)
class PlumeField:
    source: tuple[float, float, float] = (76.0, 104.0, 10.0)
    peak: float = 800.0
    sigma: tuple[float, float, float] = (60.0, 60.0, 8.0)
    background: float = 5.0

    def violations(self) -> list[str]:
        out = []
        if not 0 <= self.peak <= 1000:
            out.append("plume peak must lie in [0, 1000]")
        if not all(s > 0 for s in self.sigma):
            out.append("plume sigmas must be > 0")
        if not self.background >= 0:
            out.append("plume background must be >= 0")
        return out


def sample_plume(plume: PlumeField, position) -> float:
    """Nitrate concentration in ug/l at ``position`` (x, y, depth), clamped to the sensor range."""
    e = 0.0
    for p, c, s in zip(position, plume.source, plume.sigma):
        e += (p - c) ** 2 / (2.0 * s * s)
    return min(max(plume.background + plume.peak * math.exp(-e), 0.0), 1000.0)


# --------------------------------------------------------------------------
# navigation output


@dataclass
class NavigationModel:
    """Dead reckoning with a seeded random walk while submerged, GPS reset at the surface."""

    origin_lat: float
    origin_lon: float
    seed: int = 0
    drift_rate: float = 0.03  # m / sqrt(s) per horizontal axis
    seabed_depth: float = 50.0
    dvl_range: float = 60.0

    def __post_init__(self):
        self.rng = random.Random(self.seed)
        self.est: Optional[tuple[float, float]] = None
        self._last: Optional[tuple[float, float]] = None

    def update(self, state: VehicleState, dt: float) -> tuple[float, float, bool]:
        """Estimated (x, y) after the vehicle moved to ``state``; third item is the GPS flag."""
        if state.z < GPS_DEPTH or self.est is None:
            self.est = (state.x, state.y)
            fix = state.z < GPS_DEPTH
        else:
            sd = self.drift_rate * math.sqrt(dt)
            lx, ly = self._last
            self.est = (
                self.est[0] + (state.x - lx) + self.rng.gauss(0.0, sd),
                self.est[1] + (state.y - ly) + self.rng.gauss(0.0, sd),
            )
            fix = False
        self._last = (state.x, state.y)
        return self.est[0], self.est[1], fix

    def emit(self, state: VehicleState, t: float, dt: float) -> NavData:
        x, y, fix = self.update(state, dt)
        lat, lon = ned_to_geodetic(x, y, self.origin_lat, self.origin_lon)
        hog = self.seabed_depth - state.z
        if hog > self.dvl_range:
            hog = math.nan
        return NavData(
            timestamp=t, latitude=lat, longitude=lon, depth=state.z, roll=0.0,
            pitch=state.pitch, yaw=state.yaw, speed=state.u, height_over_ground=hog, gps_fix=fix,
        )


# --------------------------------------------------------------------------
# simulator process


@dataclass
class SimConfig:
    seed: int = 1
    dt: float = 0.1
    realtime_factor: float = 0.0  # 0 runs as fast as possible
    max_time: float = 7200.0  # simulated seconds
    duration: Optional[float] = None  # fixed-length run, no control handshake needed
    control_wait: float = 30.0  # wall seconds to wait for LLC_Command Direct
    setpoint_timeout: float = 1.0  # wall seconds to wait for each setpoint in lockstep
    link_timeout: float = 5.0  # wall seconds without setpoints before giving up
    seabed_depth: float = 50.0
    dvl_range: float = 60.0
    drift_rate: float = 0.03
    plume: PlumeField = PlumeField()
    vehicle: VehicleParams = VehicleParams()
    initial: tuple[float, float, float] = (0.0, 0.0, 0.0)  # x, y, yaw

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.dt <= 1:
            out.append("simulator dt must lie in (0, 1]")
        if not self.realtime_factor >= 0:
            out.append("realtime_factor must be >= 0")
        if not self.max_time > 0:
            out.append("max_time must be > 0")
        if self.duration is not None and not self.duration > 0:
            out.append("duration must be > 0")
        if not self.drift_rate >= 0:
            out.append("drift_rate must be >= 0")
        return out + self.plume.violations() + self.vehicle.violations()


@dataclass
class SimOutcome:
    completed: bool  # control was handed back with NoControl
    reason: str
    ticks: int
    sim_time: float
    wall_time: float
    nav_sent: int
    setpoints_received: int
    missed_setpoints: int


STATE_HEADER = ("t", "x", "y", "z", "yaw", "pitch", "u")
_FRAME = struct.Struct("<dBH")
OUTBOUND, INBOUND = 0, 1


def read_telegram_log(path):
    """Yield ``(sim_time, direction, raw_bytes)`` frames from a telegram log."""
    data = Path(path).read_bytes()
    i = 0
    while i < len(data):
        if i + _FRAME.size > len(data):
            raise ValueError(f"truncated frame header at byte {i}")
        t, direction, n = _FRAME.unpack_from(data, i)
        i += _FRAME.size
        if i + n > len(data):
            raise ValueError(f"truncated frame at byte {i}")
        yield t, direction, data[i:i + n]
        i += n


class SimulatorNode:
    """Fixed-step loop: publish NAV_Data, take setpoints, step the dynamics.

    While Direct mode is active the loop runs in lockstep with the guidance:
    every tick waits for one setpoint telegram, so results do not depend on
    scheduling. ``pump`` is called whenever the loop waits for input; the
    single-threaded harness uses it to let the other programs run.
    """

    def __init__(self, port: Port, config: SimConfig, origin: tuple[float, float],
                 log_dir=None, pump: Callable[[], None] | None = None):
        problems = config.violations()
        if problems:
            raise SimulationError("; ".join(problems))
        self.port = port
        self.cfg = config
        self.pump = pump
        self.nav = NavigationModel(origin[0], origin[1], config.seed, config.drift_rate,
                                   config.seabed_depth, config.dvl_range)
        x0, y0, yaw0 = config.initial
        self.state = VehicleState(x=x0, y=y0, yaw=wrap_angle(yaw0))
        self.setpoints = LlcSetpointsCWolf()
        self.mode = LlcMode.NO_CONTROL
        self.handed_back = False
        self.ignored = 0
        self.malformed = 0
        self.log_dir = Path(log_dir) if log_dir is not None else None
        self._frames: list[bytes] = []
        self._rows: list[tuple] = []
        self._t = 0.0
        self.states: list[VehicleState] = []

    # -- telegram handling
    def _log_frame(self, direction: int, data: bytes):
        if self.log_dir is not None:
            self._frames.append(_FRAME.pack(self._t, direction, len(data)) + data)

    def _publish(self, telegram):
        data = encode(telegram)
        self._log_frame(OUTBOUND, data)
        self.port.send_bytes(data)

    def _handle(self, data: bytes) -> bool:
        """Apply one inbound datagram; True if it was a setpoint or a mode change."""
        try:
            t = decode(data)
        except DecodeError as exc:
            self.malformed += 1
            log.warning("simulator: malformed datagram: %s", exc)
            return False
        self._log_frame(INBOUND, data)
        if isinstance(t, LlcCommand):
            if t.mode is LlcMode.NO_CONTROL and self.mode is not LlcMode.NO_CONTROL:
                self.handed_back = True
            self.mode = t.mode
            return True
        if isinstance(t, LlcSetpointsCWolf):
            if self.mode is LlcMode.DIRECT:
                self.setpoints = t
                return True
            self.ignored += 1
            return False
        self.ignored += 1
        return False

    def _receive(self, timeout: float) -> bool:
        """Wait for one relevant telegram for up to ``timeout`` wall seconds."""
        deadline = time.monotonic() + timeout
        while True:
            if self.pump is not None:
                self.pump()
                data = self.port.receive_bytes(0)
            else:
                left = deadline - time.monotonic()
                data = self.port.receive_bytes(max(left, 0.0))
            if data is not None:
                if self._handle(data):
                    return True
                continue
            if self.pump is not None or time.monotonic() >= deadline:
                return False

    def _wait_for_control(self):
        deadline = time.monotonic() + self.cfg.control_wait
        while self.mode is not LlcMode.DIRECT:
            left = deadline - time.monotonic()
            if left <= 0 and self.pump is None:
                return
            got = self._receive(min(max(left, 0.0), 0.5))
            if self.pump is not None and not got:
                return

    # -- main loop
    def run(self) -> SimOutcome:
        cfg = self.cfg
        wall0 = time.monotonic()
        if cfg.duration is None:
            self._wait_for_control()
        n_max = int(round((cfg.duration if cfg.duration is not None else cfg.max_time) / cfg.dt))
        nav_sent = received = missed = 0
        silent_since = None
        reason = "max_time reached"
        k = 0
        pace0 = time.monotonic()
        while k < n_max:
            self._t = t = round(k * cfg.dt, 9)
            self._record(t)
            self._publish(self.nav.emit(self.state, t, cfg.dt))
            nav_sent += 1
            if self.mode is LlcMode.DIRECT:
                if self._receive(cfg.setpoint_timeout):
                    received += 1
                    silent_since = None
                else:
                    missed += 1
                    silent_since = silent_since or time.monotonic()
                    if time.monotonic() - silent_since >= cfg.link_timeout:
                        reason = "guidance silent"
                        break
            else:
                while True:
                    data = self.port.receive_bytes(0)
                    if data is None:
                        break
                    self._handle(data)
            if self.handed_back:
                reason = "control handed back"
                break
            self.state = step_dynamics(self.state, self.setpoints if self.mode is LlcMode.DIRECT
                                       else LlcSetpointsCWolf(), cfg.dt, cfg.vehicle)
            k += 1
            if cfg.realtime_factor > 0:
                ahead = pace0 + k * cfg.dt / cfg.realtime_factor - time.monotonic()
                if ahead > 0:
                    time.sleep(ahead)
        else:
            if cfg.duration is not None:
                reason = "duration elapsed"
        outcome = SimOutcome(
            completed=self.handed_back, reason=reason, ticks=k, sim_time=round(k * cfg.dt, 9),
            wall_time=time.monotonic() - wall0, nav_sent=nav_sent, setpoints_received=received,
            missed_setpoints=missed,
        )
        self.write_logs()
        return outcome

    def _record(self, t: float):
        s = self.state
        self.states.append(s)
        self._rows.append((t, s.x, s.y, s.z, s.yaw, s.pitch, s.u))

    def write_logs(self):
        if self.log_dir is None:
            return
        self.log_dir.mkdir(parents=True, exist_ok=True)
        with open(self.log_dir / "state.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(STATE_HEADER)
            for row in self._rows:
                wr.writerow([repr(v) for v in row])
        (self.log_dir / "telegrams.bin").write_bytes(b"".join(self._frames))
