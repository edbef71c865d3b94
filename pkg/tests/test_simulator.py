import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salmon.geo import geodetic_to_ned
from salmon.protocol import LlcCommand, LlcMode, LlcSetpointsCWolf, NavData, decode
from salmon.simulator import (
    GPS_DEPTH,
    INBOUND,
    MAX_PITCH,
    MIN_SPEED,
    NavigationModel,
    PlumeField,
    SimConfig,
    SimulationError,
    SimulatorNode,
    VehicleParams,
    VehicleState,
    read_telegram_log,
    sample_plume,
    step_dynamics,
)
from salmon.transport import MemoryPort

ZERO = LlcSetpointsCWolf()
FULL = LlcSetpointsCWolf((1000, 1000, 0, 0, 0, 0))
ORIGIN = (60.3913, 5.3221)


def run(state, pwm, seconds, dt=0.1):
    for _ in range(int(round(seconds / dt))):
        state = step_dynamics(state, pwm, dt)
    return state


def test_zero_pwm_from_rest_is_equilibrium():
    s0 = VehicleState(x=5.0, y=-3.0, yaw=0.4)
    s1 = run(s0, ZERO, 10.0)
    assert (s1.x, s1.y, s1.z, s1.yaw, s1.u) == (5.0, -3.0, 0.0, 0.4, 0.0)


def test_full_throttle_calibration():
    p = VehicleParams()
    # fixed point of m du/dt = 2 T - c_d u^2
    u_star = math.sqrt(2 * p.main_thrust / p.drag)
    assert u_star == pytest.approx(3.09, rel=1e-12)
    s = run(VehicleState(), FULL, 120.0)
    assert s.u == pytest.approx(3.09, rel=0.02)
    assert s.u <= p.max_speed


def test_constant_speed_kinematics():
    u = 1.5
    # hold speed with the thrust that balances drag exactly
    p = VehicleParams(motor_tau=1e-9)
    pwm_frac = math.sqrt(p.drag * u * u / 2 / p.main_thrust)
    pwm = round(1000 * pwm_frac)
    s = VehicleState(u=u)
    s.motors = [pwm / 1000, pwm / 1000, 0, 0, 0, 0]
    for _ in range(100):
        s = step_dynamics(s, LlcSetpointsCWolf((pwm, pwm, 0, 0, 0, 0)), 0.1, p)
    assert s.x == pytest.approx(15.0, abs=0.02)
    assert abs(s.y) < 1e-12


def test_step_errors():
    with pytest.raises(SimulationError):
        step_dynamics(VehicleState(), ZERO, 0.0)
    with pytest.raises(SimulationError):
        step_dynamics(VehicleState(), ZERO, 1.5)
    with pytest.raises(SimulationError):
        step_dynamics(VehicleState(x=math.nan), ZERO, 0.1)


def test_speed_decays_monotonically_without_thrust():
    p = VehicleParams()
    s = VehicleState(u=2.5)
    prev = s.u
    for _ in range(600):
        s = step_dynamics(s, ZERO, 0.1)
        assert 0.0 <= s.u <= prev
        prev = s.u
    # m du/dt = -c_d u^2  =>  u(t) = u0 / (1 + c_d u0 t / m)
    assert s.u == pytest.approx(2.5 / (1 + p.drag * 2.5 * 60.0 / p.surge_mass), rel=5e-3)


def test_vertical_thrusters_dive_at_low_speed_only():
    down = LlcSetpointsCWolf((0, 0, 0, 0, 1000, 1000))
    slow = run(VehicleState(), down, 20.0)
    assert slow.z > 1.0
    fast = VehicleState(u=2.5)
    fast.motors = [1.0, 1.0, 0, 0, 0, 0]
    fast = run(fast, LlcSetpointsCWolf((1000, 1000, 0, 0, 1000, 1000)), 5.0)
    assert fast.z == 0.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(-1000, 1000), min_size=6, max_size=6), min_size=1, max_size=30))
def test_physical_bounds(commands):
    s = VehicleState()
    for pwm in commands:
        s = run(s, LlcSetpointsCWolf(tuple(pwm)), 3.0)
        assert s.z >= 0.0
        assert abs(s.pitch) <= MAX_PITCH + 1e-12
        assert MIN_SPEED <= s.u <= 3.09
        assert -math.pi <= s.yaw < math.pi


def test_plume_closed_form():
    f = PlumeField(source=(10.0, 20.0, 5.0), peak=800.0, sigma=(30.0, 40.0, 4.0), background=5.0)
    assert sample_plume(f, (10.0, 20.0, 5.0)) == 805.0
    assert sample_plume(f, (40.0, 20.0, 5.0)) == pytest.approx(5.0 + 800.0 * math.exp(-0.5), rel=1e-12)
    assert abs(sample_plume(f, (310.0, 20.0, 5.0)) - 5.0) < 1e-6
    hot = PlumeField(peak=1000.0, background=50.0)
    assert sample_plume(hot, hot.source) == 1000.0
    assert PlumeField(peak=1200.0).violations()


def test_nav_at_origin_is_exact():
    nav = NavigationModel(*ORIGIN).emit(VehicleState(), 0.0, 0.1)
    assert (nav.latitude, nav.longitude) == ORIGIN
    assert nav.gps_fix


def test_height_over_ground():
    nav = NavigationModel(*ORIGIN, seabed_depth=50.0).emit(VehicleState(z=20.0), 0.0, 0.1)
    assert nav.height_over_ground == 30.0
    far = NavigationModel(*ORIGIN, seabed_depth=200.0, dvl_range=60.0).emit(VehicleState(z=20.0), 0.0, 0.1)
    assert math.isnan(far.height_over_ground)


def test_dead_reckoning_drift_statistics():
    rate, seconds, dt = 0.03, 100.0, 0.1
    sigma = rate * math.sqrt(seconds)
    errors = []
    for seed in range(100):
        model = NavigationModel(*ORIGIN, seed=seed, drift_rate=rate)
        model.emit(VehicleState(z=5.0), 0.0, dt)
        s = VehicleState(z=5.0)
        for k in range(1, int(seconds / dt) + 1):
            s = replace(s, x=s.x + 0.15)
            nav = model.emit(s, k * dt, dt)
            assert not nav.gps_fix
        ex, ey = geodetic_to_ned(nav.latitude, nav.longitude, *ORIGIN)
        errors += [ex - s.x, ey - s.y]
    errors = np.array(errors)
    assert np.sum(np.abs(errors) > 3 * sigma) <= 3
    assert 0.8 * sigma < errors.std() < 1.2 * sigma


@settings(max_examples=200)
@given(st.floats(0.0, 100.0), st.floats(-50, 50), st.floats(-50, 50))
def test_gps_gating(depth, x, y):
    model = NavigationModel(*ORIGIN)
    model.emit(VehicleState(z=3.0), 0.0, 0.1)
    nav = model.emit(VehicleState(x=x, y=y, z=depth), 0.1, 0.1)
    assert nav.gps_fix == (depth < GPS_DEPTH)


def test_idle_run_publishes_ten_hertz(tmp_path):
    port = MemoryPort()
    node = SimulatorNode(port, SimConfig(duration=60.0), ORIGIN, tmp_path)
    out = node.run()
    assert out.reason == "duration elapsed"
    assert out.nav_sent == 600 and len(port.sent) == 600
    assert all(isinstance(t, NavData) for t in port.sent)
    assert [t.timestamp for t in port.sent[:3]] == [0.0, 0.1, 0.2]
    first, last = node.states[0], node.states[-1]
    assert (first.x, first.y, first.z) == (last.x, last.y, last.z)
    rows = (tmp_path / "state.csv").read_text().splitlines()
    assert rows[0] == "t,x,y,z,yaw,pitch,u" and len(rows) == 601
    assert len(list(read_telegram_log(tmp_path / "telegrams.bin"))) == 600


def test_same_seed_byte_identical_logs(tmp_path):
    def once(d):
        port = MemoryPort()
        cfg = SimConfig(duration=20.0, seed=9, initial=(0.0, 0.0, 0.3))
        pending = [LlcCommand(LlcMode.DIRECT)]

        def pump():
            if pending:
                port.inject(pending.pop())
            elif not port.inbox:
                port.inject(LlcSetpointsCWolf((600, 400, 0, 0, 300, 300)))

        SimulatorNode(port, cfg, ORIGIN, d, pump).run()
        return (d / "state.csv").read_bytes(), (d / "telegrams.bin").read_bytes()

    assert once(tmp_path / "a") == once(tmp_path / "b")


def test_lockstep_and_hand_back(tmp_path):
    port = MemoryPort()
    script = [LlcCommand(LlcMode.DIRECT)] + [LlcSetpointsCWolf((800, 800, 0, 0, 0, 0))] * 50
    script.append(LlcCommand(LlcMode.NO_CONTROL))
    script.reverse()

    def pump():
        if script and not port.inbox:
            port.inject(script.pop())

    node = SimulatorNode(port, SimConfig(), ORIGIN, tmp_path, pump)
    out = node.run()
    assert out.completed and out.reason == "control handed back"
    assert out.setpoints_received == 51
    assert node.states[-1].u > 0.5
    inbound = [decode(raw) for _, d, raw in read_telegram_log(tmp_path / "telegrams.bin") if d == INBOUND]
    assert inbound[0] == LlcCommand(LlcMode.DIRECT) and inbound[-1] == LlcCommand(LlcMode.NO_CONTROL)


def test_setpoints_ignored_outside_direct():
    port = MemoryPort()
    port.inject(LlcSetpointsCWolf((1000, 1000, 0, 0, 0, 0)))
    node = SimulatorNode(port, SimConfig(duration=2.0), ORIGIN)
    node.run()
    assert node.ignored == 1
    assert node.states[-1].u == 0.0


def test_guidance_silence_ends_run():
    port = MemoryPort()
    port.inject(LlcCommand(LlcMode.DIRECT))
    cfg = SimConfig(setpoint_timeout=0.01, link_timeout=0.2, control_wait=1.0)
    out = SimulatorNode(port, cfg, ORIGIN).run()
    assert out.reason == "guidance silent" and not out.completed


def test_invalid_config_rejected():
    with pytest.raises(SimulationError):
        SimulatorNode(MemoryPort(), SimConfig(dt=2.0), ORIGIN)
