"""Wiring of simulator (CC), guidance (SC) and measurement (MC) into test topologies.

* ``run_in_process``: all three programs in one thread over loopback ports.
* ``run_udp``: the same programs on UDP sockets, each in its own thread.
* ``run_simulator`` / ``run_onboard``: the two halves used by separate processes.

Only the :class:`~salmon.transport.Port` implementation changes between the
variants, so their mission outcomes must agree.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .config import StackConfig
from .guidance import Autopilot, GuidanceMode, MissionLog, ScientificComputer
from .measurement import MeasurementComputer, WaterModel
from .plan import MissionPlan, load_plan
from .route import Route, generate_route, route_to_csv
from .simulator import SimConfig, SimOutcome, SimulatorNode
from .transport import LoopbackNetwork, UdpPort


class HarnessError(RuntimeError):
    pass


@dataclass
class StackResult:
    outcome: SimOutcome
    modes: list[tuple[float, str]]  # (time, mode entered)
    waypoints: list[int]  # route indices in completion order
    final_mode: GuidanceMode
    surfacings: int
    samples: int
    wall_time: float
    log_dir: Optional[Path]
    autopilot: Autopilot
    measurement: MeasurementComputer
    simulator: SimulatorNode

    @property
    def completed(self) -> bool:
        return self.final_mode is GuidanceMode.COMPLETE and self.autopilot.aborted is None


def load_mission(config: StackConfig) -> tuple[MissionPlan, Route]:
    if config.mission is None:
        raise HarnessError("no mission file configured")
    plan = load_plan(config.mission)
    return plan, generate_route(plan, config.profile)


def initial_pose(route: Route) -> tuple[float, float, float]:
    """Start at the first waypoint, facing the first horizontally distinct one."""
    w0 = route.waypoints[0]
    for w in route.waypoints[1:]:
        if math.hypot(w.x - w0.x, w.y - w0.y) > 1e-6:
            return (w0.x, w0.y, math.atan2(w.y - w0.y, w.x - w0.x))
    return (w0.x, w0.y, 0.0)


def sim_config(config: StackConfig, route: Route) -> SimConfig:
    return replace(config.simulator, initial=initial_pose(route))


def make_autopilot(config: StackConfig, route: Route, plan: MissionPlan, port, log_dir=None) -> Autopilot:
    mlog = MissionLog(Path(log_dir) / "mission.jsonl" if log_dir is not None else None)
    settings = replace(config.guidance, max_speed=config.simulator.vehicle.max_speed)
    return Autopilot(route, port, (plan.origin_lat, plan.origin_lon), config.profile, config.gains,
                     settings, mlog)


def make_measurement(config: StackConfig, plan: MissionPlan, port) -> MeasurementComputer:
    water = WaterModel(config.simulator.plume, (plan.origin_lat, plan.origin_lon),
                       seed=config.simulator.seed + 1, noise=config.sensor_noise)
    return MeasurementComputer(port, water, config.sensors)


def _prepare_dir(log_dir, config: StackConfig, plan: MissionPlan, route: Route) -> Optional[Path]:
    if log_dir is None:
        return None
    d = Path(log_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / "route.csv").write_text(route_to_csv(route))
    return d


def _write_summary(d: Optional[Path], config: StackConfig, plan: MissionPlan, result: StackResult, phase: str):
    if d is None:
        return
    summary = {
        "phase": phase,
        "mission": plan.name,
        "origin": [plan.origin_lat, plan.origin_lon],
        "seed": config.simulator.seed,
        "dt": config.simulator.dt,
        "z_min": config.profile.z_min,
        "l_gps": config.profile.l_gps,
        "completed": result.completed,
        "final_mode": result.final_mode.value,
        "sim_time": result.outcome.sim_time,
        "surfacings": result.surfacings,
        "samples": result.samples,
        "dropped_samples": result.measurement.log.dropped,
    }
    (d / "run.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _result(outcome, ap: Autopilot, mc: MeasurementComputer, sim: SimulatorNode, wall: float, d) -> StackResult:
    return StackResult(
        outcome=outcome,
        modes=[(0.0, GuidanceMode.IDLE.value)] + [(t, new.value) for t, _, new in ap.transitions],
        waypoints=list(ap.reached),
        final_mode=ap.mode,
        surfacings=ap.surfacings,
        samples=len(mc.log.samples),
        wall_time=wall,
        log_dir=d,
        autopilot=ap,
        measurement=mc,
        simulator=sim,
    )


def _finish(d: Optional[Path], ap: Autopilot, mc: MeasurementComputer):
    ap.log.close()
    if d is not None:
        mc.log.export_log(d / "measurements.csv")


def run_in_process(config: StackConfig, log_dir=None) -> StackResult:
    """Single-threaded stack on loopback ports (test phase 2)."""
    plan, route = load_mission(config)
    d = _prepare_dir(log_dir, config, plan, route)
    net = LoopbackNetwork()
    cc = net.port("cc", ("sc", "mc"))
    sc_port = net.port("sc", ("cc",))
    mc_port = net.port("mc")
    ap = make_autopilot(config, route, plan, sc_port, d)
    sc = ScientificComputer(ap, sc_port)
    mc = make_measurement(config, plan, mc_port)

    def pump():
        mc.drain()
        sc.drain()

    sim = SimulatorNode(cc, sim_config(config, route), (plan.origin_lat, plan.origin_lon), d, pump)
    wall0 = time.perf_counter()
    ap.activate()
    outcome = sim.run()
    mc.drain()
    wall = time.perf_counter() - wall0
    _finish(d, ap, mc)
    result = _result(outcome, ap, mc, sim, wall, d)
    _write_summary(d, config, plan, result, "in-process")
    return result


def run_udp(config: StackConfig, log_dir=None) -> StackResult:
    """Same stack over UDP sockets on the configured addresses, one thread per program (phase 3)."""
    plan, route = load_mission(config)
    d = _prepare_dir(log_dir, config, plan, route)
    net = config.network
    ports = []
    try:
        cc = UdpPort(net.cc, (net.sc, net.mc)); ports.append(cc)
        sc_port = UdpPort(net.sc, (net.cc,)); ports.append(sc_port)
        mc_port = UdpPort(net.mc); ports.append(mc_port)
    except OSError:
        for p in ports:
            p.close()
        raise
    ap = make_autopilot(config, route, plan, sc_port, d)
    sc = ScientificComputer(ap, sc_port)
    mc = make_measurement(config, plan, mc_port)
    sim = SimulatorNode(cc, sim_config(config, route), (plan.origin_lat, plan.origin_lon), d)
    stop_sc, stop_mc = threading.Event(), threading.Event()
    sc_result: list[str] = []
    threads = [
        threading.Thread(target=lambda: sc_result.append(sc.run(stop_sc)), name="sc", daemon=True),
        threading.Thread(target=mc.run, args=(stop_mc,), name="mc", daemon=True),
    ]
    wall0 = time.perf_counter()
    try:
        for th in threads:
            th.start()
        outcome = sim.run()
        # let the measurement computer consume everything that was published
        deadline = time.monotonic() + 5.0
        while mc.nav_count < outcome.nav_sent and time.monotonic() < deadline:
            time.sleep(0.01)
        stop_mc.set()
        threads[0].join(timeout=ap.cfg.watchdog + 1.0)
        stop_sc.set()
        for th in threads:
            th.join(timeout=2.0)
    finally:
        for p in ports:
            p.close()
    wall = time.perf_counter() - wall0
    _finish(d, ap, mc)
    result = _result(outcome, ap, mc, sim, wall, d)
    _write_summary(d, config, plan, result, "udp")
    return result


def run_simulator(config: StackConfig, log_dir=None, duration: float | None = None) -> SimOutcome:
    """Simulator process on its own socket; waits for the guidance to take control."""
    plan, route = load_mission(config)
    cfg = sim_config(config, route)
    if duration is not None:
        cfg = replace(cfg, duration=duration)
    net = config.network
    with UdpPort(net.cc, (net.sc, net.mc)) as port:
        sim = SimulatorNode(port, cfg, (plan.origin_lat, plan.origin_lon), log_dir)
        return sim.run()


def run_onboard(config: StackConfig, log_dir=None, stop: threading.Event | None = None) -> tuple[str, StackResult]:
    """Guidance and measurement computers on their own sockets (the payload side)."""
    plan, route = load_mission(config)
    d = _prepare_dir(log_dir, config, plan, route)
    net = config.network
    stop = stop or threading.Event()
    with UdpPort(net.sc, (net.cc,)) as sc_port, UdpPort(net.mc) as mc_port:
        ap = make_autopilot(config, route, plan, sc_port, d)
        sc = ScientificComputer(ap, sc_port)
        mc = make_measurement(config, plan, mc_port)
        stop_mc = threading.Event()
        th = threading.Thread(target=mc.run, args=(stop_mc,), name="mc", daemon=True)
        th.start()
        wall0 = time.perf_counter()
        status = sc.run(stop)
        time.sleep(0.2)
        stop_mc.set()
        th.join(timeout=2.0)
        wall = time.perf_counter() - wall0
    _finish(d, ap, mc)
    outcome = SimOutcome(ap.complete and ap.aborted is None, status, sc.nav_count, 0.0, wall, 0, 0, 0)
    result = _result(outcome, ap, mc, None, wall, d)
    _write_summary(d, config, plan, result, "onboard")
    return status, result
