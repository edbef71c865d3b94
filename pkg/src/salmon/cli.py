"""``salmon`` command line: compile | sim | run | analyze.

Exit codes: 0 ok, 2 input error, 3 runtime or environment error, 4 invariant
violation found by ``analyze``.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .analyze import LogError, analyze
from .config import ConfigError, StackConfig, load_config
from .harness import HarnessError, run_in_process, run_onboard, run_simulator, run_udp
from .plan import PlanError, load_plan, validate_plan
from .route import RouteConfigError, WaypointKind, generate_route, route_to_csv, route_to_geojson, route_track_length
from .transport import PortError

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("salmon")


def _err(msg: str):
    print(f"salmon: {msg}", file=sys.stderr)


def default_config_path() -> Path:
    return Path(str(resources.files("salmon") / "data" / "default.ini"))


def _load(args) -> StackConfig:
    cfg = load_config(args.config or default_config_path())
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "realtime", None) is not None:
        if args.realtime < 0:
            raise ConfigError("--realtime must be >= 0")
        cfg = replace(cfg, simulator=replace(cfg.simulator, realtime_factor=args.realtime))
    if getattr(args, "mission", None):
        cfg = replace(cfg, mission=Path(args.mission))
    problems = cfg.violations()
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def _log_dir(args, cfg: StackConfig) -> Path:
    if args.output:
        return Path(args.output)
    # the packaged config must not log into the installed package
    return Path(cfg.log_dir) if args.config else Path("logs")


# --------------------------------------------------------------------------


def cmd_compile(args) -> int:
    try:
        plan = load_plan(args.mission)
    except OSError as exc:
        _err(f"cannot read {args.mission}: {exc.strerror or exc}")
        return EXIT_INPUT
    except PlanError as exc:
        _err(f"{args.mission}: {exc}")
        return EXIT_INPUT
    problems = validate_plan(plan)
    try:
        profile = load_config(args.config).profile if args.config else StackConfig().profile
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_INPUT
    problems += profile.violations()
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_INPUT
    try:
        route = generate_route(plan, profile)
    except RouteConfigError as exc:
        for p in str(exc).split("; "):
            print(p, file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "route.csv").write_text(route_to_csv(route))
    geo = route_to_geojson(route, plan.origin_lat, plan.origin_lon)
    (out / "track.geojson").write_text(json.dumps(geo, indent=2) + "\n")
    n_surf = sum(w.kind is WaypointKind.SURFACE_START for w in route.waypoints)
    print(f"mission:      {plan.name}")
    print(f"waypoints:    {len(route.waypoints)}")
    print(f"track length: {route.horizontal_length:.2f} m horizontal, {route_track_length(route):.2f} m 3D")
    print(f"surfacings:   {n_surf}")
    return EXIT_OK


def cmd_sim(args) -> int:
    cfg = _load(args)
    out = _log_dir(args, cfg)
    try:
        outcome = run_simulator(cfg, out, duration=args.duration)
    except PortError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    print(f"simulated {outcome.sim_time:.1f} s in {outcome.wall_time:.2f} s wall: {outcome.reason}")
    print(f"logs in {out}")
    if outcome.completed or (args.duration is not None and outcome.reason == "duration elapsed"):
        return EXIT_OK
    return EXIT_RUNTIME


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _log_dir(args, cfg)
    if args.single_process or args.udp_loopback:
        runner = run_in_process if args.single_process else run_udp
        result = runner(cfg, out)
        status = "complete" if result.completed else (result.autopilot.aborted or result.outcome.reason)
    else:
        stop = threading.Event()
        for sig in (signal.SIGINT, signal.SIGTERM):
            signal.signal(sig, lambda *_: stop.set())
        status, result = run_onboard(cfg, out, stop)
    print(f"mission {status}: mode {result.final_mode.value}, {result.surfacings} surfacings, "
          f"{result.samples} samples, {result.wall_time:.2f} s wall")
    print(f"logs in {out}")
    return EXIT_OK if result.completed else EXIT_RUNTIME


def cmd_analyze(args) -> int:
    try:
        report = analyze(args.log_dir)
    except LogError as exc:
        _err(str(exc))
        return EXIT_INPUT
    m = report.metrics
    if "cross_track_rms" in m:
        print(f"cross-track RMS: {m['cross_track_rms']:.3f} m (max {m['cross_track_max']:.3f} m)")
    if "surfacings" in m:
        spans = ", ".join(f"{s[2]:.1f}" for s in m["surfacings"])
        print(f"surfacing spans: [{spans}] m")
    if "final_mode" in m:
        print(f"final mode: {m['final_mode']}")
    if "measurement_rows" in m:
        print(f"measurement rows: {m['measurement_rows']} {m['channel_counts']}")
    if report.violations:
        print(f"{len(report.violations)} violation(s):", file=sys.stderr)
        for v in report.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INVARIANT
    print("all invariants hold")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="salmon", description="AUV mission planning, guidance and HIL simulation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="mission plan -> route CSV + GeoJSON")
    c.add_argument("mission")
    c.add_argument("-o", "--output", default="out")
    c.add_argument("--config", help="take the route profile from this config")
    c.set_defaults(func=cmd_compile)

    def common(sp):
        sp.add_argument("--config", help="stack config (default: packaged fjord config)")
        sp.add_argument("--mission", help="override the configured mission file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("-o", "--output", help="log directory (default from config)")

    s = sub.add_parser("sim", help="run the vehicle simulator (control computer stand-in)")
    common(s)
    s.add_argument("--realtime", type=float, help="realtime factor, 0 = free running")
    s.add_argument("--duration", type=float, help="run a fixed number of simulated seconds without waiting for control")
    s.set_defaults(func=cmd_sim)

    r = sub.add_parser("run", help="run guidance and measurement computers")
    common(r)
    r.add_argument("--realtime", type=float, help="realtime factor for in-process simulation")
    g = r.add_mutually_exclusive_group()
    g.add_argument("--single-process", action="store_true", help="whole stack in one thread on in-process ports")
    g.add_argument("--udp-loopback", action="store_true", help="whole stack in one process over UDP sockets")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="check invariants over a log directory")
    a.add_argument("log_dir")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, PlanError, RouteConfigError, HarnessError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except PortError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    except OSError as exc:
        _err(f"{exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
