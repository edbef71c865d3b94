"""Stack configuration file (same sectioned key = value syntax as mission plans).

Sections: ``[network]``, ``[simulator]``, ``[gains]``, ``[guidance]``,
``[sensors]``, ``[profile]`` and ``[mission]``. Every key is optional; missing
keys take the defaults of the corresponding dataclass. Relative paths resolve
against the directory of the config file. See ``docs/config.md``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .guidance import ControlGains, GuidanceSettings
from .kvfile import KVSyntaxError, read_sections
from .measurement import SensorConfig
from .route import RouteProfile
from .simulator import PlumeField, SimConfig
from .transport import parse_addr


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    cc: tuple[str, int] = ("127.0.0.1", 45000)
    sc: tuple[str, int] = ("127.0.0.1", 45001)
    mc: tuple[str, int] = ("127.0.0.1", 45002)

    def violations(self) -> list[str]:
        addrs = [self.cc, self.sc, self.mc]
        if len(set(addrs)) != 3:
            return ["network addresses for cc, sc and mc must be distinct"]
        return []


@dataclass(frozen=True)
class StackConfig:
    network: NetworkConfig = NetworkConfig()
    simulator: SimConfig = field(default_factory=SimConfig)
    gains: ControlGains = ControlGains()
    guidance: GuidanceSettings = GuidanceSettings()
    sensors: SensorConfig = SensorConfig()
    sensor_noise: float = 0.01
    profile: RouteProfile = RouteProfile()
    mission: Optional[Path] = None
    log_dir: Path = Path("logs")

    def violations(self) -> list[str]:
        out = self.network.violations() + self.simulator.violations() + self.gains.violations()
        out += self.guidance.violations() + self.sensors.violations() + self.profile.violations()
        if not self.sensor_noise >= 0:
            out.append("sensors noise must be >= 0")
        if self.mission is not None and not Path(self.mission).is_file():
            out.append(f"mission file not found: {self.mission}")
        return out

    def with_seed(self, seed: int) -> "StackConfig":
        return replace(self, simulator=replace(self.simulator, seed=seed))


def _float(section, key, raw) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"[{section}] {key}: must be finite")
    return v


def _int(section, key, raw) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not an integer: {raw!r}") from None


def _take(section: str, items: dict, known) -> dict:
    unknown = sorted(set(items) - set(known))
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(unknown)}")
    return items


_SIM_FLOATS = ("dt", "realtime_factor", "max_time", "control_wait", "setpoint_timeout", "link_timeout",
               "seabed_depth", "dvl_range", "drift_rate")
_PLUME = ("plume_x", "plume_y", "plume_z", "plume_peak", "plume_sigma_x", "plume_sigma_y", "plume_sigma_z",
          "plume_background")
_PID = ("heading", "depth", "speed", "pitch")
_GAIN_FLOATS = ("depth_to_pitch", "max_pitch_correction", "max_pitch", "lookahead_distance")


def parse_config(text: str, base_dir: Path | str = ".") -> StackConfig:
    try:
        sections = read_sections(text)
    except KVSyntaxError as exc:
        raise ConfigError(str(exc)) from None
    known = {"network", "simulator", "gains", "guidance", "sensors", "profile", "mission"}
    extra = sorted(set(sections) - known)
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(extra)}")
    base = Path(base_dir)
    cfg = StackConfig()

    if "network" in sections:
        items = _take("network", sections["network"], ("cc", "sc", "mc"))
        try:
            cfg = replace(cfg, network=replace(cfg.network, **{k: parse_addr(v) for k, v in items.items()}))
        except ValueError as exc:
            raise ConfigError(f"[network] {exc}") from None

    if "simulator" in sections:
        items = _take("simulator", sections["simulator"], ("seed",) + _SIM_FLOATS + _PLUME)
        sim = cfg.simulator
        kw = {k: _float("simulator", k, v) for k, v in items.items() if k in _SIM_FLOATS}
        if "seed" in items:
            kw["seed"] = _int("simulator", "seed", items["seed"])
        p = sim.plume
        pv = {k: _float("simulator", k, v) for k, v in items.items() if k in _PLUME}
        plume = PlumeField(
            source=(pv.get("plume_x", p.source[0]), pv.get("plume_y", p.source[1]), pv.get("plume_z", p.source[2])),
            peak=pv.get("plume_peak", p.peak),
            sigma=(pv.get("plume_sigma_x", p.sigma[0]), pv.get("plume_sigma_y", p.sigma[1]),
                   pv.get("plume_sigma_z", p.sigma[2])),
            background=pv.get("plume_background", p.background),
        )
        cfg = replace(cfg, simulator=replace(sim, plume=plume, **kw))

    if "gains" in sections:
        pid_keys = tuple(f"{n}_{k}" for n in _PID for k in ("kp", "ki", "kd", "i_limit"))
        items = _take("gains", sections["gains"], pid_keys + _GAIN_FLOATS)
        g = cfg.gains
        kw = {}
        for n in _PID:
            sub = {k: _float("gains", f"{n}_{k}", items[f"{n}_{k}"])
                   for k in ("kp", "ki", "kd", "i_limit") if f"{n}_{k}" in items}
            if sub:
                kw[n] = replace(getattr(g, n), **sub)
        kw.update({k: _float("gains", k, items[k]) for k in _GAIN_FLOATS if k in items})
        cfg = replace(cfg, gains=replace(g, **kw))

    if "guidance" in sections:
        names = [f.name for f in fields(GuidanceSettings)]
        items = _take("guidance", sections["guidance"], names)
        cfg = replace(cfg, guidance=replace(cfg.guidance, **{k: _float("guidance", k, v) for k, v in items.items()}))

    if "sensors" in sections:
        items = _take("sensors", sections["sensors"], ("nitrate_period", "fast_period", "noise"))
        s = cfg.sensors
        if "nitrate_period" in items:
            s = replace(s, nano3=replace(s.nano3, period=_float("sensors", "nitrate_period", items["nitrate_period"])))
        if "fast_period" in items:
            fp = _float("sensors", "fast_period", items["fast_period"])
            s = replace(s, o2=replace(s.o2, period=fp), cond=replace(s.cond, period=fp),
                        temp=replace(s.temp, period=fp))
        cfg = replace(cfg, sensors=s)
        if "noise" in items:
            cfg = replace(cfg, sensor_noise=_float("sensors", "noise", items["noise"]))

    if "profile" in sections:
        names = [f.name for f in fields(RouteProfile)]
        items = _take("profile", sections["profile"], names)
        cfg = replace(cfg, profile=replace(cfg.profile, **{k: _float("profile", k, v) for k, v in items.items()}))

    if "mission" in sections:
        items = _take("mission", sections["mission"], ("file", "log_dir"))
        if "file" in items:
            cfg = replace(cfg, mission=(base / items["file"]).resolve())
        if "log_dir" in items:
            cfg = replace(cfg, log_dir=(base / items["log_dir"]))

    problems = cfg.violations()
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def load_config(path) -> StackConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)

