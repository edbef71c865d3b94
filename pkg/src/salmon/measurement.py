"""Measurement-computer process: sensor cadence, fusion with navigation fixes, CSV log."""

from __future__ import annotations

import csv
import io
import logging
import math
import random
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .geo import geodetic_to_ned
from .protocol import DecodeError, NavData, decode
from .simulator import PlumeField, sample_plume
from .transport import Port

log = logging.getLogger(__name__)

CHANNELS = ("nano3", "o2", "cond", "temp")
CSV_HEADER = ("t", "lat", "lon", "depth", "nano3_ugl", "o2_umoll", "cond_mscm", "temp_c", "flags")
MAX_NAV_AGE = 1.0


@dataclass(frozen=True)
class ChannelSpec:
    lo: float
    hi: float
    period: float


@dataclass(frozen=True)
class SensorConfig:
    nano3: ChannelSpec = ChannelSpec(0.0, 1000.0, 5.0)  # ug/l
    o2: ChannelSpec = ChannelSpec(0.0, 500.0, 1.0)  # umol/l
    cond: ChannelSpec = ChannelSpec(0.0, 75.0, 1.0)  # mS/cm
    temp: ChannelSpec = ChannelSpec(-5.0, 40.0, 1.0)  # degC

    def channel(self, name: str) -> ChannelSpec:
        return getattr(self, name)

    def violations(self) -> list[str]:
        out = []
        for name in CHANNELS:
            c = self.channel(name)
            if not c.period > 0:
                out.append(f"{name} period must be > 0")
            if not c.lo < c.hi:
                out.append(f"{name} range must be non-empty")
        return out


class ScheduleError(ValueError):
    pass


class SampleScheduler:
    """Decides which channels are due as simulation time advances."""

    def __init__(self, config: SensorConfig = SensorConfig()):
        self.config = config
        self.last_t: Optional[float] = None
        self._slot = {name: -1 for name in CHANNELS}

    def schedule_tick(self, t: float) -> frozenset[str]:
        if self.last_t is not None and t < self.last_t:
            raise ScheduleError(f"time went backwards: {t} < {self.last_t}")
        self.last_t = t
        due = []
        for name in CHANNELS:
            slot = math.floor(t / self.config.channel(name).period + 1e-9)
            if slot > self._slot[name]:
                self._slot[name] = slot
                due.append(name)
        return frozenset(due)


@dataclass(frozen=True)
class MeasurementSample:
    timestamp: float
    latitude: float
    longitude: float
    depth: float
    nano3: Optional[float] = None
    o2: Optional[float] = None
    cond: Optional[float] = None
    temp: Optional[float] = None
    flags: tuple[str, ...] = ()
    nav_time: float = 0.0

    def values(self) -> dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in CHANNELS}


@dataclass
class WaterModel:
    """Synthetic water column sampled at the navigated position.

    Nitrate comes from the plume; oxygen, conductivity and temperature are
    smooth functions of depth with seeded sensor noise.
    """

    plume: PlumeField = PlumeField()
    origin: tuple[float, float] = (0.0, 0.0)
    seed: int = 0
    noise: float = 0.01  # relative

    def __post_init__(self):
        self.rng = random.Random(self.seed)

    def read(self, nav: NavData, channels) -> dict[str, float]:
        x, y = geodetic_to_ned(nav.latitude, nav.longitude, *self.origin)
        d = nav.depth
        truth = {
            "nano3": sample_plume(self.plume, (x, y, d)),
            "o2": 320.0 - 2.0 * d,
            "cond": 31.0 + 0.04 * d,
            "temp": 9.0 - 0.06 * d,
        }
        out = {}
        for name in CHANNELS:
            if name in channels:
                v = truth[name]
                out[name] = v * (1.0 + self.rng.gauss(0.0, self.noise))
        return out


class MeasurementLog:
    def __init__(self, config: SensorConfig = SensorConfig()):
        self.config = config
        self.samples: list[MeasurementSample] = []
        self.dropped = 0

    def record(self, nav: Optional[NavData], t: float, values: dict[str, float]) -> Optional[MeasurementSample]:
        """Append a sample at time ``t`` positioned by ``nav``; stale or missing nav drops it."""
        if nav is None or not 0.0 <= t - nav.timestamp <= MAX_NAV_AGE:
            self.dropped += 1
            return None
        if not values:
            raise ValueError("a sample needs at least one channel")
        kept, flags = {}, []
        for name, v in values.items():
            spec = self.config.channel(name)
            if not math.isfinite(v):
                flags.append(f"{name}_invalid")
                continue
            if v <= spec.lo or v >= spec.hi:
                flags.append(f"{name}_clamped")
            kept[name] = min(max(v, spec.lo), spec.hi)
        sample = MeasurementSample(t, nav.latitude, nav.longitude, nav.depth, flags=tuple(flags),
                                   nav_time=nav.timestamp, **kept)
        self.samples.append(sample)
        return sample

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\r\n")
        wr.writerow(CSV_HEADER)
        for s in self.samples:
            wr.writerow([repr(s.timestamp), repr(s.latitude), repr(s.longitude), repr(s.depth)]
                        + ["" if v is None else repr(v) for v in s.values().values()]
                        + [";".join(s.flags)])
        return buf.getvalue()

    def export_log(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())
        return path


def read_measurements(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


class MeasurementComputer:
    """Samples due channels on every NavData, using that fix as the position."""

    def __init__(self, port: Optional[Port], water: WaterModel, config: SensorConfig = SensorConfig()):
        problems = config.violations()
        if problems:
            raise ValueError("; ".join(problems))
        self.port = port
        self.water = water
        self.scheduler = SampleScheduler(config)
        self.log = MeasurementLog(config)
        self.last_nav: Optional[NavData] = None
        self.nav_count = 0

    def on_nav(self, nav: NavData):
        if self.last_nav is not None and nav.timestamp <= self.last_nav.timestamp:
            return  # repeated or out-of-order fix
        self.nav_count += 1
        self.last_nav = nav
        self.on_clock(nav.timestamp)

    def on_clock(self, t: float):
        due = self.scheduler.schedule_tick(t)
        if due:
            nav = self.last_nav
            values = self.water.read(nav, due) if nav is not None else {n: math.nan for n in due}
            self.log.record(nav, t, values)

    def handle(self, telegram):
        if isinstance(telegram, NavData):
            self.on_nav(telegram)

    def drain(self) -> int:
        n = 0
        while True:
            data = self.port.receive_bytes(0)
            if data is None:
                return n
            n += 1
            try:
                self.handle(decode(data))
            except DecodeError as exc:
                log.warning("measurement: malformed datagram: %s", exc)

    def run(self, stop, idle_timeout: float | None = None) -> None:
        """Blocking loop until ``stop`` is set (or nothing arrives for ``idle_timeout`` s)."""
        last = time.monotonic()
        while not stop.is_set():
            data = self.port.receive_bytes(0.1)
            if data is None:
                if idle_timeout is not None and self.nav_count and time.monotonic() - last > idle_timeout:
                    return
                continue
            last = time.monotonic()
            try:
                self.handle(decode(data))
            except DecodeError as exc:
                log.warning("measurement: malformed datagram: %s", exc)
