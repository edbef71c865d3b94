"""Random telegram generator, structural equality and byte fuzzing shared by the protocol tests."""

import math
import random
import struct

from salmon.protocol import (
    LlcCommand,
    LlcError,
    LlcMode,
    LlcSetpoint,
    LlcSetpointsCWolf,
    LlcStatus,
    NavData,
    TELEGRAM_TYPES,
)

_F32 = struct.Struct("<f")


def _f64(rng: random.Random, scale=1e4) -> float:
    r = rng.random()
    if r < 0.02:
        return rng.choice([0.0, -0.0, math.inf, -math.inf, 5e-324, 1.7976931348623157e308])
    return rng.uniform(-scale, scale)


def _f32(rng: random.Random) -> float:
    v = rng.choice([rng.uniform(-5000, 5000), 0.0, math.nan, math.inf])
    return _F32.unpack(_F32.pack(v))[0]


def _text(rng: random.Random) -> str:
    alphabet = "abcxyz ÆØÅæøå€漢🐟\t"
    out = ""
    for _ in range(rng.randrange(0, 80)):
        c = rng.choice(alphabet)
        if len((out + c).encode("utf-8")) > 255:
            break
        out += c
    return out


def random_telegram(rng: random.Random):
    kind = rng.randrange(6)
    if kind == 0:
        return NavData(
            timestamp=rng.uniform(0, 1e5),
            latitude=rng.uniform(-90, 90),
            longitude=rng.uniform(-180, 179.999999),
            depth=rng.choice([0.0, rng.uniform(0, 300)]),
            roll=_f64(rng, 3.2),
            pitch=_f64(rng, 3.2),
            yaw=rng.uniform(-math.pi, math.pi - 1e-12),
            speed=_f64(rng, 5),
            height_over_ground=rng.choice([math.nan, rng.uniform(0, 100)]),
            gps_fix=rng.random() < 0.5,
        )
    if kind == 1:
        return LlcCommand(rng.choice(list(LlcMode)))
    if kind == 2:
        return LlcSetpoint(_f64(rng, 7), rng.uniform(0, 300), rng.uniform(0, 4))
    if kind == 3:
        return LlcSetpointsCWolf(tuple(rng.randint(-1000, 1000) for _ in range(6)))
    if kind == 4:
        return LlcStatus(tuple(_f32(rng) for _ in range(6)), tuple(rng.random() < 0.5 for _ in range(6)),
                         rng.choice(list(LlcMode)))
    return LlcError(rng.randrange(0, 65536), _text(rng))


def _same(a, b) -> bool:
    if isinstance(a, float) and isinstance(b, float):
        if math.isnan(a) or math.isnan(b):
            return math.isnan(a) and math.isnan(b)
        return a == b and math.copysign(1, a) == math.copysign(1, b)
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return type(a) is type(b) and a == b


def same_telegram(a, b) -> bool:
    """Structural equality where NaN equals NaN and the sign of zero counts."""
    if type(a) is not type(b):
        return False
    return all(_same(getattr(a, f), getattr(b, f)) for f in a.__dataclass_fields__)


def fuzz_datagram(rng: random.Random, seeds: list[bytes]) -> bytes:
    mode = rng.randrange(4)
    if mode == 0:
        return bytes(rng.getrandbits(8) for _ in range(rng.randrange(0, 120)))
    src = bytearray(rng.choice(seeds))
    if mode == 1:
        for _ in range(rng.randrange(1, 4)):
            if src:
                src[rng.randrange(len(src))] = rng.getrandbits(8)
        return bytes(src)
    if mode == 2:
        return bytes(src[: rng.randrange(0, len(src) + 1)]) + bytes(rng.getrandbits(8) for _ in range(rng.randrange(3)))
    # valid header id, random payload
    msg_id = rng.choice([t.MSG_ID for t in TELEGRAM_TYPES] + [0, 0xFF, 0xFFFF])
    body = bytes(rng.getrandbits(8) for _ in range(rng.randrange(0, 90)))
    n = len(body) if rng.random() < 0.7 else rng.randrange(0, 0x10000)
    return struct.pack("<HH", msg_id, n) + body
