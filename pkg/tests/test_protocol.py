import math
import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salmon.protocol import (
    DecodeError,
    InvalidField,
    LengthMismatch,
    LlcCommand,
    LlcError,
    LlcMode,
    LlcSetpoint,
    LlcSetpointsCWolf,
    LlcStatus,
    NavData,
    TelegramError,
    TrailingBytes,
    TruncatedHeader,
    UnknownMessageId,
    Utf8Error,
    decode,
    encode,
    telegram_name,
)

from .conftest import VECTORS
from .telegram_gen import fuzz_datagram, random_telegram, same_telegram

GOLDEN = {
    "nav_data_surface.bin": NavData(12.5, 60.3913, 5.3221, 0.0, 0.0, 0.0, 0.5, 1.5, math.nan, True),
    "nav_data_submerged.bin": NavData(300.0, 60.392, 5.323, 20.0, 0.0, -0.3, -3.0, 1.5, 30.0, False),
    "llc_command_no_control.bin": LlcCommand(LlcMode.NO_CONTROL),
    "llc_command_direct.bin": LlcCommand(LlcMode.DIRECT),
    "llc_setpoint.bin": LlcSetpoint(1.25, 10.0, 1.5),
    "llc_setpoints_cwolf.bin": LlcSetpointsCWolf((1000, -1000, 250, -250, 0, 37)),
    "llc_status.bin": LlcStatus((1500.0, 1500.0, 0.0, 0.0, -250.5, 0.0),
                                (True, True, False, False, True, False), LlcMode.DIRECT),
    "llc_error.bin": LlcError(7, "motor overheat"),
    "llc_error_utf8.bin": LlcError(65535, "Ålesund"),
}


def test_no_control_bytes():
    assert encode(LlcCommand(LlcMode.NO_CONTROL)) == bytes.fromhex("020002000000")


def test_nav_payload_length():
    raw = encode(NavData(0.0, 0.0, 0.0, 0.0))
    assert len(raw) == 84
    assert struct.unpack_from("<H", raw, 2)[0] == 80


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_vectors(name):
    raw = (VECTORS / name).read_bytes()
    assert encode(GOLDEN[name]) == raw
    assert same_telegram(decode(raw), GOLDEN[name])


def test_golden_set_complete():
    assert {p.name for p in VECTORS.glob("*.bin")} == set(GOLDEN)


def test_round_trip_random():
    rng = random.Random(1)
    for _ in range(5000):
        t = random_telegram(rng)
        raw = encode(t)
        assert struct.unpack_from("<H", raw, 2)[0] == len(raw) - 4
        assert same_telegram(decode(raw), t)


finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=300)
@given(st.builds(
    NavData,
    st.floats(0, 1e6), st.floats(-90, 90), st.floats(-180, 180, exclude_max=True), st.floats(0, 1e4),
    st.floats(), st.floats(), st.floats(-math.pi, math.pi, exclude_max=True), st.floats(),
    st.floats(), st.booleans(),
))
def test_nav_round_trip_property(t):
    assert same_telegram(decode(encode(t)), t)


@settings(max_examples=300)
@given(st.lists(st.integers(-1000, 1000), min_size=6, max_size=6))
def test_pwm_round_trip_property(pwm):
    t = LlcSetpointsCWolf(tuple(pwm))
    assert decode(encode(t)) == t


@settings(max_examples=300)
@given(st.integers(0, 65535), st.text(max_size=60).filter(lambda s: len(s.encode("utf-8", "surrogatepass")) <= 255))
def test_error_round_trip_property(code, text):
    try:
        text.encode("utf-8")
    except UnicodeEncodeError:
        with pytest.raises(UnicodeEncodeError):
            encode(LlcError(code, text))
        return
    t = LlcError(code, text)
    assert decode(encode(t)) == t


@pytest.mark.parametrize(
    "t",
    [
        LlcSetpointsCWolf((1001, 0, 0, 0, 0, 0)),
        LlcSetpointsCWolf((0, 0, 0, 0, 0)),
        LlcSetpointsCWolf((0.5, 0, 0, 0, 0, 0)),
        NavData(0.0, 0.0, 0.0, -1.0),
        NavData(0.0, 0.0, 0.0, 0.0, yaw=math.pi),
        NavData(0.0, 91.0, 0.0, 0.0),
        NavData(0.0, 0.0, 180.0, 0.0),
        LlcSetpoint(0.0, -1.0, 1.0),
        LlcSetpoint(0.0, 1.0, -1.0),
        LlcError(70000, ""),
        LlcError(1, "x" * 256),
        LlcCommand(5),
    ],
)
def test_encode_refuses_invalid(t):
    with pytest.raises(TelegramError):
        encode(t)


def test_decode_errors():
    nav = encode(NavData(0.0, 0.0, 0.0, 0.0))
    with pytest.raises(TruncatedHeader):
        decode(b"\x01\x00")
    with pytest.raises(LengthMismatch):
        decode(nav[:44])
    with pytest.raises(UnknownMessageId):
        decode(struct.pack("<HH", 0x00FF, 0))
    with pytest.raises(TrailingBytes):
        decode(nav + b"\x00")
    with pytest.raises(LengthMismatch):
        decode(struct.pack("<HH", 1, 8) + bytes(8))
    with pytest.raises(Utf8Error):
        decode(struct.pack("<HHHB", 6, 5, 1, 2) + b"\xff\xfe")
    with pytest.raises(LengthMismatch):
        decode(struct.pack("<HHHB", 6, 5, 1, 9) + b"ab")
    with pytest.raises(InvalidField):
        decode(struct.pack("<HHH", 2, 2, 3))
    with pytest.raises(InvalidField):
        decode(struct.pack("<HH6h", 4, 12, 2000, 0, 0, 0, 0, 0))
    with pytest.raises(InvalidField):
        decode(struct.pack("<HH10d", 1, 80, 0, 0, 0, -1.0, 0, 0, 0, 0, 0, 0))


def test_decode_errors_are_distinct_kinds():
    kinds = {TruncatedHeader, UnknownMessageId, LengthMismatch, TrailingBytes, Utf8Error, InvalidField}
    assert len(kinds) == 6
    assert all(issubclass(k, DecodeError) for k in kinds)


def test_fuzz_never_crashes():
    rng = random.Random(4)
    seeds = [encode(random_telegram(rng)) for _ in range(50)]
    ok = 0
    for _ in range(20_000):
        try:
            decode(fuzz_datagram(rng, seeds))
            ok += 1
        except DecodeError:
            pass
    assert ok > 0


def test_names():
    assert telegram_name(NavData(0.0, 0.0, 0.0, 0.0)) == "NAV_Data"
    assert telegram_name(0x0004) == "LLC_Setpoints_CWolf"
    assert telegram_name(0x0099) == "unknown"
