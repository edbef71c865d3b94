"""Telegram set exchanged between the Control, Scientific and Measurement computers.

Every datagram carries exactly one telegram: a 4-byte little-endian header
``(message_id: u16, payload_length: u16)`` followed by a packed payload. The
layouts are documented in ``docs/wire-format.md``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Union

HEADER = struct.Struct("<HH")
HEADER_SIZE = HEADER.size

PWM_LIMIT = 1000
N_MOTORS = 6
MOTOR_NAMES = ("main_port", "main_stbd", "lateral_bow", "lateral_stern", "vertical_bow", "vertical_stern")
MAX_ERROR_MESSAGE = 255


class TelegramError(ValueError):
    """Telegram field violates its invariants (raised before encoding)."""


class DecodeError(ValueError):
    pass


class TruncatedHeader(DecodeError):
    pass


class UnknownMessageId(DecodeError):
    def __init__(self, message_id: int):
        self.message_id = message_id
        super().__init__(f"unknown message id 0x{message_id:04X}")


class LengthMismatch(DecodeError):
    pass


class TrailingBytes(DecodeError):
    pass


class Utf8Error(DecodeError):
    pass


class InvalidField(DecodeError):
    pass


class LlcMode(IntEnum):
    NO_CONTROL = 0
    CONTROLLED = 1
    DIRECT = 2


@dataclass(frozen=True)
class NavData:
    MSG_ID = 0x0001
    timestamp: float
    latitude: float
    longitude: float
    depth: float
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    speed: float = 0.0
    height_over_ground: float = math.nan
    gps_fix: bool = False

    def check(self):
        if not self.depth >= 0:
            raise TelegramError(f"NavData.depth must be >= 0, got {self.depth}")
        if not -math.pi <= self.yaw < math.pi:
            raise TelegramError(f"NavData.yaw must lie in [-pi, pi), got {self.yaw}")
        if not -90.0 <= self.latitude <= 90.0:
            raise TelegramError(f"NavData.latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude < 180.0:
            raise TelegramError(f"NavData.longitude out of range: {self.longitude}")


@dataclass(frozen=True)
class LlcCommand:
    MSG_ID = 0x0002
    mode: LlcMode

    def check(self):
        if not isinstance(self.mode, LlcMode):
            raise TelegramError(f"LlcCommand.mode must be an LlcMode, got {self.mode!r}")


@dataclass(frozen=True)
class LlcSetpoint:
    MSG_ID = 0x0003
    heading: float
    depth: float
    speed: float

    def check(self):
        if not self.depth >= 0:
            raise TelegramError(f"LlcSetpoint.depth must be >= 0, got {self.depth}")
        if not self.speed >= 0:
            raise TelegramError(f"LlcSetpoint.speed must be >= 0, got {self.speed}")


@dataclass(frozen=True)
class LlcSetpointsCWolf:
    """Direct-mode PWM per motor, ordered as :data:`MOTOR_NAMES`."""

    MSG_ID = 0x0004
    pwm: tuple[int, ...] = (0,) * N_MOTORS

    def check(self):
        if len(self.pwm) != N_MOTORS:
            raise TelegramError(f"expected {N_MOTORS} PWM values, got {len(self.pwm)}")
        for name, v in zip(MOTOR_NAMES, self.pwm):
            if not isinstance(v, int) or isinstance(v, bool) or not -PWM_LIMIT <= v <= PWM_LIMIT:
                raise TelegramError(f"PWM {name}={v!r} outside [-{PWM_LIMIT}, {PWM_LIMIT}]")


@dataclass(frozen=True)
class LlcStatus:
    MSG_ID = 0x0005
    rpm: tuple[float, ...] = (0.0,) * N_MOTORS
    enabled: tuple[bool, ...] = (False,) * N_MOTORS
    mode_echo: LlcMode = LlcMode.NO_CONTROL

    def check(self):
        if len(self.rpm) != N_MOTORS or len(self.enabled) != N_MOTORS:
            raise TelegramError(f"LlcStatus needs {N_MOTORS} motor entries")
        if not isinstance(self.mode_echo, LlcMode):
            raise TelegramError(f"LlcStatus.mode_echo must be an LlcMode, got {self.mode_echo!r}")


@dataclass(frozen=True)
class LlcError:
    MSG_ID = 0x0006
    code: int
    message: str = ""

    def check(self):
        if not 0 <= self.code <= 0xFFFF:
            raise TelegramError(f"LlcError.code must fit in u16, got {self.code}")
        if len(self.message.encode("utf-8")) > MAX_ERROR_MESSAGE:
            raise TelegramError(f"LlcError.message longer than {MAX_ERROR_MESSAGE} bytes")


Telegram = Union[NavData, LlcCommand, LlcSetpoint, LlcSetpointsCWolf, LlcStatus, LlcError]
TELEGRAM_TYPES = (NavData, LlcCommand, LlcSetpoint, LlcSetpointsCWolf, LlcStatus, LlcError)
BY_ID = {t.MSG_ID: t for t in TELEGRAM_TYPES}

_NAV = struct.Struct("<10d")
_CMD = struct.Struct("<H")
_SETPOINT = struct.Struct("<3d")
_PWM = struct.Struct("<6h")
_STATUS = struct.Struct("<" + "fB" * N_MOTORS + "H")
_ERROR_HEAD = struct.Struct("<HB")


def _payload(t) -> bytes:
    if isinstance(t, NavData):
        return _NAV.pack(
            t.timestamp, t.latitude, t.longitude, t.depth, t.roll, t.pitch,
            t.yaw, t.speed, t.height_over_ground, 1.0 if t.gps_fix else 0.0,
        )
    if isinstance(t, LlcCommand):
        return _CMD.pack(int(t.mode))
    if isinstance(t, LlcSetpoint):
        return _SETPOINT.pack(t.heading, t.depth, t.speed)
    if isinstance(t, LlcSetpointsCWolf):
        return _PWM.pack(*t.pwm)
    if isinstance(t, LlcStatus):
        flat = []
        for rpm, on in zip(t.rpm, t.enabled):
            flat += [rpm, 1 if on else 0]
        return _STATUS.pack(*flat, int(t.mode_echo))
    if isinstance(t, LlcError):
        text = t.message.encode("utf-8")
        return _ERROR_HEAD.pack(t.code, len(text)) + text
    raise TypeError(f"not a telegram: {t!r}")


def encode(t: Telegram) -> bytes:
    """Header + payload bytes for one telegram; invariants are checked first."""
    t.check()
    try:
        body = _payload(t)
    except (struct.error, OverflowError) as exc:
        raise TelegramError(f"{type(t).__name__}: {exc}") from None
    return HEADER.pack(t.MSG_ID, len(body)) + body


def _fixed(struct_obj, body: bytes, name: str):
    if len(body) != struct_obj.size:
        raise LengthMismatch(f"{name} payload must be {struct_obj.size} bytes, header says {len(body)}")
    return struct_obj.unpack(body)


def _mode(raw: int) -> LlcMode:
    try:
        return LlcMode(raw)
    except ValueError:
        raise InvalidField(f"invalid LLC mode {raw}") from None


def decode(data: bytes) -> Telegram:
    """Inverse of :func:`encode`; raises a :class:`DecodeError` subclass on bad input."""
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise TruncatedHeader(f"datagram of {len(data)} bytes is shorter than the header")
    msg_id, length = HEADER.unpack_from(data)
    cls = BY_ID.get(msg_id)
    if cls is None:
        raise UnknownMessageId(msg_id)
    actual = len(data) - HEADER_SIZE
    if actual < length:
        raise LengthMismatch(f"header declares {length} payload bytes, datagram has {actual}")
    if actual > length:
        raise TrailingBytes(f"{actual - length} bytes after the declared payload")
    body = data[HEADER_SIZE:]

    if cls is NavData:
        v = _fixed(_NAV, body, "NavData")
        if v[9] not in (0.0, 1.0):
            raise InvalidField(f"NavData.gps_fix must be 0 or 1, got {v[9]}")
        t = NavData(*v[:9], gps_fix=v[9] == 1.0)
    elif cls is LlcCommand:
        (raw,) = _fixed(_CMD, body, "LlcCommand")
        t = LlcCommand(_mode(raw))
    elif cls is LlcSetpoint:
        t = LlcSetpoint(*_fixed(_SETPOINT, body, "LlcSetpoint"))
    elif cls is LlcSetpointsCWolf:
        t = LlcSetpointsCWolf(tuple(_fixed(_PWM, body, "LlcSetpointsCWolf")))
    elif cls is LlcStatus:
        v = _fixed(_STATUS, body, "LlcStatus")
        flags = v[1:-1:2]
        if any(f not in (0, 1) for f in flags):
            raise InvalidField("LlcStatus.enabled bytes must be 0 or 1")
        t = LlcStatus(tuple(v[0:-1:2]), tuple(bool(f) for f in flags), _mode(v[-1]))
    else:
        if len(body) < _ERROR_HEAD.size:
            raise LengthMismatch("LlcError payload shorter than its fixed part")
        code, n = _ERROR_HEAD.unpack_from(body)
        text = body[_ERROR_HEAD.size:]
        if len(text) != n:
            raise LengthMismatch(f"LlcError message prefix says {n} bytes, payload has {len(text)}")
        try:
            t = LlcError(code, text.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise Utf8Error(f"LlcError message is not UTF-8: {exc.reason}") from None
    try:
        t.check()
    except TelegramError as exc:
        raise InvalidField(str(exc)) from None
    return t


def telegram_name(t_or_id) -> str:
    cls = BY_ID.get(t_or_id) if isinstance(t_or_id, int) else type(t_or_id)
    return {
        NavData: "NAV_Data",
        LlcCommand: "LLC_Command",
        LlcSetpoint: "LLC_Setpoint",
        LlcSetpointsCWolf: "LLC_Setpoints_CWolf",
        LlcStatus: "LLC_Status",
        LlcError: "LLC_Error",
    }.get(cls, "unknown")
