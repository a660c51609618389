"""Framed binary codec and incremental stream parser for the robot link.

Frame layout on the wire (all multi-byte fields little-endian):

    0xAA 0x55 | type (1) | length (1) | payload (length bytes) | crc16 (2, lo hi)

The CRC is CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection,
no xor-out) computed over type || length || payload. Known message types
carry fixed-size payloads; anything else is reported as a decode error,
never an exception: the parser is total over arbitrary byte input.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from .errors import WireFormatError

SOF1 = 0xAA
SOF2 = 0x55

# type byte, length byte, both SOF bytes, CRC
_OVERHEAD = 6
MAX_PAYLOAD = 255
MAX_FRAME = MAX_PAYLOAD + _OVERHEAD

TORQUE_LIMIT_CNM = 3000  # 30 N.m hardware envelope


class MsgType(IntEnum):
    TELEMETRY = 0x01   # robot -> host
    TORQUE_CMD = 0x02  # host -> robot
    HEARTBEAT = 0x03   # bidirectional, 2-byte seq
    STOP = 0x04        # host -> robot, empty payload


# Fixed payload sizes per message type; the decoder enforces these.
PAYLOAD_SIZES = {
    MsgType.TELEMETRY: 17,
    MsgType.TORQUE_CMD: 3,
    MsgType.HEARTBEAT: 2,
    MsgType.STOP: 0,
}

_CRC_POLY = 0x1021
_CRC_INIT = 0xFFFF

_CRC_TABLE = []
for _byte in range(256):
    _reg = _byte << 8
    for _ in range(8):
        _reg = ((_reg << 1) ^ _CRC_POLY) & 0xFFFF if _reg & 0x8000 else (_reg << 1) & 0xFFFF
    _CRC_TABLE.append(_reg)


def crc16(data: bytes, crc: int = _CRC_INIT) -> int:
    """CRC-16/CCITT-FALSE over `data`. crc16(b"123456789") == 0x29B1."""
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ b) & 0xFF]
    return crc


@dataclass(frozen=True)
class Frame:
    """One framed message: a known type plus its fixed-size payload."""

    msg_type: int
    payload: bytes = b""

    def validate(self) -> None:
        if self.msg_type not in PAYLOAD_SIZES:
            raise WireFormatError(f"unknown message type 0x{self.msg_type:02x}")
        expected = PAYLOAD_SIZES[MsgType(self.msg_type)]
        if len(self.payload) != expected:
            raise WireFormatError(
                f"type 0x{self.msg_type:02x} payload must be {expected} bytes, "
                f"got {len(self.payload)}"
            )


@dataclass(frozen=True)
class TelemetryFrame:
    """One timestamped robot sample."""

    seq: int                  # u16, wraps
    timestamp_us: int         # u32 microseconds since device boot, wraps
    encoder_arm: int          # i32 ticks
    encoder_motor: int        # i32 ticks
    trigger_pressed: bool
    hand_present: bool
    torque_actual_cnm: int    # i16 centi-newton-meters


class TorqueMode(IntEnum):
    IDLE = 0
    RESIST = 1


@dataclass(frozen=True)
class TorqueCommand:
    resist_cnm: int           # u16 centi-newton-meters, <= TORQUE_LIMIT_CNM
    mode: TorqueMode = TorqueMode.RESIST


class ErrorKind(Enum):
    BAD_CRC = "BadCrc"
    BAD_LENGTH = "BadLength"
    UNKNOWN_TYPE = "UnknownType"
    DESYNC = "Desync"


@dataclass(frozen=True)
class DecodeError:
    kind: ErrorKind
    detail: str = ""


def encode_frame(frame: Frame) -> bytes:
    """Serialize a valid frame, including SOF and CRC."""
    if len(frame.payload) > MAX_PAYLOAD:
        raise WireFormatError(f"payload too long: {len(frame.payload)} > {MAX_PAYLOAD}")
    frame.validate()
    body = bytes([frame.msg_type & 0xFF, len(frame.payload)]) + frame.payload
    crc = crc16(body)
    return bytes([SOF1, SOF2]) + body + struct.pack("<H", crc)


_TELEMETRY_STRUCT = struct.Struct("<HIiiBh")

_FLAG_TRIGGER = 0x01
_FLAG_HAND = 0x02


def encode_telemetry(t: TelemetryFrame) -> Frame:
    flags = (_FLAG_TRIGGER if t.trigger_pressed else 0) | (_FLAG_HAND if t.hand_present else 0)
    payload = _TELEMETRY_STRUCT.pack(
        t.seq & 0xFFFF,
        t.timestamp_us & 0xFFFFFFFF,
        t.encoder_arm,
        t.encoder_motor,
        flags,
        t.torque_actual_cnm,
    )
    return Frame(MsgType.TELEMETRY, payload)


def decode_telemetry(f: Frame) -> TelemetryFrame:
    if f.msg_type != MsgType.TELEMETRY:
        raise WireFormatError(f"not a telemetry frame: type 0x{f.msg_type:02x}")
    if len(f.payload) != PAYLOAD_SIZES[MsgType.TELEMETRY]:
        raise WireFormatError(f"telemetry payload must be 17 bytes, got {len(f.payload)}")
    seq, ts, enc_arm, enc_motor, flags, torque = _TELEMETRY_STRUCT.unpack(f.payload)
    return TelemetryFrame(
        seq=seq,
        timestamp_us=ts,
        encoder_arm=enc_arm,
        encoder_motor=enc_motor,
        trigger_pressed=bool(flags & _FLAG_TRIGGER),
        hand_present=bool(flags & _FLAG_HAND),
        torque_actual_cnm=torque,
    )


def encode_torque_command(cmd: TorqueCommand) -> Frame:
    if not 0 <= cmd.resist_cnm <= TORQUE_LIMIT_CNM:
        raise WireFormatError(f"resist_cnm out of range: {cmd.resist_cnm}")
    return Frame(MsgType.TORQUE_CMD, struct.pack("<HB", cmd.resist_cnm, int(cmd.mode)))


def decode_torque_command(f: Frame) -> TorqueCommand:
    if f.msg_type != MsgType.TORQUE_CMD or len(f.payload) != 3:
        raise WireFormatError("not a torque command frame")
    resist, mode = struct.unpack("<HB", f.payload)
    if resist > TORQUE_LIMIT_CNM:
        raise WireFormatError(f"resist_cnm out of range: {resist}")
    if mode not in (TorqueMode.IDLE, TorqueMode.RESIST):
        raise WireFormatError(f"unknown torque mode {mode}")
    return TorqueCommand(resist_cnm=resist, mode=TorqueMode(mode))


def encode_heartbeat(seq: int) -> Frame:
    return Frame(MsgType.HEARTBEAT, struct.pack("<H", seq & 0xFFFF))


def decode_heartbeat(f: Frame) -> int:
    if f.msg_type != MsgType.HEARTBEAT or len(f.payload) != 2:
        raise WireFormatError("not a heartbeat frame")
    return struct.unpack("<H", f.payload)[0]


def encode_stop() -> bytes:
    return encode_frame(Frame(MsgType.STOP, b""))


@dataclass
class StreamParser:
    """Incremental frame parser; total over arbitrary byte input.

    Feed byte chunks as they arrive; well-formed frames come out in order,
    malformed regions come out as DecodeError values. Partial trailing
    frames are retained between calls. After corruption the parser drops
    bytes until the next 0xAA 0x55 pair, reporting one Desync per skipped
    region.
    """

    _buf: bytearray = field(default_factory=bytearray)
    _in_desync: bool = False

    def feed(self, data: bytes) -> tuple[list[Frame], list[DecodeError]]:
        self._buf.extend(data)
        frames: list[Frame] = []
        errors: list[DecodeError] = []
        buf = self._buf

        pos = 0
        n = len(buf)
        while True:
            # hunt for SOF, reporting one Desync per contiguous skipped run
            idx = buf.find(b"\xaa\x55", pos)
            if idx == -1:
                # no SOF pair; keep a lone trailing 0xAA, drop the rest
                keep = n - 1 if n > pos and buf[n - 1] == SOF1 else n
                if keep > pos and not self._in_desync:
                    self._in_desync = True
                    errors.append(DecodeError(ErrorKind.DESYNC, f"skipped {keep - pos} bytes"))
                pos = keep
                break
            if idx > pos and not self._in_desync:
                errors.append(DecodeError(ErrorKind.DESYNC, f"skipped {idx - pos} bytes"))
            pos = idx
            self._in_desync = False  # resynchronized at the SOF pair
            if pos + 4 > n:
                break  # header incomplete
            msg_type = buf[pos + 2]
            length = buf[pos + 3]
            end = pos + 4 + length + 2
            if end > n:
                break  # frame incomplete, wait for more bytes
            body = bytes(buf[pos + 2:pos + 4 + length])
            got_crc = buf[pos + 4 + length] | (buf[pos + 5 + length] << 8)
            if crc16(body) != got_crc:
                errors.append(DecodeError(ErrorKind.BAD_CRC, f"type 0x{msg_type:02x}"))
                # Frame boundary untrusted: resume the hunt just past this SOF.
                # The skip that follows belongs to the same corruption episode,
                # so it must not produce a second (Desync) report.
                self._in_desync = True
                pos += 2
                continue
            if msg_type not in PAYLOAD_SIZES:
                errors.append(DecodeError(ErrorKind.UNKNOWN_TYPE, f"type 0x{msg_type:02x}"))
                pos = end
                continue
            expected = PAYLOAD_SIZES[MsgType(msg_type)]
            if length != expected:
                errors.append(
                    DecodeError(
                        ErrorKind.BAD_LENGTH,
                        f"type 0x{msg_type:02x} length {length} != {expected}",
                    )
                )
                pos = end
                continue
            frames.append(Frame(msg_type, bytes(buf[pos + 4:pos + 4 + length])))
            pos = end

        del buf[:pos]
        return frames, errors

    def finish(self) -> list[DecodeError]:
        """Flush at end-of-stream: any pending bytes are a truncated frame."""
        errors: list[DecodeError] = []
        if self._buf and not self._in_desync:
            errors.append(DecodeError(ErrorKind.DESYNC, f"{len(self._buf)} bytes truncated at EOF"))
        self._buf.clear()
        self._in_desync = False
        return errors

    @property
    def pending(self) -> int:
        return len(self._buf)


def decode_stream(
    data: bytes, parser: StreamParser | None = None
) -> tuple[list[Frame], list[DecodeError], StreamParser]:
    """One-shot convenience wrapper around StreamParser.feed."""
    parser = parser or StreamParser()
    frames, errors = parser.feed(data)
    return frames, errors, parser
