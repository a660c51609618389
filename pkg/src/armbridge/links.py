"""Device links: a raw serial port or the built-in simulator.

Both expose the same non-blocking byte interface, so the bridge pipeline
never knows which one it is talking to. The serial side uses termios
directly (Linux), which also makes it testable against pseudo-terminal
pairs.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import ConnectError, LinkError
from .simulator import ArmSimulator, Scenario, SimParams
from .wire import (
    MsgType,
    StreamParser,
    TorqueMode,
    decode_torque_command,
    encode_frame,
    encode_heartbeat,
    encode_telemetry,
)

try:
    import termios
except ImportError:  # non-POSIX host: simulator only
    termios = None  # type: ignore[assignment]

DEFAULT_BAUD = 115200
DEFAULT_TELEMETRY_HZ = 100
HEARTBEAT_PERIOD_S = 0.2

SIMULATOR_PORT = "simulator"


@dataclass(frozen=True)
class PortInfo:
    name: str
    descriptor: str


def list_ports() -> list[PortInfo]:
    """Host serial ports plus the synthetic simulator entry; stable order.

    ARMBRIDGE_PORTS (colon-separated device paths) adds extra entries, which
    is how loopback pseudo-terminal ports surface in integration tests.
    """
    ports = [PortInfo(SIMULATOR_PORT, "built-in arm simulator")]
    descriptors: dict[str, str] = {}
    by_id = Path("/dev/serial/by-id")
    if by_id.is_dir():
        for link in sorted(by_id.iterdir()):
            descriptors[os.path.realpath(link)] = link.name
    for pattern in ("ttyUSB*", "ttyACM*"):
        for dev in sorted(Path("/dev").glob(pattern)):
            ports.append(PortInfo(str(dev), descriptors.get(str(dev), "serial device")))
    extra = os.environ.get("ARMBRIDGE_PORTS", "")
    for path in extra.split(":"):
        if path and Path(path).exists():
            ports.append(PortInfo(path, "configured port"))
    return ports


class SerialLink:
    """Non-blocking raw serial port."""

    def __init__(self, port: str, baud: int = DEFAULT_BAUD):
        if termios is None:
            raise ConnectError("serial ports are not supported on this host")
        self.name = port
        try:
            self.fd = os.open(port, os.O_RDWR | os.O_NOCTTY | os.O_NONBLOCK)
        except OSError as exc:
            raise ConnectError(f"cannot open {port}: {exc}") from exc
        try:
            baud_const = getattr(termios, f"B{baud}", None)
            if baud_const is None:
                raise ConnectError(f"unsupported baud rate {baud}")
            iflag, oflag, cflag, lflag, ispeed, ospeed, cc = termios.tcgetattr(self.fd)
            iflag = 0
            oflag = 0
            lflag = 0
            cflag = (cflag & ~(termios.CSIZE | termios.PARENB | termios.CSTOPB)
                     | termios.CS8 | termios.CREAD | termios.CLOCAL)
            cc = list(cc)
            cc[termios.VMIN] = 0
            cc[termios.VTIME] = 0
            termios.tcsetattr(
                self.fd, termios.TCSANOW,
                [iflag, oflag, cflag, lflag, baud_const, baud_const, cc],
            )
        except termios.error:
            # pseudo-terminals reject some attributes; raw fd I/O still works
            pass
        except ConnectError:
            os.close(self.fd)
            raise

    def read(self, max_bytes: int = 4096) -> bytes:
        try:
            return os.read(self.fd, max_bytes)
        except BlockingIOError:
            return b""
        except OSError as exc:
            raise LinkError(f"read failed on {self.name}: {exc}") from exc

    def write(self, data: bytes) -> None:
        view = memoryview(data)
        while view:
            try:
                written = os.write(self.fd, view)
            except BlockingIOError:
                time.sleep(0.001)
                continue
            except OSError as exc:
                raise LinkError(f"write failed on {self.name}: {exc}") from exc
            view = view[written:]

    def close(self) -> None:
        if self.fd is not None:
            os.close(self.fd)
            self.fd = None  # type: ignore[assignment]


class SimulatorLink:
    """Wall-clock paced simulator behind the byte-stream link interface.

    `speed` scales simulated time against wall time, which lets long
    scripted sessions run quickly in tests while using the exact same
    pipeline as real hardware.
    """

    def __init__(self, params: SimParams | None = None,
                 scenario: Scenario | None = None,
                 telemetry_hz: int = DEFAULT_TELEMETRY_HZ,
                 speed: float = 1.0):
        self.name = SIMULATOR_PORT
        self.sim = ArmSimulator(params=params, scenario=scenario)
        self.speed = speed
        dt = self.sim.params.dt
        self._steps_per_telemetry = max(1, round(1.0 / (telemetry_hz * dt)))
        self._steps_per_heartbeat = max(1, round(HEARTBEAT_PERIOD_S / dt))
        self._step_count = 0
        self._outbox = bytearray()
        self._parser = StreamParser()
        self._hb_seq = 0
        self._last_wall = time.monotonic()
        self._carry_s = 0.0
        self._closed = False

    def read(self, max_bytes: int = 4096) -> bytes:
        if self._closed:
            raise LinkError("link closed")
        self._pump()
        out = bytes(self._outbox[:max_bytes])
        del self._outbox[:max_bytes]
        return out

    def _pump(self) -> None:
        now = time.monotonic()
        dt = self.sim.params.dt
        self._carry_s += (now - self._last_wall) * self.speed
        self._last_wall = now
        steps = int(self._carry_s / dt)
        if steps <= 0:
            return
        # a stalled reader does not get unbounded catch-up, like real
        # hardware whose buffer would have overflowed
        steps = min(steps, int(1.0 / dt))
        self._carry_s -= steps * dt
        for _ in range(steps):
            self.sim.step()
            self._step_count += 1
            if self.sim.muted:
                continue
            if self._step_count % self._steps_per_telemetry == 0:
                self._outbox += encode_frame(encode_telemetry(self.sim.telemetry()))
            if self._step_count % self._steps_per_heartbeat == 0:
                self._outbox += encode_frame(encode_heartbeat(self._hb_seq))
                self._hb_seq = (self._hb_seq + 1) & 0xFFFF

    def write(self, data: bytes) -> None:
        if self._closed:
            raise LinkError("link closed")
        frames, _errors = self._parser.feed(data)
        if self.sim.muted:
            return  # silenced device hears nothing
        for frame in frames:
            if frame.msg_type == MsgType.TORQUE_CMD:
                cmd = decode_torque_command(frame)
                nm = cmd.resist_cnm / 100 if cmd.mode is TorqueMode.RESIST else 0.0
                self.sim.set_resistance(nm)
            elif frame.msg_type == MsgType.STOP:
                self.sim.set_resistance(0.0)
            # inbound heartbeats need no reply; telemetry is robot->host only

    def close(self) -> None:
        self._closed = True


DeviceLink = SerialLink | SimulatorLink


def open_link(port: str, baud: int = DEFAULT_BAUD,
              params: SimParams | None = None,
              scenario: Scenario | None = None,
              speed: float = 1.0,
              telemetry_hz: int = DEFAULT_TELEMETRY_HZ) -> DeviceLink:
    if port == SIMULATOR_PORT:
        return SimulatorLink(params=params, scenario=scenario,
                             telemetry_hz=telemetry_hz, speed=speed)
    return SerialLink(port, baud=baud)
