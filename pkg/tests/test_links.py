from __future__ import annotations

import os
import pty
import time

import pytest

from armbridge.errors import ConnectError
from armbridge.links import SIMULATOR_PORT, SerialLink, SimulatorLink, list_ports, open_link
from armbridge.simulator import Scenario
from armbridge.wire import (
    Frame,
    MsgType,
    StreamParser,
    TorqueCommand,
    decode_telemetry,
    encode_frame,
    encode_stop,
    encode_torque_command,
)


class TestListPorts:
    def test_simulator_always_present(self):
        ports = list_ports()
        assert ports[0].name == SIMULATOR_PORT

    def test_stable_ordering(self):
        assert [p.name for p in list_ports()] == [p.name for p in list_ports()]


class TestSerialLink:
    def test_missing_port_raises_connect_error(self):
        with pytest.raises(ConnectError):
            SerialLink("/dev/does-not-exist-7261")

    def test_pty_loopback_frames_decode(self):
        master_fd, slave_fd = pty.openpty()
        link = SerialLink(os.ttyname(slave_fd))
        try:
            frame = encode_frame(Frame(MsgType.HEARTBEAT, b"\x2a\x00"))
            os.write(master_fd, frame)
            parser = StreamParser()
            deadline = time.monotonic() + 2.0
            got = []
            while time.monotonic() < deadline and not got:
                frames, _ = parser.feed(link.read())
                got += frames
                time.sleep(0.005)
            assert got == [Frame(MsgType.HEARTBEAT, b"\x2a\x00")]
            # and the host->device direction
            link.write(encode_stop())
            time.sleep(0.05)
            echoed = os.read(master_fd, 64)
            assert echoed == encode_stop()
        finally:
            link.close()
            os.close(master_fd)
            os.close(slave_fd)


class TestSimulatorLink:
    def test_telemetry_flows_at_configured_rate(self):
        link = SimulatorLink(speed=20.0)  # 20x wall speed
        parser = StreamParser()
        frames = []
        deadline = time.monotonic() + 2.0
        while time.monotonic() < deadline and len(frames) < 30:
            frames += parser.feed(link.read())[0]
            time.sleep(0.002)
        telemetry = [f for f in frames if f.msg_type == MsgType.TELEMETRY]
        assert len(telemetry) >= 20
        samples = [decode_telemetry(f) for f in telemetry]
        # 100 Hz telemetry: consecutive device timestamps 10 ms apart
        deltas = {b.timestamp_us - a.timestamp_us for a, b in zip(samples, samples[1:])}
        assert deltas == {10_000}
        # seq increments by one, modulo 2^16
        for a, b in zip(samples, samples[1:]):
            assert b.seq == (a.seq + 1) % 65536

    def test_heartbeats_interleaved(self):
        link = SimulatorLink(speed=20.0)
        parser = StreamParser()
        frames = []
        deadline = time.monotonic() + 2.0
        while time.monotonic() < deadline and len(frames) < 60:
            frames += parser.feed(link.read())[0]
            time.sleep(0.002)
        assert any(f.msg_type == MsgType.HEARTBEAT for f in frames)

    def test_torque_command_applies_resistance(self):
        link = SimulatorLink(speed=50.0)
        link.write(encode_frame(encode_torque_command(TorqueCommand(resist_cnm=800))))
        assert link.sim.state.resist_nm == pytest.approx(8.0)
        link.write(encode_stop())
        assert link.sim.state.resist_nm == 0.0

    def test_mute_scenario_silences_stream(self):
        link = SimulatorLink(scenario=Scenario.parse("t=0.2 mute=1\n"), speed=50.0)
        time.sleep(0.1)  # 5 s of sim time at 50x
        link.read()
        start = time.monotonic()
        quiet = b""
        while time.monotonic() - start < 0.3:
            quiet += link.read(65536)
            time.sleep(0.01)
        assert quiet == b""

    def test_open_link_dispatch(self):
        link = open_link(SIMULATOR_PORT, speed=5.0)
        assert isinstance(link, SimulatorLink)
        link.close()
