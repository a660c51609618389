"""Deterministic physics model of the one-DOF arm with active resistance.

The model is a damped rotor driven by the user's torque against a
Coulomb-style resistance level commanded over the wire:

    J * dw/dt = tau_user - tau_resist * sign(w) - b * w

integrated with a semi-implicit Euler step. Resistance is applied as an
impulse that opposes velocity but can never reverse it within a step, and
a static-hold rule keeps the arm at rest while the user torque does not
exceed the resistance. Telemetry produced here is byte-identical to what
real hardware would send, so the whole stack runs with no device.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

from .errors import ModelFault, ScenarioError
from .wire import TelemetryFrame

OMEGA_EPS = 1e-3  # rad/s; below this the arm counts as stationary


@dataclass(frozen=True)
class SimParams:
    inertia_J: float = 0.05        # kg.m^2
    viscous_b: float = 0.8         # N.m.s/rad
    dt: float = 0.001              # s
    ticks_per_rev: int = 4096
    theta_min: float = -math.pi / 4
    theta_max: float = math.pi / 4
    gear_ratio: int = 20
    v_max: float = 10.0            # rad/s safety clamp

    def __post_init__(self):
        if self.inertia_J <= 0 or self.viscous_b <= 0:
            raise ValueError("inertia_J and viscous_b must be positive")
        if not 0 < self.dt <= 0.01:
            raise ValueError("dt must be in (0, 0.01]")
        if self.ticks_per_rev <= 0:
            raise ValueError("ticks_per_rev must be positive")
        if self.theta_min >= self.theta_max:
            raise ValueError("theta_min must be below theta_max")
        # one-step contraction; guarantees kinetic energy cannot grow
        # under zero user torque
        if self.dt * self.viscous_b >= self.inertia_J:
            raise ValueError("dt * viscous_b must stay below inertia_J")


@dataclass(frozen=True)
class ArmState:
    angle_rad: float = 0.0
    velocity_rad_s: float = 0.0
    user_torque_nm: float = 0.0
    resist_nm: float = 0.0
    hand_present: bool = True
    trigger_pressed: bool = False
    time_us: int = 0


def step(state: ArmState, params: SimParams) -> ArmState:
    """Advance the arm by one dt; pure, deterministic."""
    values = (state.angle_rad, state.velocity_rad_s, state.user_torque_nm, state.resist_nm)
    if not all(math.isfinite(v) for v in values):
        raise ModelFault(f"non-finite state: {state}")

    w = state.velocity_rad_s
    tau_u = state.user_torque_nm
    tau_r = abs(state.resist_nm)
    p = params

    if abs(w) < OMEGA_EPS and abs(tau_u) <= tau_r:
        # static hold: resistance pins the arm
        w_new = 0.0
        angle = state.angle_rad
    else:
        # viscous + user torque first, then the resistance impulse, which
        # opposes motion but cannot reverse it within a single step
        w_free = w + p.dt * (tau_u - p.viscous_b * w) / p.inertia_J
        impulse = p.dt * tau_r / p.inertia_J
        w_new = w_free - math.copysign(min(impulse, abs(w_free)), w_free)
        w_new = max(-p.v_max, min(p.v_max, w_new))
        angle = state.angle_rad + p.dt * w_new
        if angle <= p.theta_min:
            angle, w_new = p.theta_min, 0.0
        elif angle >= p.theta_max:
            angle, w_new = p.theta_max, 0.0

    return replace(
        state,
        angle_rad=angle,
        velocity_rad_s=w_new,
        time_us=state.time_us + round(p.dt * 1e6),
    )


def sample_telemetry(state: ArmState, seq: int, params: SimParams) -> TelemetryFrame:
    """Quantize the state into one wire-format telemetry sample."""
    encoder_arm = round(state.angle_rad / math.tau * params.ticks_per_rev)
    return TelemetryFrame(
        seq=seq & 0xFFFF,
        timestamp_us=state.time_us & 0xFFFFFFFF,
        encoder_arm=encoder_arm,
        encoder_motor=encoder_arm * params.gear_ratio,
        trigger_pressed=state.trigger_pressed,
        hand_present=state.hand_present,
        torque_actual_cnm=round(state.resist_nm * 100),
    )


_SCENARIO_LINE = re.compile(
    r"^t=(?P<t>\d+(?:\.\d+)?)\s+(?P<key>user_torque|hand|trigger|mute)=(?P<value>-?\d+(?:\.\d+)?)$"
)


@dataclass(frozen=True)
class ScenarioCommand:
    t_s: float
    key: str    # user_torque | hand | trigger | mute
    value: float


@dataclass
class Scenario:
    """Timed input script for the simulator, one command per line.

    Grammar: `t=<seconds> user_torque=<nm>`, `t=<s> hand=<0|1>`,
    `t=<s> trigger=<0|1>`, plus `t=<s> mute=<0|1>` to silence the device
    (fault injection). Blank lines and `#` comments are ignored.
    """

    commands: list[ScenarioCommand] = field(default_factory=list)

    @classmethod
    def parse(cls, text: str) -> Scenario:
        commands = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = _SCENARIO_LINE.match(line)
            if not m:
                raise ScenarioError(f"line {lineno}: cannot parse {raw!r}")
            key = m.group("key")
            value = float(m.group("value"))
            if key in ("hand", "trigger", "mute") and value not in (0.0, 1.0):
                raise ScenarioError(f"line {lineno}: {key} must be 0 or 1")
            commands.append(ScenarioCommand(float(m.group("t")), key, value))
        commands.sort(key=lambda c: c.t_s)
        return cls(commands)

    @classmethod
    def load(cls, path) -> Scenario:
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())


class ArmSimulator:
    """Stepable arm with a scenario script and a telemetry sequence counter."""

    def __init__(self, params: SimParams | None = None,
                 scenario: Scenario | None = None,
                 initial: ArmState | None = None):
        self.params = params or SimParams()
        self.scenario = scenario or Scenario()
        self.state = initial or ArmState()
        self.muted = False
        self._seq = 0
        self._cursor = 0  # next scenario command to apply

    def set_user_torque(self, nm: float) -> None:
        self.state = replace(self.state, user_torque_nm=nm)

    def set_resistance(self, nm: float) -> None:
        self.state = replace(self.state, resist_nm=nm)

    def set_hand_presence(self, present: bool) -> None:
        self.state = replace(self.state, hand_present=present)

    def press_trigger(self, pressed: bool) -> None:
        self.state = replace(self.state, trigger_pressed=pressed)

    def _apply_due_commands(self) -> None:
        now_s = self.state.time_us / 1e6
        cmds = self.scenario.commands
        while self._cursor < len(cmds) and cmds[self._cursor].t_s <= now_s:
            cmd = cmds[self._cursor]
            self._cursor += 1
            if cmd.key == "user_torque":
                self.set_user_torque(cmd.value)
            elif cmd.key == "hand":
                self.set_hand_presence(bool(cmd.value))
            elif cmd.key == "trigger":
                self.press_trigger(bool(cmd.value))
            elif cmd.key == "mute":
                self.muted = bool(cmd.value)

    def step(self, n: int = 1) -> None:
        for _ in range(n):
            self._apply_due_commands()
            self.state = step(self.state, self.params)

    def telemetry(self) -> TelemetryFrame:
        frame = sample_telemetry(self.state, self._seq, self.params)
        self._seq = (self._seq + 1) & 0xFFFF
        return frame

    @property
    def time_s(self) -> float:
        return self.state.time_us / 1e6
