"""Safety interlock state machine.

Freezes the cursor and stops the robot whenever the hand leaves the
joystick, the link goes quiet, or the stream corrupts. The machine is a
pure function from (state, event) to (state, actions); the bridge layer
executes the actions, which keeps every path testable and lets the test
suite exhaustively model-check the reachable configurations.

Structural guarantees, verified by `model_check`:
  * cursor output is enabled only in RUNNING, and RUNNING always has
    hand_present = True;
  * leaving RUNNING always emits FreezeCursor and exactly one SendStop;
  * entering RUNNING always emits SendTorque and ResumeCursor.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum


class Stage(Enum):
    DISCONNECTED = "Disconnected"
    IDLE = "Idle"
    RUNNING = "Running"
    SAFETY_PAUSED = "SafetyPaused"
    FAULTED = "Faulted"


class Cause(Enum):
    NONE = "None"
    HAND_OFF = "HandOff"
    HEARTBEAT_TIMEOUT = "HeartbeatTimeout"
    CRC_BURST = "CrcBurst"
    OPERATOR_STOP = "OperatorStop"


class EventKind(Enum):
    HAND_OFF = "HandOff"
    HAND_ON = "HandOn"
    TELEMETRY = "Telemetry"
    HEARTBEAT_MISS = "HeartbeatMiss"
    CRC_ERROR = "CrcError"
    CONNECT = "Connect"
    DISCONNECT = "Disconnect"
    START = "Start"
    STOP = "Stop"


class ActionKind(Enum):
    FREEZE_CURSOR = "FreezeCursor"
    RESUME_CURSOR = "ResumeCursor"
    SEND_STOP = "SendStop"
    SEND_TORQUE = "SendTorque"
    NOTIFY_UI = "NotifyUI"


OPERATOR_EVENTS = frozenset({EventKind.CONNECT, EventKind.DISCONNECT,
                             EventKind.START, EventKind.STOP})


@dataclass(frozen=True)
class SafetyEvent:
    kind: EventKind
    timestamp_us: int


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    torque_nm: float | None = None
    message: str = ""


@dataclass(frozen=True)
class SafetyParams:
    resume_dwell_us: int = 500_000      # continuous hand-on before resume
    heartbeat_period_us: int = 200_000
    heartbeat_miss_limit: int = 3       # consecutive misses before fault
    crc_burst_limit: int = 20           # errors within crc_window_us before fault
    crc_window_us: int = 1_000_000


DEFAULT_SAFETY_PARAMS = SafetyParams()


@dataclass(frozen=True)
class SafetyState:
    stage: Stage = Stage.DISCONNECTED
    since_us: int = 0
    cause: Cause = Cause.NONE
    hand_present: bool = False
    hand_on_since_us: int | None = None   # dwell clock, SAFETY_PAUSED only
    miss_count: int = 0
    crc_times_us: tuple[int, ...] = ()
    active_torque_nm: float = 0.0         # restored on resume

    @classmethod
    def initial(cls) -> SafetyState:
        return cls()


def record_torque(state: SafetyState, torque_nm: float) -> SafetyState:
    """Remember the commanded resistance so a resume can restore it."""
    return replace(state, active_torque_nm=torque_nm)


def _enter_running(state: SafetyState, now: int) -> tuple[SafetyState, list[Action]]:
    new = replace(state, stage=Stage.RUNNING, since_us=now, cause=Cause.NONE,
                  hand_on_since_us=None)
    return new, [
        Action(ActionKind.SEND_TORQUE, torque_nm=state.active_torque_nm),
        Action(ActionKind.RESUME_CURSOR),
        Action(ActionKind.NOTIFY_UI, message="running"),
    ]


def _leave_running(state: SafetyState, now: int, stage: Stage, cause: Cause,
                   message: str) -> tuple[SafetyState, list[Action]]:
    new = replace(state, stage=stage, since_us=now, cause=cause, hand_on_since_us=None)
    return new, [
        Action(ActionKind.FREEZE_CURSOR),
        Action(ActionKind.SEND_STOP),
        Action(ActionKind.NOTIFY_UI, message=message),
    ]


def transition(
    state: SafetyState, event: SafetyEvent,
    params: SafetyParams = DEFAULT_SAFETY_PARAMS,
) -> tuple[SafetyState, list[Action]]:
    """Total, deterministic transition function."""
    now = event.timestamp_us
    kind = event.kind

    # bookkeeping tracked in every stage
    hand = state.hand_present
    if kind is EventKind.HAND_ON:
        hand = True
    elif kind is EventKind.HAND_OFF:
        hand = False

    miss = state.miss_count
    if kind in (EventKind.TELEMETRY, EventKind.CONNECT):
        miss = 0
    elif kind is EventKind.HEARTBEAT_MISS:
        # saturating: anything at the limit faults (or is already Faulted)
        miss = min(miss + 1, params.heartbeat_miss_limit)

    crc = tuple(t for t in state.crc_times_us if now - t <= params.crc_window_us)
    if kind is EventKind.CRC_ERROR:
        # only the newest limit+1 entries can ever matter to the burst check
        crc = (crc + (now,))[-(params.crc_burst_limit + 1):]

    state = replace(state, hand_present=hand, miss_count=miss, crc_times_us=crc)

    # fault triggers outrank everything else; Faulted clears only via
    # Disconnect -> Connect
    if state.stage is not Stage.FAULTED:
        fault_cause = None
        if miss >= params.heartbeat_miss_limit:
            fault_cause = Cause.HEARTBEAT_TIMEOUT
        elif len(crc) > params.crc_burst_limit:
            fault_cause = Cause.CRC_BURST
        if fault_cause is not None:
            state = replace(state, miss_count=0, crc_times_us=())
            if state.stage is Stage.RUNNING:
                return _leave_running(state, now, Stage.FAULTED, fault_cause,
                                      f"faulted: {fault_cause.value}")
            new = replace(state, stage=Stage.FAULTED, since_us=now,
                          cause=fault_cause, hand_on_since_us=None)
            return new, [Action(ActionKind.NOTIFY_UI, message=f"faulted: {fault_cause.value}")]

    if kind is EventKind.DISCONNECT:
        if state.stage is Stage.DISCONNECTED:
            return state, [Action(ActionKind.NOTIFY_UI, message="already disconnected")]
        if state.stage is Stage.RUNNING:
            return _leave_running(state, now, Stage.DISCONNECTED, Cause.NONE, "disconnected")
        new = replace(state, stage=Stage.DISCONNECTED, since_us=now,
                      cause=Cause.NONE, hand_on_since_us=None)
        return new, [Action(ActionKind.NOTIFY_UI, message="disconnected")]

    if kind is EventKind.CONNECT:
        if state.stage is Stage.DISCONNECTED:
            new = replace(state, stage=Stage.IDLE, since_us=now, cause=Cause.NONE)
            return new, [Action(ActionKind.NOTIFY_UI, message="connected")]
        return state, [Action(ActionKind.NOTIFY_UI, message="already connected")]

    if state.stage is Stage.FAULTED:
        # inert until the operator reconnects
        if kind in OPERATOR_EVENTS:
            return state, [Action(ActionKind.NOTIFY_UI, message="faulted; reconnect to clear")]
        return state, []

    if kind is EventKind.START:
        if state.stage is Stage.IDLE:
            if state.hand_present:
                return _enter_running(state, now)
            new = replace(state, stage=Stage.SAFETY_PAUSED, since_us=now,
                          cause=Cause.HAND_OFF, hand_on_since_us=None)
            return new, [Action(ActionKind.NOTIFY_UI, message="armed; waiting for hand")]
        if state.stage is not Stage.SAFETY_PAUSED:
            return state, [Action(ActionKind.NOTIFY_UI, message="start rejected")]
        # START while paused falls through to the dwell check below

    if kind is EventKind.STOP:
        if state.stage is Stage.RUNNING:
            return _leave_running(state, now, Stage.IDLE, Cause.OPERATOR_STOP, "stopped")
        if state.stage is Stage.SAFETY_PAUSED:
            new = replace(state, stage=Stage.IDLE, since_us=now,
                          cause=Cause.OPERATOR_STOP, hand_on_since_us=None)
            return new, [Action(ActionKind.NOTIFY_UI, message="stopped")]
        return state, [Action(ActionKind.NOTIFY_UI, message="stop rejected")]

    if kind is EventKind.HAND_OFF:
        if state.stage is Stage.RUNNING:
            return _leave_running(state, now, Stage.SAFETY_PAUSED, Cause.HAND_OFF,
                                  "hands off; paused")
        return replace(state, hand_on_since_us=None), []

    if kind is EventKind.HAND_ON and state.stage is Stage.SAFETY_PAUSED:
        if state.hand_on_since_us is None:
            state = replace(state, hand_on_since_us=now)

    # resume once the hand has been on continuously for the dwell time
    if (
        state.stage is Stage.SAFETY_PAUSED
        and state.hand_present
        and state.hand_on_since_us is not None
        and now - state.hand_on_since_us >= params.resume_dwell_us
    ):
        return _enter_running(state, now)

    return state, []


# --- exhaustive bounded model check -----------------------------------------
#
# Enumerating all raw event sequences of length <= 8 over the
# 9-kind x 2-delay alphabet is 18^8 sequences; configurations that agree on
# every behavior-relevant field have identical futures, so a breadth-first
# walk over canonicalized configurations checks exactly the same set of
# transitions. Times are rebased to the current event so the space is finite.

CHECK_DELTAS_US = (100_000, 600_000)  # below and above the resume dwell


@dataclass
class CheckReport:
    configs: int = 0
    transitions: int = 0
    max_depth: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _canonical(state: SafetyState, params: SafetyParams):
    dwell = None
    if state.hand_on_since_us is not None:
        # elapsed dwell, capped: anything at or past the threshold acts alike
        dwell = min(-state.hand_on_since_us, params.resume_dwell_us)
    ages = tuple(sorted(min(-t, params.crc_window_us + 1) for t in state.crc_times_us))
    return (state.stage, state.cause, state.hand_present, state.miss_count, dwell, ages)


def _materialize(config) -> SafetyState:
    stage, cause, hand, miss, dwell, ages = config
    return SafetyState(
        stage=stage,
        since_us=0,
        cause=cause,
        hand_present=hand,
        hand_on_since_us=None if dwell is None else -dwell,
        miss_count=miss,
        crc_times_us=tuple(-a for a in ages),
    )


def model_check(max_depth: int = 8,
                params: SafetyParams = DEFAULT_SAFETY_PARAMS) -> CheckReport:
    """Walk every event sequence of length <= max_depth (deduplicated by
    configuration) and assert the interlock invariants on each transition."""
    report = CheckReport()
    initial = (_canonical(SafetyState.initial(), params), True)
    seen = {initial}
    queue = deque([(initial, 0)])

    while queue:
        (config, stop_armed), depth = queue.popleft()
        report.configs += 1
        report.max_depth = max(report.max_depth, depth)
        if depth >= max_depth:
            continue
        for kind in EventKind:
            for delta in CHECK_DELTAS_US:
                before = _materialize(config)
                after, actions = transition(
                    before, SafetyEvent(kind, timestamp_us=delta), params
                )
                report.transitions += 1
                counts = {a: 0 for a in ActionKind}
                for action in actions:
                    counts[action.kind] += 1

                if after.stage is Stage.RUNNING and not after.hand_present:
                    report.violations.append(
                        f"cursor enabled with hand off: {config} --{kind.value}/{delta}-->"
                    )
                left_running = before.stage is Stage.RUNNING and after.stage is not Stage.RUNNING
                entered_running = before.stage is not Stage.RUNNING and after.stage is Stage.RUNNING
                if counts[ActionKind.SEND_STOP] != (1 if left_running else 0):
                    report.violations.append(
                        f"SendStop count {counts[ActionKind.SEND_STOP]} on "
                        f"{before.stage.value}->{after.stage.value} via {kind.value}"
                    )
                if counts[ActionKind.FREEZE_CURSOR] != (1 if left_running else 0):
                    report.violations.append(f"FreezeCursor mismatch via {kind.value}")
                if counts[ActionKind.RESUME_CURSOR] != (1 if entered_running else 0):
                    report.violations.append(f"ResumeCursor mismatch via {kind.value}")

                armed = stop_armed
                if counts[ActionKind.SEND_STOP]:
                    if not armed:
                        report.violations.append(
                            f"second SendStop without intervening Running via {kind.value}"
                        )
                    armed = False
                if after.stage is Stage.RUNNING:
                    armed = True

                # rebase so the event we just consumed sits at time zero
                shifted = replace(
                    after,
                    hand_on_since_us=None if after.hand_on_since_us is None
                    else after.hand_on_since_us - delta,
                    crc_times_us=tuple(t - delta for t in after.crc_times_us),
                )
                nxt = (_canonical(shifted, params), armed)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append((nxt, depth + 1))
    return report
