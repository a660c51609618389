"""Therapy session engine.

A session is an ordered list of (game, resistance torque) blocks; passing
a configured number of game levels advances to the next block, and the
whole session is bounded by an active-time cap. Safety pauses are tracked
as intervals and excluded from active time, and never reset level
progress. The engine is a deterministic state machine over an ordered
event queue, so replaying a recorded event log reproduces the identical
session record.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum

from .errors import PlanUnavailable, SessionClosed, SessionStillActive

MAX_TORQUE_NM = 30.0

DEFAULT_TORQUES_NM = (8.0, 16.0)
DEFAULT_LEVELS_TO_ADVANCE = 2
DEFAULT_TARGET_DURATION_S = (20 * 60, 30 * 60)


@dataclass(frozen=True)
class SessionBlock:
    game_id: str
    torque_nm: float
    levels_to_advance: int = DEFAULT_LEVELS_TO_ADVANCE


@dataclass(frozen=True)
class SessionPlan:
    blocks: tuple[SessionBlock, ...]
    target_duration_s: tuple[int, int] = DEFAULT_TARGET_DURATION_S

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("plan needs at least one block")
        for b in self.blocks:
            if not 0 <= b.torque_nm <= MAX_TORQUE_NM:
                raise ValueError(f"torque {b.torque_nm} outside [0, {MAX_TORQUE_NM}] N.m")
            if b.levels_to_advance < 1:
                raise ValueError("levels_to_advance must be >= 1")
        lo, hi = self.target_duration_s
        if lo <= 0 or hi < lo:
            raise ValueError("target_duration_s must be a nonempty (min, max) range")

    def to_dict(self) -> dict:
        return {
            "blocks": [
                {"game_id": b.game_id, "torque_nm": b.torque_nm,
                 "levels_to_advance": b.levels_to_advance}
                for b in self.blocks
            ],
            "target_duration_s": list(self.target_duration_s),
        }

    @classmethod
    def from_dict(cls, data: dict) -> SessionPlan:
        blocks = tuple(
            SessionBlock(
                game_id=str(b["game_id"]),
                torque_nm=float(b["torque_nm"]),
                levels_to_advance=int(b.get("levels_to_advance", DEFAULT_LEVELS_TO_ADVANCE)),
            )
            for b in data["blocks"]
        )
        duration = data.get("target_duration_s", DEFAULT_TARGET_DURATION_S)
        return cls(blocks=blocks, target_duration_s=(int(duration[0]), int(duration[1])))


def build_default_plan(game_ids) -> SessionPlan:
    """Two games, each played at the low and the high resistance level,
    advancing after two passed levels."""
    games = list(game_ids)
    if len(games) < 2:
        raise PlanUnavailable("default plan needs two configured games")
    low, high = DEFAULT_TORQUES_NM
    blocks = tuple(
        SessionBlock(game, torque)
        for game in games[:2]
        for torque in (low, high)
    )
    return SessionPlan(blocks=blocks)


class LevelKind(Enum):
    LEVEL_PASSED = "LevelPassed"
    LEVEL_FAILED = "LevelFailed"


class LevelSource(Enum):
    UI_MANUAL = "UIManual"
    GAME_HOOK = "GameHook"


@dataclass(frozen=True)
class LevelEvent:
    kind: LevelKind
    timestamp_us: int
    source: LevelSource = LevelSource.UI_MANUAL


@dataclass(frozen=True)
class PauseStarted:
    timestamp_us: int


@dataclass(frozen=True)
class PauseEnded:
    timestamp_us: int


@dataclass(frozen=True)
class Tick:
    timestamp_us: int


@dataclass(frozen=True)
class StopRequested:
    timestamp_us: int
    reason: str = "operator stop"


SessionEventT = LevelEvent | PauseStarted | PauseEnded | Tick | StopRequested


# commands emitted for the bridge layer to execute
@dataclass(frozen=True)
class SetTorque:
    torque_nm: float


@dataclass(frozen=True)
class OpenGame:
    game_id: str


@dataclass(frozen=True)
class EndSession:
    reason: str


@dataclass(frozen=True)
class Notify:
    message: str


@dataclass
class _BlockTrace:
    block_index: int
    entered_at_us: int
    levels_passed: int = 0
    levels_failed: int = 0
    pause_intervals: list[tuple[int, int]] = field(default_factory=list)


class SessionEngine:
    """Executes one SessionPlan; all timestamps are microseconds on the
    caller's clock, recorded relative to session start."""

    def __init__(self, plan: SessionPlan, session_id: str, subject_id: str,
                 started_at_wall: str = ""):
        self.plan = plan
        self.session_id = session_id
        self.subject_id = subject_id
        self.started_at_wall = started_at_wall
        self.started_at_us: int | None = None
        self.ended_at_us: int | None = None
        self.end_reason: str | None = None
        self.telemetry_ref = f"sessions/{session_id}.jsonl"
        self._trace: list[_BlockTrace] = []
        self._pause_open_since: int | None = None
        self._closed_pause_total_us = 0

    # -- state helpers

    @property
    def active(self) -> bool:
        return self.started_at_us is not None and self.ended_at_us is None

    @property
    def current_block_index(self) -> int:
        return self._trace[-1].block_index if self._trace else 0

    @property
    def current_block(self) -> SessionBlock:
        return self.plan.blocks[self.current_block_index]

    @property
    def levels_in_block(self) -> int:
        return self._trace[-1].levels_passed if self._trace else 0

    @property
    def paused(self) -> bool:
        return self._pause_open_since is not None

    def _rel(self, t_us: int) -> int:
        assert self.started_at_us is not None
        return t_us - self.started_at_us

    def active_time_us(self, now_us: int) -> int:
        """Wall time since start minus completed and open pause time."""
        if self.started_at_us is None:
            return 0
        end = self.ended_at_us if self.ended_at_us is not None else self._rel(now_us)
        paused = self._closed_pause_total_us
        if self._pause_open_since is not None:
            paused += end - self._pause_open_since
        return end - paused

    # -- lifecycle

    def start(self, t_us: int) -> list:
        if self.started_at_us is not None:
            raise SessionClosed("session already started")
        self.started_at_us = t_us
        first = self.plan.blocks[0]
        self._trace.append(_BlockTrace(block_index=0, entered_at_us=0))
        return [OpenGame(first.game_id), SetTorque(first.torque_nm),
                Notify(f"block 1/{len(self.plan.blocks)}")]

    def advance(self, event: SessionEventT) -> list:
        if self.started_at_us is None:
            raise SessionClosed("session not started")
        if self.ended_at_us is not None:
            raise SessionClosed("session already ended")
        t = self._rel(event.timestamp_us)
        commands: list = []

        if isinstance(event, LevelEvent):
            trace = self._trace[-1]
            if event.kind is LevelKind.LEVEL_FAILED:
                trace.levels_failed += 1
            else:
                trace.levels_passed += 1
                block = self.plan.blocks[trace.block_index]
                if trace.levels_passed >= block.levels_to_advance:
                    commands += self._enter_next_block(t)
        elif isinstance(event, PauseStarted):
            if self._pause_open_since is None:
                self._pause_open_since = t
        elif isinstance(event, PauseEnded):
            if self._pause_open_since is not None:
                self._trace[-1].pause_intervals.append((self._pause_open_since, t))
                self._closed_pause_total_us += t - self._pause_open_since
                self._pause_open_since = None
        elif isinstance(event, StopRequested):
            return commands + self._end(t, event.reason)
        # every event checks the active-time cap
        if self.ended_at_us is None:
            cap_us = self.plan.target_duration_s[1] * 1_000_000
            if self.active_time_us(event.timestamp_us) >= cap_us:
                commands += self._end(t, "time limit reached")
        return commands

    def _enter_next_block(self, t: int) -> list:
        prev = self.plan.blocks[self.current_block_index]
        next_index = self.current_block_index + 1
        if next_index >= len(self.plan.blocks):
            return self._end(t, "plan completed")
        block = self.plan.blocks[next_index]
        self._trace.append(_BlockTrace(block_index=next_index, entered_at_us=t))
        commands: list = []
        if block.game_id != prev.game_id:
            commands.append(OpenGame(block.game_id))
        commands.append(SetTorque(block.torque_nm))
        commands.append(Notify(f"block {next_index + 1}/{len(self.plan.blocks)}"))
        return commands

    def _end(self, t: int, reason: str) -> list:
        if self._pause_open_since is not None:
            self._trace[-1].pause_intervals.append((self._pause_open_since, t))
            self._closed_pause_total_us += t - self._pause_open_since
            self._pause_open_since = None
        self.ended_at_us = t
        self.end_reason = reason
        return [EndSession(reason)]

    # -- record

    def record(self) -> dict:
        """JSON-ready session record; stable across replays."""
        return {
            "session_id": self.session_id,
            "subject_id": self.subject_id,
            "started_at": self.started_at_wall,
            "started_at_us": 0 if self.started_at_us is not None else None,
            "ended_at_us": self.ended_at_us,
            "end_reason": self.end_reason,
            "plan": self.plan.to_dict(),
            "telemetry_ref": self.telemetry_ref,
            "block_trace": [
                {
                    "block_index": tr.block_index,
                    "entered_at_us": tr.entered_at_us,
                    "levels_passed": tr.levels_passed,
                    "levels_failed": tr.levels_failed,
                    "pause_intervals": [list(p) for p in tr.pause_intervals],
                }
                for tr in self._trace
            ],
        }


@dataclass(frozen=True)
class BlockSummary:
    block_index: int
    game_id: str
    torque_nm: float
    levels_passed: int
    active_duration_us: int
    pause_count: int
    pause_total_us: int


@dataclass(frozen=True)
class SessionSummary:
    session_id: str
    subject_id: str
    end_reason: str
    active_total_us: int
    pause_count: int
    pause_total_us: int
    blocks: list[BlockSummary]
    mean_abs_excursion_ticks: float
    trigger_press_count: int

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "subject_id": self.subject_id,
            "end_reason": self.end_reason,
            "active_total_us": self.active_total_us,
            "pause_count": self.pause_count,
            "pause_total_us": self.pause_total_us,
            "mean_abs_excursion_ticks": self.mean_abs_excursion_ticks,
            "trigger_press_count": self.trigger_press_count,
            "blocks": [
                {
                    "block_index": b.block_index,
                    "game_id": b.game_id,
                    "torque_nm": b.torque_nm,
                    "levels_passed": b.levels_passed,
                    "active_duration_us": b.active_duration_us,
                    "pause_count": b.pause_count,
                    "pause_total_us": b.pause_total_us,
                }
                for b in self.blocks
            ],
        }


def _telemetry_fields(sample) -> tuple[int, bool]:
    if isinstance(sample, dict):
        return int(sample["encoder_arm"]), bool(sample["trigger_pressed"])
    return sample.encoder_arm, sample.trigger_pressed


def summarize(record: dict, plan: SessionPlan | None = None, telemetry=()) -> SessionSummary:
    """Aggregate an ended session record, optionally folding in the
    telemetry stream for excursion and trigger statistics."""
    if record.get("ended_at_us") is None:
        raise SessionStillActive(record.get("session_id", "?"))
    plan = plan or SessionPlan.from_dict(record["plan"])
    trace = record["block_trace"]
    ended = record["ended_at_us"]

    blocks = []
    for i, tr in enumerate(trace):
        exit_us = trace[i + 1]["entered_at_us"] if i + 1 < len(trace) else ended
        pause_total = sum(e - s for s, e in tr["pause_intervals"])
        block = plan.blocks[tr["block_index"]]
        blocks.append(BlockSummary(
            block_index=tr["block_index"],
            game_id=block.game_id,
            torque_nm=block.torque_nm,
            levels_passed=tr["levels_passed"],
            active_duration_us=(exit_us - tr["entered_at_us"]) - pause_total,
            pause_count=len(tr["pause_intervals"]),
            pause_total_us=pause_total,
        ))

    excursion = 0.0
    presses = 0
    count = 0
    baseline = None
    prev_trigger = False
    for sample in telemetry:
        ticks, trigger = _telemetry_fields(sample)
        if baseline is None:
            baseline = ticks
        excursion += abs(ticks - baseline)
        count += 1
        if trigger and not prev_trigger:
            presses += 1
        prev_trigger = trigger

    return SessionSummary(
        session_id=record["session_id"],
        subject_id=record["subject_id"],
        end_reason=record.get("end_reason") or "",
        active_total_us=sum(b.active_duration_us for b in blocks),
        pause_count=sum(b.pause_count for b in blocks),
        pause_total_us=sum(b.pause_total_us for b in blocks),
        blocks=blocks,
        mean_abs_excursion_ticks=excursion / count if count else 0.0,
        trigger_press_count=presses,
    )


def summary_to_csv(summary: SessionSummary) -> str:
    """One row per block, RFC-4180 text."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([
        "session_id", "subject_id", "block_index", "game_id", "torque_nm",
        "levels_passed", "active_duration_us", "pause_count", "pause_total_us",
    ])
    for b in summary.blocks:
        writer.writerow([
            summary.session_id, summary.subject_id, b.block_index, b.game_id,
            b.torque_nm, b.levels_passed, b.active_duration_us,
            b.pause_count, b.pause_total_us,
        ])
    return out.getvalue()


def record_to_json(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True)


def record_from_json(text: str) -> dict:
    return json.loads(text)
