"""The bridge daemon.

Owns the device link (serial or simulator), runs the frame pipeline
(decode, store, safety, mapping, session), and exposes a JSON REST API
plus a server-sent-events stream for consoles and games.

Pipeline ordering per telemetry frame: store append happens before any
stream emission, and safety actions preempt cursor emission. Cursor and
pointer messages are produced only while the interlock is in Running.

Concurrency: one pump thread owns the link and drives the pipeline; HTTP
handler threads call into the bridge under a single lock, which serializes
commands with frame processing (the moral equivalent of the ordered event
queue). Each stream client gets a writer thread fed from its own queue;
cursor and telemetry messages are coalesced latest-wins so a slow client
never builds a backlog, while safety/session/pointer messages are never
dropped.
"""

from __future__ import annotations

import json
import re
import threading
import time
from collections import deque
from dataclasses import asdict
from datetime import datetime, timezone
from typing import Callable
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import session as sessionmod
from .config import BridgeConfig
from .errors import (
    AlreadyConnected,
    ArmBridgeError,
    CalibrationTooNarrow,
    ConnectError,
    LinkError,
    NotFound,
    PlanUnavailable,
    ScenarioError,
    SessionClosed,
)
from .links import SIMULATOR_PORT, list_ports, open_link
from .mapping import CursorMapper, TriggerDebouncer, calibrate, save_profile, with_calibration
from .safety import (
    Action,
    ActionKind,
    DEFAULT_SAFETY_PARAMS,
    EventKind,
    SafetyEvent,
    SafetyState,
    Stage,
    record_torque,
    transition,
)
from .session import (
    EndSession,
    LevelEvent,
    LevelKind,
    LevelSource,
    OpenGame,
    SessionEngine,
    SessionPlan,
    SetTorque,
    StopRequested,
    Tick,
    build_default_plan,
)
from .simulator import Scenario
from .store import TelemetryStore
from .survey import (
    SurveyResponse,
    aggregate,
    parse_level,
    render_table,
    summaries_to_csv,
    summaries_to_json,
)
from .wire import (
    MsgType,
    StreamParser,
    TorqueCommand,
    TorqueMode,
    decode_telemetry,
    encode_frame,
    encode_heartbeat,
    encode_stop,
    encode_torque_command,
    ErrorKind,
)

CURSOR_STREAM_INTERVAL_US = 20_000     # 50 Hz coalesced
TELEMETRY_STREAM_INTERVAL_US = 100_000  # 10 Hz coalesced
PUMP_IDLE_SLEEP_S = 0.002
ENGINE_TICK_PERIOD_US = 1_000_000
HOST_HEARTBEAT_PERIOD_US = 200_000


def mono_us() -> int:
    return time.monotonic_ns() // 1000


def wall_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class ApiError(ArmBridgeError):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


# --- stream fan-out ---------------------------------------------------------

COALESCED_TYPES = {
    "cursor": CURSOR_STREAM_INTERVAL_US,
    "telemetry": TELEMETRY_STREAM_INTERVAL_US,
}


class StreamClient:
    def __init__(self):
        self.cond = threading.Condition()
        self.critical: deque[tuple[int, dict]] = deque()
        self.latest: dict[str, tuple[int, dict]] = {}
        self.last_sent: dict[str, int] = {}
        self.closed = False

    def offer(self, seq: int, message: dict) -> None:
        with self.cond:
            if self.closed:
                return
            mtype = message["type"]
            if mtype in COALESCED_TYPES:
                self.latest[mtype] = (seq, message)
            else:
                self.critical.append((seq, message))
            self.cond.notify()

    def take(self, timeout_s: float = 0.05) -> list[dict]:
        """Due messages in publish order.

        Coalesced types are rate-limited between themselves, but a pending
        coalesced message always flushes ahead of a later critical message,
        so clients never observe a cursor that was produced before a safety
        transition arriving after it.
        """
        with self.cond:
            if not self.critical and not self.latest:
                self.cond.wait(timeout_s)
            out = list(self.critical)
            self.critical.clear()
            barrier = out[-1][0] if out else None
            now = mono_us()
            for mtype, interval in COALESCED_TYPES.items():
                pending = self.latest.get(mtype)
                if pending is None:
                    continue
                due = now - self.last_sent.get(mtype, 0) >= interval
                if due or (barrier is not None and pending[0] < barrier):
                    out.append(pending)
                    self.last_sent[mtype] = now
                    del self.latest[mtype]
            out.sort(key=lambda pair: pair[0])
            return [message for _, message in out]

    def close(self) -> None:
        with self.cond:
            self.closed = True
            self.cond.notify()


class StreamHub:
    def __init__(self):
        self._lock = threading.Lock()
        self._clients: list[StreamClient] = []
        self._seq = 0

    def attach(self) -> StreamClient:
        client = StreamClient()
        with self._lock:
            self._clients.append(client)
        return client

    def detach(self, client: StreamClient) -> None:
        client.close()
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)

    def publish(self, mtype: str, t_us: int, body: dict) -> None:
        message = {"type": mtype, "t_us": t_us, "body": body}
        with self._lock:
            self._seq += 1
            seq = self._seq
            clients = list(self._clients)
        for client in clients:
            client.offer(seq, message)

    @property
    def client_count(self) -> int:
        with self._lock:
            return len(self._clients)


# --- the bridge itself ------------------------------------------------------

# Any consumer of generated click events: (kind, x, y, t_us). The bridge
# attaches a record sink and a stream sink; an OS-level pointer injector
# would attach here instead of touching the pipeline.
PointerSink = Callable[[str, "int | None", "int | None", int], None]


class Bridge:
    def __init__(self, config: BridgeConfig):
        self.config = config
        self.store = TelemetryStore(config.data_dir)
        self.hub = StreamHub()
        self.lock = threading.RLock()
        self.safety = SafetyState.initial()
        self.safety_params = DEFAULT_SAFETY_PARAMS
        self.mapper = CursorMapper(config.profile)
        self.debouncer = TriggerDebouncer()
        self.parser = StreamParser()
        self.link = None
        self.link_status = "Closed"
        self.link_error = ""
        self.engine: SessionEngine | None = None
        self.writer = None
        self._session_t0_us = 0
        self._last_hand: bool | None = None
        self._last_frame_us: int | None = None
        self._next_miss_check_us = 0
        self._next_engine_tick_us = 0
        self._next_host_hb_us = 0
        self._hb_seq = 0
        self._sweep: list | None = None
        self._survey_responses: list[SurveyResponse] = []
        self._pump_stop: threading.Event | None = None
        self._pump_thread: threading.Thread | None = None
        self.stats = {
            "frames_received": 0, "telemetry_frames": 0, "decode_errors": 0,
            "crc_errors": 0, "seq_gaps": 0, "cursor_emitted": 0,
        }
        self._last_seq: int | None = None
        self._survey_path = Path(config.data_dir) / "surveys.jsonl"
        self._load_survey_responses()
        self.pointer_sinks: list[PointerSink] = [
            self._pointer_to_store, self._pointer_to_stream,
        ]

    # -- pointer sinks: every emitted pointer event reaches every sink

    def _pointer_to_store(self, kind: str, x, y, t_us: int) -> None:
        self._log(t_us, "Pointer", {"kind": kind, "x": x, "y": y})

    def _pointer_to_stream(self, kind: str, x, y, t_us: int) -> None:
        self.hub.publish("pointer", t_us, {"kind": kind, "x": x, "y": y})

    def add_pointer_sink(self, sink: PointerSink) -> None:
        self.pointer_sinks.append(sink)

    def _emit_pointer(self, kind: str, x, y, t_us: int) -> None:
        for sink in self.pointer_sinks:
            sink(kind, x, y, t_us)

    # -- survey persistence

    def _load_survey_responses(self) -> None:
        if not self._survey_path.exists():
            return
        for line in self._survey_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            answers = {q: parse_level(v) for q, v in data["answers"].items()}
            self._survey_responses.append(SurveyResponse(data["subject_id"], answers))

    def add_survey_response(self, subject_id: str, answers: dict) -> int:
        parsed = {q: parse_level(v) for q, v in answers.items()}
        needed = set(self.config.questionnaire.question_ids)
        missing = needed - set(parsed)
        if missing:
            raise ApiError(400, "incomplete_response",
                           f"missing answers: {', '.join(sorted(missing))}")
        response = SurveyResponse(subject_id, parsed)
        with self.lock:
            self._survey_responses.append(response)
            self._survey_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self._survey_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(
                    {"subject_id": subject_id,
                     "answers": {q: level.value for q, level in parsed.items()}}
                ) + "\n")
            return len(self._survey_responses)

    def survey_summaries(self):
        with self.lock:
            responses = list(self._survey_responses)
        if not responses:
            return []
        return aggregate(responses, self.config.questionnaire)

    # -- link lifecycle

    def connect(self, port: str, baud: int | None = None,
                scenario_path: str | None = None) -> dict:
        with self.lock:
            if self.link is not None:
                raise AlreadyConnected(f"already connected to {self.link_name}")
            scenario = Scenario.load(scenario_path) if scenario_path else None
            self.link = open_link(
                port,
                baud=baud or self.config.baud,
                params=self.config.sim_params,
                scenario=scenario,
                speed=self.config.sim_speed,
                telemetry_hz=self.config.telemetry_hz,
            )
            self.link_status = "Open"
            self.link_error = ""
            self.parser = StreamParser()
            self._last_hand = None
            self._last_seq = None
            now = mono_us()
            self._last_frame_us = now
            self._next_miss_check_us = now + self.safety_params.heartbeat_period_us
            self._apply_safety_event(EventKind.CONNECT, now)
            self._start_pump()
            return self.status()

    @property
    def link_name(self) -> str | None:
        return getattr(self.link, "name", None)

    def disconnect(self) -> dict:
        with self.lock:
            if self.link is None:
                raise ApiError(409, "not_connected", "no link is open")
            now = mono_us()
            # stop torque on the wire before anything else
            self._send_frame_quietly(encode_stop())
            if self.engine is not None and self.engine.active:
                self._end_session_now(now, "link disconnected")
            self._apply_safety_event(EventKind.DISCONNECT, now)
            self._close_link()
            return self.status()

    def _close_link(self) -> None:
        if self.link is not None:
            try:
                self.link.close()
            except LinkError:
                pass
            self.link = None
        self.link_status = "Closed"
        if self._pump_stop is not None:
            self._pump_stop.set()

    def _link_failed(self, reason: str) -> None:
        now = mono_us()
        if self.engine is not None and self.engine.active:
            self._end_session_now(now, f"link error: {reason}")
        self._apply_safety_event(EventKind.DISCONNECT, now)
        self._close_link()
        self.link_status = "Errored"
        self.link_error = reason

    def _send_frame_quietly(self, data: bytes) -> None:
        if self.link is None:
            return
        try:
            self.link.write(data)
        except LinkError:
            pass

    # -- pump

    def _start_pump(self) -> None:
        # each connect gets its own stop event, so a not-yet-exited previous
        # pump thread can never strand a fresh link without a pump
        stop = threading.Event()
        self._pump_stop = stop
        self._pump_thread = threading.Thread(target=self._pump_loop, args=(stop,),
                                             name="bridge-pump", daemon=True)
        self._pump_thread.start()

    def _pump_loop(self, stop: threading.Event) -> None:
        while not stop.is_set():
            with self.lock:
                if self.link is None or self._pump_stop is not stop:
                    break
                self._pump_once()
            time.sleep(PUMP_IDLE_SLEEP_S)

    def _pump_once(self) -> None:
        try:
            data = self.link.read(16384)
        except LinkError as exc:
            self._link_failed(str(exc))
            return
        now = mono_us()
        frames, errors = self.parser.feed(data)
        for err in errors:
            self.stats["decode_errors"] += 1
            if err.kind is ErrorKind.BAD_CRC:
                self.stats["crc_errors"] += 1
                self._apply_safety_event(EventKind.CRC_ERROR, now)
        for frame in frames:
            self.stats["frames_received"] += 1
            self._last_frame_us = now
            self._next_miss_check_us = now + self.safety_params.heartbeat_period_us
            if frame.msg_type == MsgType.TELEMETRY:
                self._process_telemetry(decode_telemetry(frame), now)
            else:
                # heartbeat (or echo): link-alive tick for the interlock
                self._apply_safety_event(EventKind.TELEMETRY, now)
        self._check_timers(now)

    def _check_timers(self, now: int) -> None:
        if self.link is None:
            return
        while now >= self._next_miss_check_us:
            self._next_miss_check_us += self.safety_params.heartbeat_period_us
            if now - (self._last_frame_us or 0) > self.safety_params.heartbeat_period_us:
                self._apply_safety_event(EventKind.HEARTBEAT_MISS, now)
        if now >= self._next_host_hb_us:
            self._next_host_hb_us = now + HOST_HEARTBEAT_PERIOD_US
            self._send_frame_quietly(encode_frame(encode_heartbeat(self._hb_seq)))
            self._hb_seq = (self._hb_seq + 1) & 0xFFFF
        if self.engine is not None and self.engine.active and now >= self._next_engine_tick_us:
            self._next_engine_tick_us = now + ENGINE_TICK_PERIOD_US
            self._run_session_commands(self.engine.advance(Tick(now)), now)
        if self.writer is not None:
            self.writer.maybe_flush()

    # -- frame pipeline

    def _session_rel(self, now: int) -> int:
        return now - self._session_t0_us

    def _log(self, now: int, kind: str, body: dict) -> None:
        if self.writer is not None and not self.writer.closed:
            self.writer.append(self._session_rel(now), kind, body)

    def _process_telemetry(self, t, now: int) -> None:
        self.stats["telemetry_frames"] += 1
        if self._last_seq is not None and t.seq != (self._last_seq + 1) % 65536:
            self.stats["seq_gaps"] += 1
        self._last_seq = t.seq

        body = {
            "seq": t.seq, "timestamp_us": t.timestamp_us,
            "encoder_arm": t.encoder_arm, "encoder_motor": t.encoder_motor,
            "trigger_pressed": t.trigger_pressed, "hand_present": t.hand_present,
            "torque_actual_cnm": t.torque_actual_cnm,
        }
        # store before any emission
        self._log(now, "Telemetry", body)
        self.hub.publish("telemetry", now, body)

        if self._sweep is not None:
            self._sweep.append(t)

        # interlock first: its actions preempt cursor output for this frame
        self._apply_safety_event(EventKind.TELEMETRY, now)
        if t.hand_present != self._last_hand:  # includes the first frame
            self._apply_safety_event(
                EventKind.HAND_ON if t.hand_present else EventKind.HAND_OFF, now
            )
        self._last_hand = t.hand_present

        if self.safety.stage is not Stage.RUNNING:
            return
        pos = self.mapper.map(t)
        self.stats["cursor_emitted"] += 1
        cursor_body = {"x": pos.x, "y": pos.y, "inside_workspace": pos.inside_workspace}
        self._log(now, "Cursor", cursor_body)
        self.hub.publish("cursor", now, cursor_body)
        for event in self.debouncer.update(t, pos, timestamp_us=now):
            self._emit_pointer(event.kind.value, pos.x, pos.y, now)

    # -- safety wiring

    def _apply_safety_event(self, kind: EventKind, now: int) -> None:
        prev = self.safety
        new, actions = transition(prev, SafetyEvent(kind, now), self.safety_params)
        self.safety = new
        if prev.stage is not new.stage:
            self._log(now, "Safety", {"state": new.stage.value, "cause": new.cause.value})
        for action in actions:
            self._run_safety_action(action, now)
        if prev.stage is not new.stage:
            self._wire_session_pause(prev.stage, new.stage, now)

    def _run_safety_action(self, action: Action, now: int) -> None:
        if action.kind is ActionKind.SEND_STOP:
            self._send_frame_quietly(encode_stop())
        elif action.kind is ActionKind.SEND_TORQUE:
            self._send_torque(action.torque_nm or 0.0)
        elif action.kind is ActionKind.FREEZE_CURSOR:
            # button-up must reach the game before the pause notification
            for event in self.debouncer.force_release(now):
                self._emit_pointer(event.kind.value, None, None, now)
        elif action.kind is ActionKind.RESUME_CURSOR:
            pass  # gating is by stage; smoothing state carries over
        elif action.kind is ActionKind.NOTIFY_UI:
            self.hub.publish("safety", now, {
                "state": self.safety.stage.value,
                "cause": self.safety.cause.value,
                "message": action.message,
            })

    def _wire_session_pause(self, prev: Stage, new: Stage, now: int) -> None:
        if self.engine is None or not self.engine.active:
            return
        if new is Stage.SAFETY_PAUSED and prev is not Stage.SAFETY_PAUSED:
            self._run_session_commands(self.engine.advance(sessionmod.PauseStarted(now)), now)
        elif prev is Stage.SAFETY_PAUSED and new is Stage.RUNNING:
            self._run_session_commands(self.engine.advance(sessionmod.PauseEnded(now)), now)
        elif new in (Stage.FAULTED, Stage.DISCONNECTED):
            self._end_session_now(now, f"safety: {self.safety.cause.value}")

    def _send_torque(self, torque_nm: float) -> None:
        cnm = max(0, round(torque_nm * 100))
        mode = TorqueMode.RESIST if cnm > 0 else TorqueMode.IDLE
        self._send_frame_quietly(
            encode_frame(encode_torque_command(TorqueCommand(cnm, mode)))
        )

    # -- session wiring

    def start_session(self, subject_id: str, plan: SessionPlan | None = None) -> dict:
        with self.lock:
            if self.link is None:
                raise ApiError(409, "not_connected", "connect a device first")
            if self.engine is not None and self.engine.active:
                raise ApiError(409, "session_active", "a session is already running")
            if self.safety.stage is not Stage.IDLE:
                raise ApiError(409, "illegal_state",
                               f"cannot start from safety state {self.safety.stage.value}")
            if plan is None:
                try:
                    plan = build_default_plan(self.config.games)
                except PlanUnavailable as exc:
                    raise ApiError(409, "plan_unavailable", str(exc))
            now = mono_us()
            session_id = datetime.now().strftime("s%Y%m%d-%H%M%S") + f"-{now % 1000:03d}"
            self.engine = SessionEngine(plan, session_id, subject_id,
                                        started_at_wall=wall_iso())
            self._session_t0_us = now
            self._next_engine_tick_us = now + ENGINE_TICK_PERIOD_US
            self.writer = self.store.open_session(
                session_id, subject_id=subject_id, started_at=wall_iso(),
                plan=plan.to_dict(), ended=False,
            )
            self._log(now, "Session", {"event": "started", "detail": {
                "subject_id": subject_id, "plan": plan.to_dict()}})
            commands = self.engine.start(now)
            self._log_block_entry(now)
            self._run_session_commands(commands, now)
            self._apply_safety_event(EventKind.START, now)
            self.hub.publish("session", now, {"event": "started",
                                              "session_id": session_id})
            return {"session_id": session_id, "plan": plan.to_dict()}

    def _log_block_entry(self, now: int) -> None:
        assert self.engine is not None
        trace = self.engine.record()["block_trace"]
        entry = trace[-1]
        block = self.engine.plan.blocks[entry["block_index"]]
        self._log(now, "Session", {"event": "block_entered", "detail": {
            "block_index": entry["block_index"],
            "game_id": block.game_id,
            "torque_nm": block.torque_nm,
        }})

    def level_event(self, passed: bool = True, source: str = "UIManual") -> dict:
        with self.lock:
            engine = self._require_session()
            now = mono_us()
            kind = LevelKind.LEVEL_PASSED if passed else LevelKind.LEVEL_FAILED
            src = LevelSource.GAME_HOOK if source == "GameHook" else LevelSource.UI_MANUAL
            self._log(now, "Session", {"event": "level_passed" if passed else "level_failed",
                                       "detail": {"source": src.value}})
            blocks_before = len(engine.record()["block_trace"])
            try:
                commands = engine.advance(LevelEvent(kind, now, src))
            except SessionClosed:
                raise ApiError(409, "session_closed", "session already ended")
            if engine.active and len(engine.record()["block_trace"]) > blocks_before:
                self._log_block_entry(now)
            self._run_session_commands(commands, now)
            return self.session_status()

    def stop_session(self, reason: str = "operator stop") -> dict:
        with self.lock:
            engine = self._require_session()
            now = mono_us()
            self._apply_safety_event(EventKind.STOP, now)
            if engine.active:  # safety wiring may already have ended it
                self._run_session_commands(engine.advance(StopRequested(now, reason)), now)
            return {"record": engine.record()}

    def _require_session(self) -> SessionEngine:
        if self.engine is None or not self.engine.active:
            raise ApiError(409, "no_session", "no active session")
        return self.engine

    def _run_session_commands(self, commands, now: int) -> None:
        for command in commands:
            if isinstance(command, SetTorque):
                self.safety = record_torque(self.safety, command.torque_nm)
                if self.safety.stage is Stage.RUNNING:
                    self._send_torque(command.torque_nm)
                self._log(now, "Session", {"event": "set_torque",
                                           "detail": {"torque_nm": command.torque_nm}})
                self.hub.publish("session", now, {"event": "set_torque",
                                                  "torque_nm": command.torque_nm})
            elif isinstance(command, OpenGame):
                url = self.config.game_urls.get(command.game_id)
                self._log(now, "Session", {"event": "open_game",
                                           "detail": {"game_id": command.game_id}})
                self.hub.publish("session", now, {"event": "open_game",
                                                  "game_id": command.game_id, "url": url})
            elif isinstance(command, EndSession):
                self._finalize_session(now, command.reason)
            elif isinstance(command, sessionmod.Notify):
                self.hub.publish("session", now, {"event": "notify",
                                                  "message": command.message})

    def _end_session_now(self, now: int, reason: str) -> None:
        engine = self.engine
        if engine is None or not engine.active:
            return
        self._run_session_commands(engine.advance(StopRequested(now, reason)), now)

    def _finalize_session(self, now: int, reason: str) -> None:
        engine = self.engine
        assert engine is not None
        record = engine.record()
        self._log(now, "Session", {"event": "ended", "detail": {"reason": reason}})
        self._log(now, "Session", {"event": "record", "detail": record})
        if self.writer is not None:
            self.store.close_session(engine.session_id, ended=True,
                                     ended_at=wall_iso(), end_reason=reason,
                                     record=record)
            self.writer = None
        self.hub.publish("session", now, {"event": "ended", "reason": reason,
                                          "record": record})
        if self.safety.stage is Stage.RUNNING:
            self._apply_safety_event(EventKind.STOP, now)

    def session_status(self) -> dict:
        with self.lock:
            return self._session_status_locked()

    def _session_status_locked(self) -> dict:
        engine = self.engine
        if engine is None:
            return {}
        now = mono_us()
        status = {
            "session_id": engine.session_id,
            "subject_id": engine.subject_id,
            "active": engine.active,
            "paused": engine.paused,
            "end_reason": engine.end_reason,
            "active_time_s": round(engine.active_time_us(now) / 1e6, 1),
        }
        if engine.active:
            block = engine.current_block
            status.update({
                "block_index": engine.current_block_index,
                "block_count": len(engine.plan.blocks),
                "game_id": block.game_id,
                "torque_nm": block.torque_nm,
                "levels_passed": engine.levels_in_block,
                "levels_to_advance": block.levels_to_advance,
            })
        return status

    # -- manual torque

    def set_torque(self, torque_nm: float) -> dict:
        with self.lock:
            if self.safety.stage is not Stage.RUNNING:
                raise ApiError(409, "not_running",
                               f"torque rejected in state {self.safety.stage.value}")
            if not 0 <= torque_nm <= 30:
                raise ApiError(400, "bad_torque", "torque must be within [0, 30] N.m")
            now = mono_us()
            self.safety = record_torque(self.safety, torque_nm)
            self._send_torque(torque_nm)
            self._log(now, "Session", {"event": "manual_torque",
                                       "detail": {"torque_nm": torque_nm}})
            return {"torque_nm": torque_nm}

    # -- calibration

    def calibration_start(self) -> dict:
        with self.lock:
            if self.link is None:
                raise ApiError(409, "not_connected", "connect a device first")
            self._sweep = []
            return {"sweeping": True}

    def calibration_commit(self, axis: str = "arm") -> dict:
        with self.lock:
            if self._sweep is None:
                raise ApiError(409, "no_sweep", "start a calibration sweep first")
            sweep, self._sweep = self._sweep, None
            try:
                lo, hi = calibrate(sweep, axis=axis)
            except (CalibrationTooNarrow, ValueError) as exc:
                raise ApiError(400, "calibration_failed", str(exc))
            profile = with_calibration(self.mapper.profile, lo, hi, axis=axis)
            self.mapper.set_profile(profile)
            self.config.profile = profile
            if self.config.profile_path is not None:
                save_profile(profile, self.config.profile_path)
            return {"ticks_min": lo, "ticks_max": hi, "samples": len(sweep)}

    def calibration_cancel(self) -> dict:
        with self.lock:
            self._sweep = None
            return {"sweeping": False}

    def calibration_reload(self) -> dict:
        with self.lock:
            if self.config.profile_path is None or not self.config.profile_path.exists():
                raise ApiError(409, "no_profile_file", "no calibration profile file configured")
            from .mapping import load_profile

            profile = load_profile(self.config.profile_path)
            self.mapper.set_profile(profile)
            self.config.profile = profile
            return {"reloaded": True}

    def calibration_info(self) -> dict:
        profile = self.mapper.profile
        data = asdict(profile)
        data["mode"] = profile.mode.value
        data["sweeping"] = self._sweep is not None
        return data

    # -- status

    def status(self) -> dict:
        with self.lock:
            now = mono_us()
            return {
                "link": self.link_name,
                "link_status": self.link_status,
                "link_error": self.link_error,
                "safety": self.safety.stage.value,
                "safety_cause": self.safety.cause.value,
                "hand_present": self.safety.hand_present,
                "torque_nm": self.safety.active_torque_nm,
                "session": self._session_status_locked() or None,
                "stream_clients": self.hub.client_count,
                "last_frame_age_ms": (
                    None if self._last_frame_us is None
                    else round((now - self._last_frame_us) / 1000)
                ),
                "stats": dict(self.stats),
                "games": list(self.config.games),
                "game_urls": dict(self.config.game_urls),
            }

    def shutdown(self) -> None:
        with self.lock:
            if self.link is not None:
                self._send_frame_quietly(encode_stop())
                if self.engine is not None and self.engine.active:
                    self._end_session_now(mono_us(), "daemon shutdown")
                self._close_link()
            if self._pump_stop is not None:
                self._pump_stop.set()
        if self._pump_thread is not None:
            self._pump_thread.join(timeout=1.0)


# --- HTTP layer --------------------------------------------------------------

_SESSION_EXPORT_RE = re.compile(r"^/api/sessions/([^/]+)/export\.csv$")

MIME_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".map": "application/json",
}


class BridgeRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    bridge: Bridge  # set by the server

    # quiet by default; the daemon logs through its own channels
    def log_message(self, fmt, *args):
        pass

    # -- plumbing

    def _send_json(self, payload, status: int = 200) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_text(self, text: str, content_type: str, status: int = 200) -> None:
        body = text.encode()
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, exc: ApiError) -> None:
        self._send_json({"error": exc.code, "message": exc.message}, status=exc.status)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            data = json.loads(raw)
        except json.JSONDecodeError:
            raise ApiError(400, "bad_json", "request body is not valid JSON")
        if not isinstance(data, dict):
            raise ApiError(400, "bad_json", "request body must be a JSON object")
        return data

    def do_OPTIONS(self):  # CORS preflight
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    # -- routing

    def do_GET(self):
        try:
            self._route_get()
        except ApiError as exc:
            self._send_error_json(exc)
        except (BrokenPipeError, ConnectionResetError):
            pass
        except Exception as exc:  # a bug must not take the daemon down
            self._send_error_json(ApiError(500, "internal", f"{type(exc).__name__}: {exc}"))

    def do_POST(self):
        try:
            self._route_post()
        except ApiError as exc:
            self._send_error_json(exc)
        except (BrokenPipeError, ConnectionResetError):
            pass
        except Exception as exc:
            self._send_error_json(ApiError(500, "internal", f"{type(exc).__name__}: {exc}"))

    def _route_get(self):
        url = urlparse(self.path)
        path = url.path
        bridge = self.bridge

        if path == "/api/ports":
            ports = [{"name": p.name, "descriptor": p.descriptor} for p in list_ports()]
            return self._send_json({"ports": ports})
        if path == "/api/status":
            return self._send_json(bridge.status())
        if path == "/api/calibration":
            return self._send_json(bridge.calibration_info())
        if path == "/api/sessions":
            return self._send_json({"sessions": bridge.store.list_sessions()})
        match = _SESSION_EXPORT_RE.match(path)
        if match:
            kind = parse_qs(url.query).get("kind", ["Telemetry"])[0]
            try:
                text = bridge.store.export_csv(match.group(1), kind)
            except NotFound as exc:
                raise ApiError(404, "not_found", str(exc))
            except ValueError as exc:
                raise ApiError(400, "bad_kind", str(exc))
            return self._send_text(text, "text/csv")
        if path == "/api/survey/summary":
            summaries = bridge.survey_summaries()
            fmt = parse_qs(url.query).get("format", ["json"])[0]
            if fmt == "csv":
                return self._send_text(summaries_to_csv(summaries), "text/csv")
            if fmt == "table":
                return self._send_text(render_table(summaries), "text/plain; charset=utf-8")
            return self._send_json(summaries_to_json(summaries))
        if path == "/api/survey/questionnaire":
            return self._send_json(bridge.config.questionnaire.to_dict())
        if path == "/api/stream":
            return self._serve_stream()
        return self._serve_static(path)

    def _route_post(self):
        path = urlparse(self.path).path
        bridge = self.bridge
        body = self._read_body()

        if path == "/api/connect":
            port = body.get("port", SIMULATOR_PORT)
            try:
                status = bridge.connect(port, baud=body.get("baud"),
                                        scenario_path=body.get("scenario"))
            except AlreadyConnected as exc:
                raise ApiError(409, "already_connected", str(exc))
            except ConnectError as exc:
                raise ApiError(400, "connect_failed", str(exc))
            except (ScenarioError, OSError) as exc:
                raise ApiError(400, "bad_scenario", str(exc))
            return self._send_json(status)
        if path == "/api/disconnect":
            return self._send_json(bridge.disconnect())
        if path == "/api/calibration":
            action = body.get("action", "")
            if action == "start":
                return self._send_json(bridge.calibration_start())
            if action == "commit":
                return self._send_json(bridge.calibration_commit(body.get("axis", "arm")))
            if action == "cancel":
                return self._send_json(bridge.calibration_cancel())
            if action == "reload":
                return self._send_json(bridge.calibration_reload())
            raise ApiError(400, "bad_action", f"unknown calibration action {action!r}")
        if path == "/api/session":
            plan = None
            if "plan" in body:
                try:
                    plan = SessionPlan.from_dict(body["plan"])
                except (KeyError, ValueError, TypeError) as exc:
                    raise ApiError(400, "bad_plan", f"invalid plan: {exc}")
            return self._send_json(
                bridge.start_session(body.get("subject_id", "anonymous"), plan)
            )
        if path == "/api/session/stop":
            return self._send_json(bridge.stop_session(body.get("reason", "operator stop")))
        if path == "/api/session/level-passed":
            return self._send_json(
                bridge.level_event(passed=body.get("passed", True),
                                   source=body.get("source", "UIManual"))
            )
        if path == "/api/torque":
            if "nm" not in body:
                raise ApiError(400, "bad_torque", "body must include nm")
            try:
                nm = float(body["nm"])
            except (TypeError, ValueError):
                raise ApiError(400, "bad_torque", "nm must be a number")
            return self._send_json(bridge.set_torque(nm))
        if path == "/api/survey/responses":
            if "subject_id" not in body or "answers" not in body:
                raise ApiError(400, "bad_response", "need subject_id and answers")
            try:
                count = bridge.add_survey_response(body["subject_id"], body["answers"])
            except ValueError as exc:
                raise ApiError(400, "bad_level", str(exc))
            return self._send_json({"responses": count})
        raise ApiError(404, "not_found", f"no such endpoint {path}")

    # -- event stream

    def _serve_stream(self):
        client = self.bridge.hub.attach()
        self.close_connection = True
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Connection", "close")
            self.end_headers()
            self.wfile.write(b": stream open\n\n")
            self.wfile.flush()
            last_write = time.monotonic()
            while not client.closed:
                messages = client.take()
                for message in messages:
                    payload = json.dumps(message, separators=(",", ":"))
                    self.wfile.write(f"data: {payload}\n\n".encode())
                if messages:
                    self.wfile.flush()
                    last_write = time.monotonic()
                elif time.monotonic() - last_write > 5.0:
                    self.wfile.write(b": keepalive\n\n")  # detects dead clients
                    self.wfile.flush()
                    last_write = time.monotonic()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.bridge.hub.detach(client)

    # -- static frontend

    def _serve_static(self, path: str):
        webroot = self.bridge.config.webroot
        if webroot is None:
            raise ApiError(404, "not_found", f"no such endpoint {path}")
        if path == "/":
            path = "/index.html"
        target = (webroot / path.lstrip("/")).resolve()
        try:
            target.relative_to(webroot.resolve())
        except ValueError:
            raise ApiError(404, "not_found", "outside webroot")
        if not target.is_file():
            raise ApiError(404, "not_found", f"no such file {path}")
        content_type = MIME_TYPES.get(target.suffix, "application/octet-stream")
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class BridgeServer:
    """HTTP server plus its bridge; start() runs in a background thread."""

    def __init__(self, config: BridgeConfig):
        self.bridge = Bridge(config)
        host, _, port = config.listen.rpartition(":")
        handler = type("BoundHandler", (BridgeRequestHandler,), {"bridge": self.bridge})
        self.httpd = ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        name="bridge-http", daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def shutdown(self) -> None:
        self.bridge.shutdown()
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=2.0)


def serve(config: BridgeConfig) -> BridgeServer:
    server = BridgeServer(config)
    server.start()
    return server
