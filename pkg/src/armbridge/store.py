"""Append-only session telemetry store.

One line-delimited JSON file per session under `data/sessions/`, plus an
`index.json` with session metadata. Line framing makes the files
crash-truncatable: a reader stops at the first incomplete line and loses
at most the unflushed tail. CSV is an export view, never the storage
format.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import NotFound, OrderingError, SessionClosed, StorageError

RECORD_KINDS = ("Telemetry", "Cursor", "Pointer", "Safety", "Session")

FLUSH_EVERY_RECORDS = 100
FLUSH_INTERVAL_S = 0.5

CSV_HEADERS = {
    "Telemetry": ["t_us", "seq", "timestamp_us", "encoder_arm", "encoder_motor",
                  "trigger_pressed", "hand_present", "torque_actual_cnm"],
    "Cursor": ["t_us", "x", "y", "inside_workspace"],
    "Pointer": ["t_us", "kind", "x", "y"],
    "Safety": ["t_us", "state", "cause"],
    "Session": ["t_us", "event", "detail"],
}

_BOOL_FIELDS = {"trigger_pressed", "hand_present", "inside_workspace"}


@dataclass(frozen=True)
class AppendReceipt:
    index: int
    t_us: int


class SessionLogWriter:
    """Single-writer append log for one session."""

    def __init__(self, path: Path, session_id: str,
                 flush_every: int = FLUSH_EVERY_RECORDS,
                 flush_interval_s: float = FLUSH_INTERVAL_S):
        self.path = Path(path)
        self.session_id = session_id
        self.flush_every = flush_every
        self.flush_interval_s = flush_interval_s
        self._count = 0
        self._pending = 0
        self._last_flush = time.monotonic()
        self._last_t_us: int | None = None
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot open {self.path}: {exc}") from exc

    @property
    def closed(self) -> bool:
        return self._fh is None

    def append(self, t_us: int, kind: str, body: dict) -> AppendReceipt:
        if self._fh is None:
            raise SessionClosed(f"log for {self.session_id} is closed")
        if kind not in RECORD_KINDS:
            raise ValueError(f"unknown record kind {kind!r}")
        if self._last_t_us is not None and t_us < self._last_t_us:
            raise OrderingError(f"t_us {t_us} < previous {self._last_t_us}")
        record = {"t_us": t_us, "kind": kind, "body": body}
        try:
            self._fh.write(json.dumps(record, separators=(",", ":")) + "\n")
        except OSError as exc:
            raise StorageError(str(exc)) from exc
        self._last_t_us = t_us
        self._count += 1
        self._pending += 1
        if (self._pending >= self.flush_every
                or time.monotonic() - self._last_flush >= self.flush_interval_s):
            self.flush()
        return AppendReceipt(index=self._count - 1, t_us=t_us)

    def flush(self) -> None:
        if self._fh is None:
            return
        try:
            self._fh.flush()
        except OSError as exc:
            raise StorageError(str(exc)) from exc
        self._pending = 0
        self._last_flush = time.monotonic()

    def maybe_flush(self) -> None:
        """Flush if the interval elapsed with records still pending."""
        if self._pending and time.monotonic() - self._last_flush >= self.flush_interval_s:
            self.flush()

    def close(self) -> None:
        if self._fh is not None:
            self.flush()
            self._fh.close()
            self._fh = None


def read_records(path: Path):
    """Yield complete records; a truncated final line is silently dropped."""
    path = Path(path)
    if not path.exists():
        raise NotFound(str(path))
    with open(path, "rb") as fh:
        for raw in fh:
            if not raw.endswith(b"\n"):
                break  # torn tail from a crash
            line = raw.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                break  # damaged line: everything after it is suspect


class TelemetryStore:
    """Per-session JSONL files plus an index of session metadata."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.sessions_dir = self.root / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "index.json"
        self._writers: dict[str, SessionLogWriter] = {}

    # -- index

    def _read_index(self) -> dict:
        if not self.index_path.exists():
            return {"sessions": {}}
        try:
            return json.loads(self.index_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return {"sessions": {}}

    def _write_index(self, index: dict) -> None:
        tmp = self.index_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")
        os.replace(tmp, self.index_path)

    def update_session_meta(self, session_id: str, **fields) -> None:
        index = self._read_index()
        entry = index["sessions"].setdefault(session_id, {})
        entry.update(fields)
        self._write_index(index)

    def list_sessions(self) -> list[dict]:
        index = self._read_index()["sessions"]
        known = set(index)
        # files from crashed runs may not have index entries
        for path in sorted(self.sessions_dir.glob("*.jsonl")):
            if path.stem not in known:
                index[path.stem] = {}
        return [
            {"session_id": sid, **meta}
            for sid, meta in sorted(index.items())
        ]

    # -- per-session lifecycle

    def session_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.jsonl"

    def open_session(self, session_id: str, **meta) -> SessionLogWriter:
        writer = SessionLogWriter(self.session_path(session_id), session_id)
        self._writers[session_id] = writer
        self.update_session_meta(session_id, **meta)
        return writer

    def close_session(self, session_id: str, **meta) -> None:
        writer = self._writers.pop(session_id, None)
        if writer:
            writer.close()
        if meta:
            self.update_session_meta(session_id, **meta)

    def exists(self, session_id: str) -> bool:
        return self.session_path(session_id).exists()

    # -- reads

    def query(self, session_id: str, t_range: tuple[int, int] | None = None,
              kinds=None):
        """Records with t_us in [lo, hi] and kind in kinds, in file order."""
        path = self.session_path(session_id)
        if not path.exists():
            raise NotFound(f"session {session_id!r}")
        writer = self._writers.get(session_id)
        if writer is not None:
            writer.flush()
        kindset = set(kinds) if kinds is not None else None
        for record in read_records(path):
            if t_range is not None and not t_range[0] <= record["t_us"] <= t_range[1]:
                continue
            if kindset is not None and record["kind"] not in kindset:
                continue
            yield record

    def export_csv(self, session_id: str, kind: str) -> str:
        if kind not in CSV_HEADERS:
            raise ValueError(f"unknown record kind {kind!r}")
        header = CSV_HEADERS[kind]
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for record in self.query(session_id, kinds=[kind]):
            row = {"t_us": record["t_us"], **record["body"]}
            writer.writerow([_render_csv(field, row.get(field)) for field in header])
        return out.getvalue()


def _render_csv(field: str, value) -> str:
    if value is None:
        return ""
    if field in _BOOL_FIELDS:
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def import_csv(kind: str, text: str):
    """Inverse of export_csv: yields (t_us, kind, body) tuples."""
    if kind not in CSV_HEADERS:
        raise ValueError(f"unknown record kind {kind!r}")
    reader = csv.DictReader(io.StringIO(text))
    for row in reader:
        body = {}
        for field, raw in row.items():
            if field == "t_us" or raw is None:
                continue
            if field in _BOOL_FIELDS:
                body[field] = raw == "true"
            elif field in ("kind", "state", "cause", "event", "detail"):
                body[field] = raw
            else:
                value = float(raw)
                body[field] = int(value) if value.is_integer() and "." not in raw else value
        yield int(row["t_us"]), kind, body
