"""Encoder telemetry to screen cursor conversion.

Three mapping modes cover the 1-DOF and 2-DOF arms: a horizontal line
(Axis1D), a pixel arc (Arc1D), and a full rectangle (Planar2D, both
encoders). Raw ticks are normalized against the calibrated range,
deadbanded, smoothed with an exponential moving average in pixel space,
and only then rounded, so repeated rounding cannot accumulate drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .errors import CalibrationTooNarrow
from .wire import TelemetryFrame

DEBOUNCE_US = 20_000  # both trigger edges must hold this long

MIN_CALIBRATION_FRAMES = 50
MIN_CALIBRATION_RANGE = 10  # ticks


class MappingMode(Enum):
    AXIS_1D = "axis1d"
    ARC_1D = "arc1d"
    PLANAR_2D = "planar2d"


@dataclass(frozen=True)
class ScreenRect:
    x: int = 0
    y: int = 0
    width: int = 1280
    height: int = 720

    def clamp(self, px: float, py: float) -> tuple[float, float]:
        return (
            min(max(px, self.x), self.x + self.width),
            min(max(py, self.y), self.y + self.height),
        )


@dataclass(frozen=True)
class CalibrationProfile:
    mode: MappingMode = MappingMode.AXIS_1D
    ticks_min: int = -512          # arm axis
    ticks_max: int = 512
    ticks_min_y: int = -10240      # motor axis, planar2d only
    ticks_max_y: int = 10240
    screen_rect: ScreenRect = ScreenRect()
    ema_alpha: float = 0.2
    deadband_ticks: int = 2
    fixed_y: int = 360             # axis1d: the constant row
    arc_center_x: int = 640        # arc1d: pixel arc definition
    arc_center_y: int = 700
    arc_radius: int = 500
    arc_theta_lo: float = math.radians(30)
    arc_theta_hi: float = math.radians(150)

    def __post_init__(self):
        if self.ticks_min >= self.ticks_max:
            raise ValueError("ticks_min must be below ticks_max")
        if self.mode is MappingMode.PLANAR_2D and self.ticks_min_y >= self.ticks_max_y:
            raise ValueError("ticks_min_y must be below ticks_max_y")
        if not 0 < self.ema_alpha <= 1:
            raise ValueError("ema_alpha must be in (0, 1]")
        if self.deadband_ticks < 0:
            raise ValueError("deadband_ticks must be >= 0")
        if self.screen_rect.width <= 0 or self.screen_rect.height <= 0:
            raise ValueError("screen_rect must have positive size")


@dataclass(frozen=True)
class CursorPosition:
    x: int
    y: int
    inside_workspace: bool


class PointerKind(Enum):
    MOVE = "Move"
    PRESS = "Press"
    RELEASE = "Release"


@dataclass(frozen=True)
class PointerEvent:
    kind: PointerKind
    position: CursorPosition | None
    timestamp_us: int


def calibrate(sweep: list[TelemetryFrame], axis: str = "arm") -> tuple[int, int]:
    """Derive (ticks_min, ticks_max) from a full-range guided sweep.

    The observed range is widened by 1% on each side so normal use never
    pins the cursor to the screen edge.
    """
    if len(sweep) < MIN_CALIBRATION_FRAMES:
        raise ValueError(f"calibration sweep needs >= {MIN_CALIBRATION_FRAMES} frames")
    values = [t.encoder_arm if axis == "arm" else t.encoder_motor for t in sweep]
    lo, hi = min(values), max(values)
    if hi - lo < MIN_CALIBRATION_RANGE:
        raise CalibrationTooNarrow(f"sweep spans only {hi - lo} ticks")
    margin = (hi - lo) * 0.01
    return round(lo - margin), round(hi + margin)


def _normalize(ticks: int, lo: int, hi: int) -> tuple[float, bool]:
    u = (ticks - lo) / (hi - lo)
    if u < 0.0:
        return 0.0, False
    if u > 1.0:
        return 1.0, False
    return u, True


class CursorMapper:
    """Per-device mapping filter: deadband, EMA smoothing, pixel rounding."""

    def __init__(self, profile: CalibrationProfile):
        self.profile = profile
        self._last_ticks: tuple[int, int] | None = None  # last emitted raw ticks
        self._ema: tuple[float, float] | None = None
        self._last_pos: CursorPosition | None = None

    def reset(self) -> None:
        self._last_ticks = None
        self._ema = None
        self._last_pos = None

    def set_profile(self, profile: CalibrationProfile) -> None:
        self.profile = profile
        self.reset()

    def _target(self, t: TelemetryFrame) -> tuple[float, float, bool]:
        p = self.profile
        rect = p.screen_rect
        u, inside = _normalize(t.encoder_arm, p.ticks_min, p.ticks_max)
        if p.mode is MappingMode.AXIS_1D:
            return rect.x + u * rect.width, float(p.fixed_y), inside
        if p.mode is MappingMode.ARC_1D:
            theta = p.arc_theta_lo + u * (p.arc_theta_hi - p.arc_theta_lo)
            px = p.arc_center_x + p.arc_radius * math.cos(theta)
            py = p.arc_center_y - p.arc_radius * math.sin(theta)
            px, py = rect.clamp(px, py)
            return px, py, inside
        v, inside_y = _normalize(t.encoder_motor, p.ticks_min_y, p.ticks_max_y)
        return rect.x + u * rect.width, rect.y + v * rect.height, inside and inside_y

    def map(self, t: TelemetryFrame) -> CursorPosition:
        p = self.profile
        ticks = (t.encoder_arm, t.encoder_motor if p.mode is MappingMode.PLANAR_2D else 0)

        if (
            self._last_pos is not None
            and p.deadband_ticks > 0
            and self._last_ticks is not None
            and max(abs(a - b) for a, b in zip(ticks, self._last_ticks)) <= p.deadband_ticks
        ):
            return self._last_pos

        tx, ty, inside = self._target(t)
        if self._ema is None:
            ema = (tx, ty)
        else:
            ex, ey = self._ema
            ema = (ex + p.ema_alpha * (tx - ex), ey + p.ema_alpha * (ty - ey))
        self._ema = ema
        pos = CursorPosition(x=round(ema[0]), y=round(ema[1]), inside_workspace=inside)
        self._last_ticks = ticks
        self._last_pos = pos
        return pos


def map_position(
    t: TelemetryFrame, profile: CalibrationProfile, mapper: CursorMapper | None = None
) -> tuple[CursorPosition, CursorMapper]:
    """One-shot convenience wrapper around CursorMapper."""
    if mapper is None:
        mapper = CursorMapper(profile)
    elif mapper.profile != profile:
        mapper.set_profile(profile)
    return mapper.map(t), mapper


class TriggerDebouncer:
    """Turn the joystick trigger into debounced Press/Release events.

    An edge must hold for DEBOUNCE_US before it is reported; shorter
    glitches are suppressed. Emitted events strictly alternate.
    """

    def __init__(self, debounce_us: int = DEBOUNCE_US):
        self.debounce_us = debounce_us
        self._stable = False
        self._candidate: bool | None = None
        self._candidate_since = 0

    def reset(self) -> None:
        self._candidate = None

    @property
    def pressed(self) -> bool:
        return self._stable

    def force_release(self, timestamp_us: int) -> list[PointerEvent]:
        """Synthesize a Release if a press is latched (used on safety pause)."""
        self._candidate = None
        if not self._stable:
            return []
        self._stable = False
        return [PointerEvent(PointerKind.RELEASE, None, timestamp_us)]

    def update(
        self, t: TelemetryFrame, position: CursorPosition | None = None,
        timestamp_us: int | None = None,
    ) -> list[PointerEvent]:
        now = t.timestamp_us if timestamp_us is None else timestamp_us
        raw = t.trigger_pressed
        if raw == self._stable:
            self._candidate = None
            return []
        if self._candidate != raw:
            self._candidate = raw
            self._candidate_since = now
            if self.debounce_us > 0:
                return []
        if now - self._candidate_since < self.debounce_us:
            return []
        self._stable = raw
        self._candidate = None
        kind = PointerKind.PRESS if raw else PointerKind.RELEASE
        return [PointerEvent(kind, position, now)]


def map_buttons(
    t: TelemetryFrame, debouncer: TriggerDebouncer,
    position: CursorPosition | None = None,
) -> list[PointerEvent]:
    return debouncer.update(t, position)


# --- profile persistence: flat key=value text, one key per line ---

_PROFILE_FIELDS = {
    "mode": lambda s: MappingMode(s),
    "ticks_min": int,
    "ticks_max": int,
    "ticks_min_y": int,
    "ticks_max_y": int,
    "ema_alpha": float,
    "deadband_ticks": int,
    "fixed_y": int,
    "arc_center_x": int,
    "arc_center_y": int,
    "arc_radius": int,
    "arc_theta_lo": float,
    "arc_theta_hi": float,
}


def profile_to_text(profile: CalibrationProfile) -> str:
    rect = profile.screen_rect
    lines = [
        "# cursor mapping profile",
        f"mode = {profile.mode.value}",
        f"ticks_min = {profile.ticks_min}",
        f"ticks_max = {profile.ticks_max}",
        f"ticks_min_y = {profile.ticks_min_y}",
        f"ticks_max_y = {profile.ticks_max_y}",
        f"screen_rect = {rect.x} {rect.y} {rect.width} {rect.height}",
        f"ema_alpha = {profile.ema_alpha!r}",
        f"deadband_ticks = {profile.deadband_ticks}",
        f"fixed_y = {profile.fixed_y}",
        f"arc_center_x = {profile.arc_center_x}",
        f"arc_center_y = {profile.arc_center_y}",
        f"arc_radius = {profile.arc_radius}",
        f"arc_theta_lo = {profile.arc_theta_lo!r}",
        f"arc_theta_hi = {profile.arc_theta_hi!r}",
    ]
    return "\n".join(lines) + "\n"


def profile_from_text(text: str) -> CalibrationProfile:
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"profile line {lineno}: expected key = value")
        key, _, value = (s.strip() for s in line.partition("="))
        if key == "screen_rect":
            x, y, w, h = (int(v) for v in value.split())
            kwargs["screen_rect"] = ScreenRect(x, y, w, h)
        elif key in _PROFILE_FIELDS:
            kwargs[key] = _PROFILE_FIELDS[key](value)
        else:
            raise ValueError(f"profile line {lineno}: unknown key {key!r}")
    return CalibrationProfile(**kwargs)


def load_profile(path) -> CalibrationProfile:
    return profile_from_text(Path(path).read_text(encoding="utf-8"))


def save_profile(profile: CalibrationProfile, path) -> None:
    Path(path).write_text(profile_to_text(profile), encoding="utf-8")


def with_calibration(
    profile: CalibrationProfile, ticks_min: int, ticks_max: int, axis: str = "arm"
) -> CalibrationProfile:
    if axis == "arm":
        return replace(profile, ticks_min=ticks_min, ticks_max=ticks_max)
    return replace(profile, ticks_min_y=ticks_min, ticks_max_y=ticks_max)
