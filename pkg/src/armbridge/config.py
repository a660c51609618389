"""Daemon configuration: one flat key = value file.

Dotted prefixes group the calibration profile (`calibration.*`) and
simulator parameters (`simulator.*`); everything else is a top-level key.
Unknown keys are rejected so typos surface at startup rather than as
silently ignored settings.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .links import DEFAULT_BAUD, DEFAULT_TELEMETRY_HZ
from .mapping import CalibrationProfile, ScreenRect, _PROFILE_FIELDS
from .simulator import SimParams
from .survey import Questionnaire, default_questionnaire

DEFAULT_LISTEN = "127.0.0.1:8472"

_SIM_FIELDS = {
    "inertia_J": float,
    "viscous_b": float,
    "dt": float,
    "ticks_per_rev": int,
    "theta_min": float,
    "theta_max": float,
    "gear_ratio": int,
    "v_max": float,
}


@dataclass
class BridgeConfig:
    listen: str = DEFAULT_LISTEN
    data_dir: Path = Path("data")
    games: tuple[str, ...] = ("game1", "game2")
    game_urls: dict = field(default_factory=dict)
    profile: CalibrationProfile = field(default_factory=CalibrationProfile)
    profile_path: Path | None = None
    sim_params: SimParams = field(default_factory=SimParams)
    sim_speed: float = 1.0
    telemetry_hz: int = DEFAULT_TELEMETRY_HZ
    baud: int = DEFAULT_BAUD
    questionnaire: Questionnaire = field(default_factory=default_questionnaire)
    webroot: Path | None = None


def parse_config(text: str, base_dir: Path | None = None) -> BridgeConfig:
    base_dir = base_dir or Path(".")
    config = BridgeConfig()
    profile_kwargs: dict = {}
    sim_kwargs: dict = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, _, value = (s.strip() for s in line.partition("="))

        if key.startswith("calibration."):
            sub = key.removeprefix("calibration.")
            if sub == "screen_rect":
                x, y, w, h = (int(v) for v in value.split())
                profile_kwargs["screen_rect"] = ScreenRect(x, y, w, h)
            elif sub in _PROFILE_FIELDS:
                profile_kwargs[sub] = _PROFILE_FIELDS[sub](value)
            else:
                raise ValueError(f"config line {lineno}: unknown calibration key {sub!r}")
        elif key.startswith("simulator."):
            sub = key.removeprefix("simulator.")
            if sub == "speed":
                config.sim_speed = float(value)
            elif sub in _SIM_FIELDS:
                sim_kwargs[sub] = _SIM_FIELDS[sub](value)
            else:
                raise ValueError(f"config line {lineno}: unknown simulator key {sub!r}")
        elif key.startswith("game_url."):
            config.game_urls[key.removeprefix("game_url.")] = value
        elif key == "listen":
            config.listen = value
        elif key == "data_dir":
            config.data_dir = base_dir / value
        elif key == "games":
            config.games = tuple(g.strip() for g in value.split(",") if g.strip())
        elif key == "telemetry_hz":
            config.telemetry_hz = int(value)
        elif key == "baud":
            config.baud = int(value)
        elif key == "calibration_profile":
            config.profile_path = base_dir / value
        elif key == "questionnaire":
            config.questionnaire = Questionnaire.load(base_dir / value)
        elif key == "webroot":
            config.webroot = base_dir / value
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")

    if profile_kwargs:
        config.profile = replace(CalibrationProfile(), **profile_kwargs)
    if sim_kwargs:
        config.sim_params = replace(SimParams(), **sim_kwargs)
    return config


def load_config(path) -> BridgeConfig:
    path = Path(path)
    config = parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
    if config.profile_path is not None and config.profile_path.exists():
        from .mapping import load_profile

        config.profile = load_profile(config.profile_path)
    return config
