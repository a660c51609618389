from __future__ import annotations

import math

import pytest

from armbridge.config import load_config, parse_config
from armbridge.mapping import MappingMode


SAMPLE = """
# station configuration
listen = 127.0.0.1:9000
data_dir = ./records
games = breakout, asteroids
game_url.breakout = https://games.example/breakout

calibration.mode = arc1d
calibration.ticks_min = -800
calibration.ticks_max = 800
calibration.screen_rect = 0 0 1920 1080
calibration.ema_alpha = 0.3

simulator.inertia_J = 0.08
simulator.viscous_b = 1.2
simulator.theta_min = -0.9
simulator.theta_max = 0.9
simulator.speed = 2.0

telemetry_hz = 50
baud = 57600
"""


class TestParseConfig:
    def test_sample_round_trip(self):
        config = parse_config(SAMPLE)
        assert config.listen == "127.0.0.1:9000"
        assert config.games == ("breakout", "asteroids")
        assert config.game_urls["breakout"].endswith("/breakout")
        assert config.profile.mode is MappingMode.ARC_1D
        assert config.profile.ticks_max == 800
        assert config.profile.screen_rect.width == 1920
        assert config.sim_params.inertia_J == 0.08
        assert math.isclose(config.sim_params.theta_max, 0.9)
        assert config.sim_speed == 2.0
        assert config.telemetry_hz == 50
        assert config.baud == 57600

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            parse_config("warp_factor = 9\n")
        with pytest.raises(ValueError):
            parse_config("calibration.warp = 9\n")

    def test_defaults_when_empty(self):
        config = parse_config("")
        assert config.listen == "127.0.0.1:8472"
        assert config.games == ("game1", "game2")
        assert config.profile.ticks_min == -512

    def test_load_from_file_resolves_paths(self, tmp_path):
        (tmp_path / "bridge.conf").write_text("data_dir = mydata\n")
        config = load_config(tmp_path / "bridge.conf")
        assert config.data_dir == tmp_path / "mydata"
