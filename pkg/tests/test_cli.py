from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest

from armbridge.cli import main
from armbridge.store import TelemetryStore

REPO_ROOT = Path(__file__).resolve().parent.parent


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "armbridge.cli", *args],
        capture_output=True, text=True, timeout=30, cwd=cwd,
    )


class TestFlagValidation:
    def test_port_and_simulate_conflict_exits_2(self):
        result = run_cli("--port", "/dev/ttyUSB0", "--simulate")
        assert result.returncode == 2
        assert "not allowed with" in result.stderr

    def test_scenario_requires_simulate(self):
        result = run_cli("--scenario", "s.txt")
        assert result.returncode == 2


class TestExportSession:
    def test_unknown_session_exit_1_notfound_on_stderr(self, tmp_path, capsys):
        code = main(["--data-dir", str(tmp_path), "--export-session", "nope"])
        captured = capsys.readouterr()
        assert code == 1
        assert "NotFound" in captured.err

    def test_export_prints_csv(self, tmp_path, capsys):
        store = TelemetryStore(tmp_path)
        writer = store.open_session("s9")
        writer.append(0, "Telemetry", {
            "seq": 0, "timestamp_us": 0, "encoder_arm": 5, "encoder_motor": 100,
            "trigger_pressed": False, "hand_present": True, "torque_actual_cnm": 0,
        })
        writer.close()
        code = main(["--data-dir", str(tmp_path), "--export-session", "s9"])
        captured = capsys.readouterr()
        assert code == 0
        assert captured.out.startswith("t_us,seq,")
        assert ",5,100," in captured.out


class TestSurveySummary:
    def test_prints_rendered_table(self, capsys):
        csv_path = REPO_ROOT / "conformance" / "survey_responses_table1.csv"
        code = main(["--survey-summary", str(csv_path)])
        captured = capsys.readouterr()
        assert code == 0
        assert "Type of Questions" in captured.out
        assert "Robot Convenience" in captured.out
        assert "37.78%" in captured.out
        assert "66.67%" in captured.out  # Simplicity in Use, half-up rendering

    def test_missing_file_exit_1(self, capsys):
        code = main(["--survey-summary", "missing.csv"])
        assert code == 1
        assert "error" in capsys.readouterr().err
