"""armbridge: drive pointer-based web games from a rehabilitation arm."""

from .config import BridgeConfig, load_config
from .links import SIMULATOR_PORT, list_ports, open_link
from .mapping import CalibrationProfile, CursorMapper, TriggerDebouncer, calibrate
from .safety import SafetyState, model_check, transition
from .service import Bridge, BridgeServer, serve
from .session import SessionEngine, SessionPlan, build_default_plan, summarize
from .simulator import ArmSimulator, ArmState, Scenario, SimParams
from .store import TelemetryStore
from .survey import Questionnaire, aggregate, default_questionnaire, reconstruct_counts
from .wire import Frame, StreamParser, TelemetryFrame, crc16

__version__ = "0.1.0"

__all__ = [
    "ArmSimulator", "ArmState", "Bridge", "BridgeConfig", "BridgeServer",
    "CalibrationProfile", "CursorMapper", "Frame", "Questionnaire",
    "SIMULATOR_PORT", "SafetyState", "Scenario", "SessionEngine", "SessionPlan",
    "SimParams", "StreamParser", "TelemetryFrame", "TelemetryStore",
    "TriggerDebouncer", "aggregate", "build_default_plan", "calibrate", "crc16",
    "default_questionnaire", "list_ports", "load_config", "model_check",
    "open_link", "reconstruct_counts", "serve", "summarize", "transition",
]
