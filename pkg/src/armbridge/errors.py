"""Exception types shared across the package."""


class ArmBridgeError(Exception):
    """Base class for all armbridge errors."""


class WireFormatError(ArmBridgeError, ValueError):
    """A frame or typed payload violates the wire contract."""


class ModelFault(ArmBridgeError):
    """Simulator state became non-finite or otherwise unusable."""


class ScenarioError(ArmBridgeError, ValueError):
    """A scenario script line could not be parsed."""


class CalibrationTooNarrow(ArmBridgeError):
    """Calibration sweep covered too small an encoder range."""


class PlanUnavailable(ArmBridgeError):
    """A default session plan cannot be built from the configuration."""


class SessionClosed(ArmBridgeError):
    """Operation on a session (or session log) that has already ended."""


class SessionStillActive(ArmBridgeError):
    """Summary requested before the session ended."""


class OrderingError(ArmBridgeError):
    """Record timestamps must be nondecreasing within a session."""


class StorageError(ArmBridgeError):
    """Underlying storage failed while appending or reading."""


class NotFound(ArmBridgeError):
    """Unknown session or resource."""


class IncompleteResponse(ArmBridgeError):
    """A survey response is missing an answer."""

    def __init__(self, subject_id: str, question_id: str):
        super().__init__(f"subject {subject_id!r} has no answer for {question_id!r}")
        self.subject_id = subject_id
        self.question_id = question_id


class Unreconstructable(ArmBridgeError):
    """No integer count vector reproduces the given percentages."""


class ConnectError(ArmBridgeError):
    """Device link could not be opened."""


class LinkError(ArmBridgeError):
    """An open device link failed mid-stream."""


class AlreadyConnected(ArmBridgeError):
    """A device link is already open."""
