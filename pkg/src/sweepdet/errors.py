"""Exception types shared across the package.

The CLI maps these onto exit codes: config problems exit 1, data problems
exit 2, backend/transport problems exit 3.
"""


class SweepdetError(Exception):
    """Base class for package-specific errors."""


class ConfigError(SweepdetError):
    """Invalid configuration or argument combination."""


class DataError(SweepdetError):
    """Input data could not be read or violates its schema."""


class AnnotationParseError(DataError):
    """Malformed annotation document.

    ``offset`` is the byte offset of the syntax error when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class CalibrationError(DataError):
    """Threshold calibration could not be performed (e.g. no samples)."""


class BackendError(SweepdetError):
    """Base class for classifier-backend failures."""


class TransportError(BackendError):
    """Connection to a remote backend failed mid-conversation.

    ``last_acknowledged_id`` is the id of the last request whose response
    was received before the failure, or None if no response arrived.
    """

    def __init__(self, message: str, last_acknowledged_id: int | None = None):
        super().__init__(message)
        self.last_acknowledged_id = last_acknowledged_id


class HandshakeError(BackendError):
    """Remote backend handshake failed or advertised an unsupported version."""


class ProtocolError(BackendError):
    """Remote backend sent a frame that violates the wire protocol."""
