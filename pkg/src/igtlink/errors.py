"""Exception hierarchy shared by every igtlink module."""

from __future__ import annotations


class IGTLError(Exception):
    """Base class for all protocol errors raised by igtlink."""


# -- wire codec -------------------------------------------------------------


class NameTooLong(IGTLError, ValueError):
    pass


class NonAscii(IGTLError, ValueError):
    pass


class OutOfRange(IGTLError, ValueError):
    pass


class TruncatedHeader(IGTLError):
    pass


class UnsupportedVersion(IGTLError):
    """Header carries a protocol version this library does not speak.

    The partially decoded header is attached so that a reader can still
    skip the body and stay aligned with the stream.
    """

    def __init__(self, version: int, header=None):
        super().__init__(f"unsupported protocol version {version}")
        self.version = version
        self.header = header


# -- message bodies ---------------------------------------------------------


class InvalidBody(IGTLError, ValueError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field


class BodyLengthMismatch(IGTLError, ValueError):
    pass


class MalformedString(IGTLError, ValueError):
    pass


class ZeroQuaternion(IGTLError, ValueError):
    pass


class NotARotation(IGTLError, ValueError):
    pass


# -- session ----------------------------------------------------------------


class AddressInUse(IGTLError, OSError):
    pass


class PermissionDenied(IGTLError, PermissionError):
    pass


class ConnectionRefused(IGTLError, ConnectionRefusedError):
    pass


class HostUnreachable(IGTLError, OSError):
    pass


class ReceiveTimeout(IGTLError, TimeoutError):
    pass


class ConnectionLost(IGTLError, ConnectionError):
    def __init__(self, message: str = "connection lost", frames_sent: int | None = None):
        super().__init__(message)
        self.frames_sent = frames_sent


class ProtocolDesync(IGTLError):
    """The stream ended or broke in the middle of a message."""


class EndpointClosed(IGTLError):
    """A listening endpoint was shut down."""


# -- benchmark --------------------------------------------------------------


class EmptySamples(IGTLError, ValueError):
    pass
