"""OpenIGTLink message codec, TCP sessions, device simulators and latency harness."""

__version__ = "0.1.0"

from .errors import IGTLError
from .messages import (
    BODY_TYPES,
    SUPPORTED_TYPES,
    CapabilityBody,
    ImageBody,
    Message,
    PositionBody,
    StatusBody,
    TransformBody,
    Unknown,
    XMarker,
    XMarkerListBody,
    decode_body,
    encode_body,
    position_as_transform,
)
from .pose import quaternion_to_rotation, rotation_to_quaternion
from .session import (
    Closed,
    Connection,
    Decoded,
    EndpointConfig,
    IntegrityFailure,
    Listener,
    Skipped,
    connect,
    listen,
)
from .wire import (
    HEADER_SIZE,
    MessageHeader,
    Timestamp,
    crc64,
    decode_header,
    encode_header,
    frame_message,
    timestamp_from_seconds,
)

__all__ = [
    "BODY_TYPES",
    "CapabilityBody",
    "Closed",
    "Connection",
    "Decoded",
    "EndpointConfig",
    "HEADER_SIZE",
    "IGTLError",
    "ImageBody",
    "IntegrityFailure",
    "Listener",
    "Message",
    "MessageHeader",
    "PositionBody",
    "SUPPORTED_TYPES",
    "Skipped",
    "StatusBody",
    "Timestamp",
    "TransformBody",
    "Unknown",
    "XMarker",
    "XMarkerListBody",
    "connect",
    "crc64",
    "decode_body",
    "decode_header",
    "encode_body",
    "encode_header",
    "frame_message",
    "listen",
    "position_as_transform",
    "quaternion_to_rotation",
    "rotation_to_quaternion",
    "timestamp_from_seconds",
]
