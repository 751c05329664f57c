"""Fixed 58-byte message header, 32.32 timestamps and the CRC-64 checksum.

Header layout, all integers big-endian::

    offset  size  field
    0       2     version (uint16, always 1)
    2       12    type name, NUL padded ASCII
    14      20    device name, NUL padded ASCII
    34      8     timestamp (uint32 seconds, uint32 fraction of 2**-32 s)
    42      8     body size (uint64)
    50      8     CRC-64 of the body (uint64)
"""

from __future__ import annotations

import math
import struct
import time
from dataclasses import dataclass

from .errors import (
    MalformedString,
    NameTooLong,
    NonAscii,
    OutOfRange,
    TruncatedHeader,
    UnsupportedVersion,
)

HEADER_SIZE = 58
VERSION = 1
TYPE_NAME_SIZE = 12
DEVICE_NAME_SIZE = 20

CRC64_POLY = 0x42F0E1EBA9EA3693
_MASK64 = 0xFFFFFFFFFFFFFFFF

_HEADER = struct.Struct(">H12s20sIIQQ")
assert _HEADER.size == HEADER_SIZE


def _make_crc_table() -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte << 56
        for _ in range(8):
            if crc & (1 << 63):
                crc = ((crc << 1) ^ CRC64_POLY) & _MASK64
            else:
                crc = (crc << 1) & _MASK64
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _make_crc_table()


def crc64(data: bytes | bytearray | memoryview, crc: int = 0) -> int:
    """CRC-64 with polynomial 0x42F0E1EBA9EA3693, MSB first, no final XOR.

    ``crc`` may carry the register of a previous call to checksum data in
    chunks.
    """
    table = _CRC_TABLE
    for byte in bytes(data):
        crc = table[((crc >> 56) ^ byte) & 0xFF] ^ ((crc << 8) & _MASK64)
    return crc


# -- timestamps --------------------------------------------------------------


@dataclass(frozen=True)
class Timestamp:
    seconds: int = 0
    fraction: int = 0

    def __post_init__(self):
        if not (0 <= self.seconds < 2**32 and 0 <= self.fraction < 2**32):
            raise OutOfRange(f"timestamp fields out of uint32 range: {self}")

    def to_seconds(self) -> float:
        return self.seconds + self.fraction / 2**32

    @classmethod
    def now(cls) -> Timestamp:
        return timestamp_from_seconds(time.time())


def timestamp_from_seconds(t: float) -> Timestamp:
    """Convert non-negative real seconds to the nearest 32.32 timestamp."""
    if not (0.0 <= t < 2**32) or math.isnan(t):
        raise OutOfRange(f"timestamp {t!r} outside [0, 2**32)")
    seconds = int(t)
    fraction = round((t - seconds) * 2**32)
    if fraction == 2**32:
        seconds, fraction = seconds + 1, 0
        if seconds == 2**32:
            seconds, fraction = 2**32 - 1, 2**32 - 1
    return Timestamp(seconds, fraction)


def to_seconds(ts: Timestamp) -> float:
    return ts.to_seconds()


# -- names -------------------------------------------------------------------


def encode_name(name: str, width: int, field: str = "name") -> bytes:
    """Validate ``name`` as printable ASCII and NUL-pad it to ``width``."""
    if any(not (0x20 <= ord(c) < 0x7F) for c in name):
        raise NonAscii(f"{field} {name!r} must be printable ASCII")
    raw = name.encode("ascii")
    if len(raw) > width:
        raise NameTooLong(f"{field} {name!r} exceeds {width} bytes")
    return raw.ljust(width, b"\0")


def decode_name(raw: bytes, field: str = "name") -> str:
    """Inverse of :func:`encode_name`; rejects interior NULs and control bytes."""
    text = raw.rstrip(b"\0")
    if any(not (0x20 <= b < 0x7F) for b in text):
        raise MalformedString(f"{field} contains invalid bytes: {raw!r}")
    return text.decode("ascii")


# -- header ------------------------------------------------------------------


@dataclass(frozen=True)
class MessageHeader:
    type_name: str
    device_name: str = ""
    timestamp: Timestamp = Timestamp()
    body_size: int = 0
    crc: int = 0
    version: int = VERSION


def encode_header(header: MessageHeader) -> bytes:
    type_raw = encode_name(header.type_name, TYPE_NAME_SIZE, "type_name")
    device_raw = encode_name(header.device_name, DEVICE_NAME_SIZE, "device_name")
    if not 0 <= header.body_size <= _MASK64:
        raise OutOfRange(f"body_size {header.body_size} outside uint64")
    if not 0 <= header.crc <= _MASK64:
        raise OutOfRange(f"crc {header.crc} outside uint64")
    return _HEADER.pack(
        header.version,
        type_raw,
        device_raw,
        header.timestamp.seconds,
        header.timestamp.fraction,
        header.body_size,
        header.crc,
    )


def decode_header(data: bytes | bytearray | memoryview) -> MessageHeader:
    """Parse the first 58 bytes of ``data``.

    Raises :class:`UnsupportedVersion` (with the parsed header attached) for
    any version other than 1.
    """
    if len(data) < HEADER_SIZE:
        raise TruncatedHeader(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
    version, type_raw, device_raw, sec, frac, body_size, crc = _HEADER.unpack_from(data)
    header = MessageHeader(
        type_name=decode_name(type_raw, "type_name"),
        device_name=decode_name(device_raw, "device_name"),
        timestamp=Timestamp(sec, frac),
        body_size=body_size,
        crc=crc,
        version=version,
    )
    if version != VERSION:
        raise UnsupportedVersion(version, header)
    return header


def peek_body_size(data: bytes | bytearray | memoryview) -> int:
    """Body size field of a raw header, without validating anything else."""
    if len(data) < HEADER_SIZE:
        raise TruncatedHeader(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
    return struct.unpack_from(">Q", data, 42)[0]


def frame_message(
    type_name: str,
    device_name: str,
    timestamp: Timestamp,
    body: bytes | bytearray | memoryview,
) -> bytes:
    """Prefix ``body`` with a header carrying its size and CRC."""
    body = bytes(body)
    header = MessageHeader(
        type_name=type_name,
        device_name=device_name,
        timestamp=timestamp,
        body_size=len(body),
        crc=crc64(body),
    )
    return encode_header(header) + body


def split_frame(data: bytes) -> tuple[MessageHeader, bytes]:
    """Split one complete framed message into header and body."""
    header = decode_header(data)
    body = bytes(data[HEADER_SIZE : HEADER_SIZE + header.body_size])
    if len(body) != header.body_size:
        raise TruncatedHeader(
            f"frame declares {header.body_size} body bytes, only {len(body)} present"
        )
    return header, body
