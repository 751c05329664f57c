"""Capture files: framed messages concatenated back to back, nothing else."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import BinaryIO, Iterator

from .errors import ProtocolDesync
from .messages import PositionBody, TransformBody
from .session import Decoded, IntegrityFailure, ReceiveOutcome, Skipped, classify
from .simulators import pose_line
from .wire import HEADER_SIZE, peek_body_size


@dataclass(frozen=True)
class CaptureEntry:
    offset: int
    raw_header: bytes
    body: bytes
    outcome: ReceiveOutcome

    @property
    def frame(self) -> bytes:
        return self.raw_header + self.body


def iter_capture(stream: BinaryIO | bytes, crc_policy: str = "enforce") -> Iterator[CaptureEntry]:
    """Yield one entry per framed message; raises ProtocolDesync on a truncated tail."""
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    offset = 0
    while True:
        raw_header = stream.read(HEADER_SIZE)
        if not raw_header:
            return
        if len(raw_header) < HEADER_SIZE:
            raise ProtocolDesync(f"capture ends inside a header at offset {offset}")
        size = peek_body_size(raw_header)
        body = stream.read(size)
        if len(body) < size:
            raise ProtocolDesync(f"capture ends inside a body at offset {offset}")
        yield CaptureEntry(offset, raw_header, body, classify(raw_header, body, crc_policy))
        offset += HEADER_SIZE + size


def summarize(index: int, entry: CaptureEntry) -> str:
    """One line per message: index, offset, status, type, device, size, detail."""
    outcome = entry.outcome
    if isinstance(outcome, Decoded):
        h = outcome.message.header
        status = "OK" if outcome.crc_ok else "CRC_MISMATCH"
        body = outcome.message.body
        if isinstance(body, (TransformBody, PositionBody)):
            detail = pose_line(h.device_name, body)
        else:
            detail = type(body).__name__
        return f"{index:5d} @{entry.offset:<8d} {status:<8s} {h.type_name:<12s} {h.device_name!r} {h.body_size} | {detail}"
    if isinstance(outcome, Skipped):
        return (
            f"{index:5d} @{entry.offset:<8d} SKIPPED  {outcome.type_name:<12s} - "
            f"{outcome.body_length} | {outcome.reason}"
        )
    if isinstance(outcome, IntegrityFailure):
        h = outcome.header
        return f"{index:5d} @{entry.offset:<8d} CRC_FAIL {h.type_name:<12s} {h.device_name!r} {h.body_size}"
    raise TypeError(f"unexpected outcome {outcome!r}")


def hexdump(data: bytes, base: int = 0) -> str:
    lines = []
    for i in range(0, len(data), 16):
        chunk = data[i : i + 16]
        hexes = " ".join(f"{b:02x}" for b in chunk)
        text = "".join(chr(b) if 0x20 <= b < 0x7F else "." for b in chunk)
        lines.append(f"{base + i:08x}  {hexes:<47s}  |{text}|")
    return "\n".join(lines)
