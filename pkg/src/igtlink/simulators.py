"""Deterministic stand-ins for a tracker, an image source and a logging sink."""

from __future__ import annotations

import json
import logging
import math
import sys
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, TextIO

import numpy as np

from .errors import ConnectionLost, EndpointClosed, IGTLError, ProtocolDesync
from .messages import (
    SCALAR_TYPES,
    ImageBody,
    PositionBody,
    StatusBody,
    TransformBody,
    position_as_transform,
)
from .pose import rotation_to_quaternion, z_rotation
from .session import (
    Closed,
    Connection,
    Decoded,
    EndpointConfig,
    IntegrityFailure,
    Listener,
    ReceiveOutcome,
    Skipped,
    connect,
    listen,
)
from .wire import Timestamp

log = logging.getLogger(__name__)


# -- tracker -----------------------------------------------------------------


@dataclass
class TrackerConfig:
    """Circular dummy trajectory with the tool yawing in step around z."""

    radius: float = 50.0  # mm
    angular_step: float = 5.0  # degrees per frame
    fps: float = 40.0
    frames: int = 100
    device_name: str = "Tracker"
    mode: Literal["transform", "position"] = "transform"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be > 0")
        if not 0 < self.angular_step < 360:
            raise ValueError("angular_step must be in (0, 360)")
        if not self.fps > 0:
            raise ValueError("fps must be > 0")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.mode not in ("transform", "position"):
            raise ValueError(f"mode must be 'transform' or 'position', not {self.mode!r}")


def tracker_pose_at(frame_index: int, config: TrackerConfig | None = None) -> TransformBody:
    if frame_index < 0:
        raise ValueError("frame_index must be >= 0")
    config = config or TrackerConfig()
    theta = math.radians(frame_index * config.angular_step)
    r = config.radius
    return TransformBody(z_rotation(theta), (r * math.cos(theta), r * math.sin(theta), 0.0))


def tracker_body_at(frame_index: int, config: TrackerConfig):
    """Body sent for ``frame_index``: the pose itself or its POSITION form."""
    pose = tracker_pose_at(frame_index, config)
    if config.mode == "position":
        return PositionBody(pose.translation, rotation_to_quaternion(pose.rotation))
    return pose


@dataclass
class TrackerSummary:
    frames_sent: int
    elapsed_ms: float


def stream_tracker(conn: Connection, tracker: TrackerConfig) -> TrackerSummary:
    """Send ``tracker.frames`` poses over ``conn`` paced at ``tracker.fps``."""
    interval = 1.0 / tracker.fps
    start = time.monotonic()
    sent = 0
    for i in range(tracker.frames):
        delay = start + i * interval - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        try:
            conn.send(tracker_body_at(i, tracker), tracker.device_name, Timestamp.now())
        except ConnectionLost as exc:
            exc.frames_sent = sent
            raise
        sent += 1
    return TrackerSummary(sent, (time.monotonic() - start) * 1000.0)


def run_tracker_client(endpoint: EndpointConfig, tracker: TrackerConfig | None = None) -> TrackerSummary:
    tracker = tracker or TrackerConfig()
    with connect(endpoint) as conn:
        return stream_tracker(conn, tracker)


# -- image source ------------------------------------------------------------


def gradient_volume(size: tuple[int, int, int], scalar_type: str = "uint8") -> np.ndarray:
    """Volume indexed ``[k, j, i]`` with voxel value ``(i + j + k) mod max``.

    ``max`` is the largest value of the scalar type; for float types the
    modulus never bites at realistic sizes.
    """
    ri, rj, rk = size
    base = np.dtype(SCALAR_TYPES[scalar_type][1])
    k, j, i = np.indices((rk, rj, ri), dtype=np.int64)
    total = i + j + k
    if base.kind in "iu":
        total = total % np.iinfo(base).max
    return total.astype(base)


def make_gradient_image(size: tuple[int, int, int], scalar_type: str = "uint8") -> ImageBody:
    """Identity-oriented image with 1 mm voxels holding :func:`gradient_volume`."""
    volume = gradient_volume(size, scalar_type)
    return ImageBody(
        matrix_size=tuple(size),
        pixel_data=volume.astype(volume.dtype.newbyteorder(">")).tobytes(),
        scalar_type=scalar_type,
        endian="big",
    )


@dataclass
class ImageSourceSummary:
    body_length: int
    elapsed_ms: float


def run_image_source(
    endpoint: EndpointConfig,
    size: tuple[int, int, int] = (4, 4, 4),
    scalar_type: str = "uint8",
    device_name: str = "ImageSource",
) -> ImageSourceSummary:
    image = make_gradient_image(size, scalar_type)
    start = time.monotonic()
    with connect(endpoint) as conn:
        message = conn.send(image, device_name)
    return ImageSourceSummary(message.header.body_size, (time.monotonic() - start) * 1000.0)


# -- sink server -------------------------------------------------------------


@dataclass
class SinkOptions:
    print_poses: bool = False
    log_path: Optional[str] = None
    reply_status: bool = False
    # answer every decoded message with STATUS; lets remote latency runs time a round trip
    ack_every: bool = False
    capture_path: Optional[str] = None
    max_clients: Optional[int] = None
    concurrent: bool = False
    out: TextIO = field(default_factory=lambda: sys.stdout)
    on_outcome: Optional[Callable[[Connection, ReceiveOutcome], None]] = None


def pose_line(device: str, body) -> str:
    """``device theta tx ty tz`` with theta the yaw about z in degrees."""
    pose = position_as_transform(body) if isinstance(body, PositionBody) else body
    r = pose.rotation
    theta = math.degrees(math.atan2(r[1][0], r[0][0]))
    # adding 0.0 turns a rounded -0.0 into 0.0
    cells = " ".join(f"{round(v, 3) + 0.0:.3f}" for v in (theta, *pose.translation))
    return f"{device} {cells}"


def log_record(seq: int, outcome: ReceiveOutcome, recv_unix_ns: int, raw_header: bytes = b"") -> dict:
    if isinstance(outcome, Decoded):
        h = outcome.message.header
        return {"seq": seq, "kind": "decoded", "type": h.type_name, "device": h.device_name,
                "body_size": h.body_size, "recv_unix_ns": recv_unix_ns}
    if isinstance(outcome, Skipped):
        device = raw_header[14:34].rstrip(b"\0").decode("latin-1") if raw_header else None
        return {"seq": seq, "kind": "skipped", "type": outcome.type_name, "device": device,
                "body_size": outcome.body_length, "recv_unix_ns": recv_unix_ns}
    if isinstance(outcome, IntegrityFailure):
        h = outcome.header
        return {"seq": seq, "kind": "crc_failure", "type": h.type_name, "device": h.device_name,
                "body_size": h.body_size, "recv_unix_ns": recv_unix_ns}
    raise TypeError(f"no log record for {outcome!r}")


class SinkServer:
    """Accepts tracker/image clients and logs everything they send.

    Clients are served one after another unless ``options.concurrent`` is set.
    """

    def __init__(self, endpoint: EndpointConfig, options: SinkOptions | None = None):
        self.options = options or SinkOptions()
        self.listener: Listener = listen(endpoint)
        self.port = self.listener.port
        self.clients_served = 0
        self._seq = 0
        self._lock = threading.Lock()
        self._log = open(self.options.log_path, "a", encoding="utf-8") if self.options.log_path else None
        self._capture = open(self.options.capture_path, "ab") if self.options.capture_path else None
        self._threads: list[threading.Thread] = []

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()

    def serve_forever(self) -> None:
        try:
            while self.options.max_clients is None or self.clients_served < self.options.max_clients:
                try:
                    conn = self.listener.accept()
                except EndpointClosed:
                    break
                self.clients_served += 1
                if self.options.concurrent:
                    t = threading.Thread(target=self.handle, args=(conn,), daemon=True)
                    t.start()
                    self._threads.append(t)
                else:
                    self.handle(conn)
            for t in self._threads:
                t.join()
        finally:
            self._close_files()
            self.listener.close()

    def serve_in_thread(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t

    def shutdown(self) -> None:
        self.listener.close()

    def _close_files(self) -> None:
        with self._lock:
            for f in (self._log, self._capture):
                if f is not None and not f.closed:
                    f.close()

    def handle(self, conn: Connection) -> None:
        """Serve one client until it disconnects."""
        log.info("client connected from %s", conn.peer)
        opts = self.options
        replied = False
        with conn:
            while True:
                try:
                    outcome = conn.receive_message()
                except ProtocolDesync as exc:
                    log.warning("dropping %s: %s", conn.peer, exc)
                    break
                except IGTLError as exc:
                    log.warning("receive from %s failed: %s", conn.peer, exc)
                    break
                if isinstance(outcome, Closed):
                    break
                self._record(conn, outcome)
                if isinstance(outcome, Decoded) and (opts.ack_every or (opts.reply_status and not replied)):
                    replied = True
                    try:
                        conn.send(StatusBody(code=1, error_name="OK"), "Sink")
                    except ConnectionLost:
                        break
        log.info("client %s disconnected", conn.peer)

    def _record(self, conn: Connection, outcome: ReceiveOutcome) -> None:
        recv_ns = time.time_ns()
        with self._lock:
            self._seq += 1
            if self._log is not None:
                self._log.write(json.dumps(log_record(self._seq, outcome, recv_ns, conn.last_frame[:58])) + "\n")
                self._log.flush()
            if self._capture is not None:
                self._capture.write(conn.last_frame)
                self._capture.flush()
            if (
                self.options.print_poses
                and isinstance(outcome, Decoded)
                and isinstance(outcome.message.body, (TransformBody, PositionBody))
            ):
                print(pose_line(outcome.message.device_name, outcome.message.body), file=self.options.out, flush=True)
            if self.options.on_outcome is not None:
                self.options.on_outcome(conn, outcome)


def run_sink_server(endpoint: EndpointConfig, options: SinkOptions | None = None) -> SinkServer:
    """Serve until the listener is shut down (or ``max_clients`` are done)."""
    server = SinkServer(endpoint, options)
    server.serve_forever()
    return server
