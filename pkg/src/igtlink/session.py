"""TCP endpoints exchanging whole framed messages.

A :class:`Connection` reads exactly one header and one body per
:meth:`~Connection.receive_message` call and reports what happened as a
:class:`ReceiveOutcome`. Unknown types, unsupported versions and bodies that
fail to decode are skipped with the stream kept aligned; CRC mismatches are
reported (``crc_policy="enforce"``) or decoded and flagged (``"warn"``).
Only a stream that breaks mid-message is fatal.
"""

from __future__ import annotations

import errno
import logging
import select
import socket
import threading
from dataclasses import dataclass
from typing import Callable, Iterator, Literal, Optional, Union

from .errors import (
    AddressInUse,
    ConnectionLost,
    ConnectionRefused,
    EndpointClosed,
    HostUnreachable,
    IGTLError,
    PermissionDenied,
    ProtocolDesync,
    ReceiveTimeout,
    UnsupportedVersion,
)
from .messages import BODY_TYPES, SUPPORTED_TYPES, CapabilityBody, Message, encode_body
from .wire import HEADER_SIZE, MessageHeader, Timestamp, crc64, decode_header, frame_message, peek_body_size

log = logging.getLogger(__name__)

DEFAULT_PORT = 18944


@dataclass
class EndpointConfig:
    role: Literal["server", "client"] = "server"
    port: int = DEFAULT_PORT
    host: Optional[str] = None
    read_timeout: int = 0  # ms, 0 blocks forever
    crc_policy: Literal["enforce", "warn"] = "enforce"
    send_capability: bool = False
    connect_timeout: float = 5.0  # seconds

    def __post_init__(self):
        if self.role not in ("server", "client"):
            raise ValueError(f"role must be 'server' or 'client', not {self.role!r}")
        if self.role == "client" and not self.host:
            raise ValueError("a client endpoint needs a host")
        if self.role == "server" and self.host:
            raise ValueError("host is only meaningful for client endpoints")
        # port 0 asks the OS for an ephemeral port when listening
        if not 0 <= self.port <= 65535 or (self.role == "client" and self.port == 0):
            raise ValueError(f"port {self.port} out of range")
        if self.read_timeout < 0:
            raise ValueError("read_timeout must be >= 0")
        if self.crc_policy not in ("enforce", "warn"):
            raise ValueError(f"crc_policy must be 'enforce' or 'warn', not {self.crc_policy!r}")

    @classmethod
    def server(cls, port: int = DEFAULT_PORT, **kwargs) -> EndpointConfig:
        return cls(role="server", port=port, **kwargs)

    @classmethod
    def client(cls, host: str, port: int = DEFAULT_PORT, **kwargs) -> EndpointConfig:
        return cls(role="client", host=host, port=port, **kwargs)


# -- receive outcomes ---------------------------------------------------------


@dataclass(frozen=True)
class Decoded:
    message: Message
    crc_ok: bool = True


@dataclass(frozen=True)
class Skipped:
    type_name: str
    body_length: int
    reason: str = "unknown type"


@dataclass(frozen=True)
class IntegrityFailure:
    header: MessageHeader


@dataclass(frozen=True)
class Closed:
    pass


ReceiveOutcome = Union[Decoded, Skipped, IntegrityFailure, Closed]


def _raw_type_name(raw_header: bytes) -> str:
    return raw_header[2:14].rstrip(b"\0").decode("latin-1")


def classify(raw_header: bytes, body: bytes, crc_policy: str = "enforce") -> ReceiveOutcome:
    """Turn one complete (header, body) pair into a receive outcome.

    Shared by live connections and capture-file readers.
    """
    try:
        header = decode_header(raw_header)
    except UnsupportedVersion as exc:
        name = exc.header.type_name if exc.header else _raw_type_name(raw_header)
        return Skipped(name, len(body), f"unsupported version {exc.version}")
    except IGTLError as exc:
        return Skipped(_raw_type_name(raw_header), len(body), f"malformed header: {exc}")

    if header.type_name not in BODY_TYPES:
        return Skipped(header.type_name, len(body))

    crc_ok = crc64(body) == header.crc
    if not crc_ok and crc_policy == "enforce":
        return IntegrityFailure(header)
    try:
        decoded = BODY_TYPES[header.type_name].decode(body)
    except (IGTLError, ValueError) as exc:
        return Skipped(header.type_name, len(body), f"undecodable body: {exc}")
    return Decoded(Message(header, decoded), crc_ok)


# -- connections ---------------------------------------------------------------


class Connection:
    """One framed byte-stream peer.

    At most one thread may receive and one may send at a time; sending and
    receiving concurrently is fine. ``observer``, if set, is called exactly
    once per :class:`ReceiveOutcome`, in stream order.
    """

    def __init__(
        self,
        sock: socket.socket,
        peer: str,
        crc_policy: str = "enforce",
        read_timeout: int = 0,
        observer: Callable[[ReceiveOutcome], None] | None = None,
    ):
        self._sock = sock
        self.peer = peer
        self.crc_policy = crc_policy
        self.observer = observer
        self.messages_received = 0
        self.messages_skipped = 0
        self.crc_failures = 0
        self.crc_warnings = 0
        self.bytes_received = 0
        self.last_frame = b""
        self._buf = bytearray()
        self._eof = False
        self._closed = False
        self._send_lock = threading.Lock()
        self._recv_lock = threading.Lock()
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(read_timeout / 1000 if read_timeout else None)

    def __repr__(self):
        return f"<Connection peer={self.peer} received={self.messages_received}>"

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __iter__(self) -> Iterator[ReceiveOutcome]:
        """Yield outcomes until the peer closes."""
        while True:
            outcome = self.receive_message()
            if isinstance(outcome, Closed):
                return
            yield outcome

    @property
    def closed(self) -> bool:
        return self._closed

    # sending

    def send_raw(self, data: bytes) -> None:
        with self._send_lock:
            if self._closed:
                raise ConnectionLost("connection already closed")
            try:
                self._sock.sendall(data)
            except (BrokenPipeError, ConnectionResetError, ConnectionAbortedError) as exc:
                raise ConnectionLost(f"peer {self.peer} went away: {exc}") from exc
            except OSError as exc:
                raise ConnectionLost(f"send to {self.peer} failed: {exc}") from exc

    def send_message(self, message: Message) -> None:
        """Frame ``message`` (size and CRC recomputed from the body) and send it."""
        body = encode_body(message.body)
        header = message.header
        self.send_raw(frame_message(header.type_name, header.device_name, header.timestamp, body))

    def send(self, body, device_name: str = "", timestamp: Timestamp | None = None) -> Message:
        """Convenience wrapper: build a message around ``body`` and send it."""
        message = Message.build(body, device_name, timestamp)
        self.send_message(message)
        return message

    # receiving

    def _fill(self, n: int) -> bool:
        """Buffer at least ``n`` bytes; False on EOF before that."""
        while len(self._buf) < n:
            if self._eof:
                return False
            try:
                chunk = self._sock.recv(max(n - len(self._buf), 65536))
            except socket.timeout:
                raise ReceiveTimeout(f"no data from {self.peer} within read timeout") from None
            except (ConnectionResetError, ConnectionAbortedError):
                chunk = b""
            except OSError as exc:
                if self._closed:
                    chunk = b""
                else:
                    raise ConnectionLost(f"receive from {self.peer} failed: {exc}") from exc
            if not chunk:
                self._eof = True
                return False
            self._buf += chunk
        return True

    def receive_message(self) -> ReceiveOutcome:
        """Read one whole message.

        Partial data read before a :class:`ReceiveTimeout` stays buffered, so
        the call can simply be retried.
        """
        with self._recv_lock:
            outcome = self._receive()
        if self.observer is not None:
            self.observer(outcome)
        return outcome

    def _receive(self) -> ReceiveOutcome:
        if not self._fill(HEADER_SIZE):
            if self._buf:
                raise ProtocolDesync(f"stream ended inside a header ({len(self._buf)} of 58 bytes)")
            return Closed()
        body_size = peek_body_size(self._buf)
        total = HEADER_SIZE + body_size
        if not self._fill(total):
            raise ProtocolDesync(
                f"stream ended inside a body ({len(self._buf) - HEADER_SIZE} of {body_size} bytes)"
            )
        raw_header = bytes(self._buf[:HEADER_SIZE])
        body = bytes(self._buf[HEADER_SIZE:total])
        del self._buf[:total]
        self.bytes_received += total
        self.last_frame = raw_header + body

        outcome = classify(raw_header, body, self.crc_policy)
        if isinstance(outcome, Decoded):
            self.messages_received += 1
            if not outcome.crc_ok:
                self.crc_warnings += 1
                log.warning("CRC mismatch in %s from %s", outcome.message.type_name, self.peer)
        elif isinstance(outcome, Skipped):
            self.messages_skipped += 1
            log.debug("skipped %s (%d bytes): %s", outcome.type_name, outcome.body_length, outcome.reason)
        elif isinstance(outcome, IntegrityFailure):
            self.crc_failures += 1
            log.warning("CRC mismatch in %s from %s", outcome.header.type_name, self.peer)
        return outcome

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


# -- endpoints -----------------------------------------------------------------


class Listener:
    """A listening TCP endpoint handing out :class:`Connection` objects."""

    def __init__(self, config: EndpointConfig, backlog: int = 8):
        self.config = config
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind(("", config.port))
            sock.listen(backlog)
        except OSError as exc:
            sock.close()
            if exc.errno == errno.EADDRINUSE:
                raise AddressInUse(f"port {config.port} is already in use") from exc
            if exc.errno in (errno.EACCES, errno.EPERM):
                raise PermissionDenied(f"not allowed to listen on port {config.port}") from exc
            raise
        self._sock = sock
        self._closed = threading.Event()
        self.port: int = sock.getsockname()[1]

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __repr__(self):
        return f"<Listener port={self.port}>"

    def accept(self, timeout: float | None = None) -> Connection:
        """Block until a client connects.

        Raises :class:`EndpointClosed` if :meth:`close` is called meanwhile and
        :class:`ReceiveTimeout` if ``timeout`` seconds pass first.
        """
        waited = 0.0
        poll = 0.05
        while True:
            if self._closed.is_set():
                raise EndpointClosed("listener was closed")
            try:
                ready, _, _ = select.select([self._sock], [], [], poll)
            except (OSError, ValueError):
                raise EndpointClosed("listener was closed") from None
            if ready:
                try:
                    sock, addr = self._sock.accept()
                except OSError:
                    if self._closed.is_set():
                        raise EndpointClosed("listener was closed") from None
                    raise
                sock.setblocking(True)
                return Connection(
                    sock,
                    f"{addr[0]}:{addr[1]}",
                    crc_policy=self.config.crc_policy,
                    read_timeout=self.config.read_timeout,
                )
            waited += poll
            if timeout is not None and waited >= timeout:
                raise ReceiveTimeout(f"no client within {timeout} s")

    def close(self) -> None:
        if self._closed.is_set():
            return
        self._closed.set()
        self._sock.close()


def listen(config: EndpointConfig) -> Listener:
    if config.role != "server":
        raise ValueError("listen() needs a server endpoint config")
    return Listener(config)


def accept(listener: Listener, timeout: float | None = None) -> Connection:
    return listener.accept(timeout)


def connect(config: EndpointConfig) -> Connection:
    """Open a client connection, optionally announcing our CAPABILITY first."""
    if config.role != "client":
        raise ValueError("connect() needs a client endpoint config")
    try:
        sock = socket.create_connection((config.host, config.port), timeout=config.connect_timeout)
    except ConnectionRefusedError as exc:
        raise ConnectionRefused(f"{config.host}:{config.port} refused the connection") from exc
    except socket.timeout as exc:
        raise ReceiveTimeout(f"connecting to {config.host}:{config.port} timed out") from exc
    except socket.gaierror as exc:
        raise HostUnreachable(f"cannot resolve {config.host!r}: {exc}") from exc
    except OSError as exc:
        if exc.errno in (errno.EHOSTUNREACH, errno.ENETUNREACH):
            raise HostUnreachable(f"{config.host} is unreachable") from exc
        raise
    conn = Connection(
        sock,
        f"{config.host}:{config.port}",
        crc_policy=config.crc_policy,
        read_timeout=config.read_timeout,
    )
    if config.send_capability:
        conn.send(CapabilityBody(SUPPORTED_TYPES))
    return conn


def send_message(conn: Connection, message: Message) -> None:
    conn.send_message(message)


def receive_message(conn: Connection) -> ReceiveOutcome:
    return conn.receive_message()


def close(conn: Connection) -> None:
    conn.close()


__all__ = [
    "Closed",
    "Connection",
    "DEFAULT_PORT",
    "Decoded",
    "EndpointConfig",
    "IntegrityFailure",
    "Listener",
    "ReceiveOutcome",
    "Skipped",
    "accept",
    "classify",
    "close",
    "connect",
    "listen",
    "receive_message",
    "send_message",
]
