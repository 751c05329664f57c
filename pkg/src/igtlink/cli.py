"""Command line front end: ``igtlink serve|track|image-send|bench|dump``."""

from __future__ import annotations

import argparse
import logging
import signal
import sys

from . import __version__
from .bench import render_table, run_latency_trial
from .capture import hexdump, iter_capture, summarize
from .errors import IGTLError
from .messages import SCALAR_TYPES
from .session import DEFAULT_PORT, EndpointConfig
from .simulators import SinkOptions, SinkServer, TrackerConfig, run_image_source, run_tracker_client

log = logging.getLogger("igtlink")


def _size(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        parts = ()
    if len(parts) != 3 or not all(0 < p < 2**16 for p in parts):
        raise argparse.ArgumentTypeError(f"expected IxJxK with positive sizes, got {text!r}")
    return parts


def _port(text: str) -> int:
    port = int(text)
    if not 0 <= port <= 65535:
        raise argparse.ArgumentTypeError(f"port {port} out of range")
    return port


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="igtlink", description="OpenIGTLink tools")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("serve", help="accept clients and log what they send")
    p.add_argument("--port", type=_port, default=DEFAULT_PORT, help="0 picks a free port")
    p.add_argument("--print-poses", action="store_true", help="print 'device theta tx ty tz' per pose")
    p.add_argument("--log", metavar="PATH", help="append one JSON record per message")
    p.add_argument("--capture", metavar="PATH", help="append raw frames for later 'dump'")
    p.add_argument("--reply-status", action="store_true", help="answer the first message with STATUS OK")
    p.add_argument("--ack", action="store_true", help="answer every message with STATUS OK")
    p.add_argument("--crc-policy", choices=("enforce", "warn"), default="enforce")
    p.add_argument("--concurrent", action="store_true", help="serve clients in parallel")
    p.add_argument("--max-clients", type=int, metavar="N", help="exit after N clients disconnect")
    p.add_argument("--once", dest="max_clients", action="store_const", const=1, help="same as --max-clients 1")

    p = sub.add_parser("track", help="stream dummy tracker poses to a server")
    p.add_argument("--host", required=True)
    p.add_argument("--port", type=_port, default=DEFAULT_PORT)
    p.add_argument("--fps", type=float, default=40.0)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--mode", choices=("transform", "position"), default="transform")
    p.add_argument("--radius", type=float, default=50.0, help="mm")
    p.add_argument("--step", type=float, default=5.0, help="degrees per frame")
    p.add_argument("--device", default="Tracker")
    p.add_argument("--send-capability", action="store_true", help="announce supported types first")

    p = sub.add_parser("image-send", help="send one synthetic gradient image")
    p.add_argument("--host", required=True)
    p.add_argument("--port", type=_port, default=DEFAULT_PORT)
    p.add_argument("--size", type=_size, default=(4, 4, 4), metavar="IxJxK")
    p.add_argument("--scalar", choices=tuple(SCALAR_TYPES), default="uint8", metavar="TYPE")

    p = sub.add_parser("bench", help="measure per-packet latency")
    p.add_argument("--packets", type=int, default=100)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--payload", type=str.upper, choices=("TRANSFORM", "POSITION"), default="TRANSFORM")
    p.add_argument("--json", nargs="?", const="-", metavar="PATH", help="JSON report to PATH (stdout if omitted)")
    p.add_argument("--host", help="time round trips against a remote 'serve --ack'")
    p.add_argument("--port", type=_port, default=DEFAULT_PORT)

    p = sub.add_parser("dump", help="decode a capture file")
    p.add_argument("file", metavar="FILE")
    p.add_argument("--hex", action="store_true", help="hex dump each frame")
    p.add_argument("--crc-policy", choices=("enforce", "warn"), default="enforce")
    return parser


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt


def cmd_serve(args) -> int:
    options = SinkOptions(
        print_poses=args.print_poses,
        log_path=args.log,
        capture_path=args.capture,
        reply_status=args.reply_status,
        ack_every=args.ack,
        concurrent=args.concurrent,
        max_clients=args.max_clients,
    )
    server = SinkServer(EndpointConfig.server(args.port, crc_policy=args.crc_policy), options)
    print(f"listening on port {server.port}", file=sys.stderr, flush=True)
    signal.signal(signal.SIGTERM, _raise_interrupt)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def cmd_track(args) -> int:
    tracker = TrackerConfig(
        radius=args.radius,
        angular_step=args.step,
        fps=args.fps,
        frames=args.frames,
        device_name=args.device,
        mode=args.mode,
    )
    endpoint = EndpointConfig.client(args.host, args.port, send_capability=args.send_capability)
    summary = run_tracker_client(endpoint, tracker)
    print(f"sent {summary.frames_sent} frames in {summary.elapsed_ms:.1f} ms")
    return 0


def cmd_image_send(args) -> int:
    summary = run_image_source(EndpointConfig.client(args.host, args.port), args.size, args.scalar)
    print(f"sent IMAGE {'x'.join(map(str, args.size))} {args.scalar}, body {summary.body_length} bytes")
    return 0


def cmd_bench(args) -> int:
    endpoint = EndpointConfig.client(args.host, args.port) if args.host else None
    report = run_latency_trial(endpoint, args.packets, args.runs, args.payload)
    if args.json == "-":
        print(report.to_json(indent=2))
    else:
        print(render_table(report))
        if args.json:
            with open(args.json, "w", encoding="utf-8") as f:
                f.write(report.to_json(indent=2) + "\n")
    if not report.valid:
        print(f"igtlink: error: trial incomplete: {report.error}", file=sys.stderr)
        return 1
    return 0


def cmd_dump(args) -> int:
    with open(args.file, "rb") as f:
        for index, entry in enumerate(iter_capture(f, args.crc_policy), start=1):
            print(summarize(index, entry))
            if args.hex:
                print(hexdump(entry.frame, entry.offset))
    return 0


COMMANDS = {
    "serve": cmd_serve,
    "track": cmd_track,
    "image-send": cmd_image_send,
    "bench": cmd_bench,
    "dump": cmd_dump,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(name)s: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (IGTLError, OSError, ValueError) as exc:
        print(f"igtlink: error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
