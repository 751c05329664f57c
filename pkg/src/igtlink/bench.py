"""Latency trials: timed runs of N packets reported as min/max/mean per run.

In the default loopback mode sender and receiver share one process, so a
single monotonic clock times each packet from just before it is framed and
sent until the receiving thread has fully decoded it and handed it back
through a queue. The queue hand-off is part of every sample.

Against a remote host the clock cannot be shared; the harness then times
send-to-acknowledgement round trips and reports half of each.
"""

from __future__ import annotations

import json
import math
import queue
import statistics
import threading
import time
from dataclasses import asdict, dataclass
from typing import Literal, NamedTuple

from .errors import ConnectionLost, EmptySamples, IGTLError, ReceiveTimeout
from .session import Closed, Decoded, EndpointConfig, connect, listen
from .simulators import TrackerConfig, tracker_body_at
from .wire import Timestamp

LOOPBACK = "loopback"
REMOTE = "remote"
_MODE_LABELS = {
    LOOPBACK: "loopback, send to fully decoded",
    REMOTE: "remote, send-to-ack round trip / 2",
}


class Stats(NamedTuple):
    min: float
    max: float
    mean: float
    std: float


def compute_stats(samples) -> Stats:
    """Min, max, mean and sample standard deviation (n - 1 divisor; 0 for n = 1)."""
    samples = [float(s) for s in samples]
    if not samples:
        raise EmptySamples("need at least one sample")
    std = statistics.stdev(samples) if len(samples) > 1 else 0.0
    return Stats(min(samples), max(samples), statistics.fmean(samples), std)


@dataclass
class RunStats:
    run_no: int
    min_ms: float
    max_ms: float
    mean_ms: float
    samples: int

    @classmethod
    def from_samples(cls, run_no: int, samples_ms) -> RunStats:
        s = compute_stats(samples_ms)
        return cls(run_no, s.min, s.max, s.mean, len(samples_ms))


@dataclass
class TrialReport:
    runs: list[RunStats]
    overall_mean_ms: float
    overall_std_ms: float
    packets_per_run: int
    runs_count: int
    payload: str = "TRANSFORM"
    mode: str = LOOPBACK
    valid: bool = True
    error: str | None = None

    @classmethod
    def from_runs(cls, runs: list[RunStats], packets_per_run: int, **kwargs) -> TrialReport:
        if runs:
            overall = compute_stats([r.mean_ms for r in runs])
            mean, std = overall.mean, overall.std
        else:
            mean = std = math.nan
        return cls(list(runs), mean, std, packets_per_run, len(runs), **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def run_latency_trial(
    endpoint: EndpointConfig | None = None,
    packets_per_run: int = 100,
    runs: int = 10,
    payload: Literal["TRANSFORM", "POSITION"] = "TRANSFORM",
    timeout: float = 5.0,
) -> TrialReport:
    """Time ``runs`` x ``packets_per_run`` messages.

    ``endpoint=None`` runs sender and receiver in-process over loopback;
    a client endpoint measures round trips against a server that
    acknowledges every message (``serve --ack``).

    A lost connection yields a partial report with ``valid=False``.
    """
    if packets_per_run < 1 or runs < 1:
        raise ValueError("packets_per_run and runs must be >= 1")
    payload = payload.upper()
    if payload not in ("TRANSFORM", "POSITION"):
        raise ValueError(f"payload must be TRANSFORM or POSITION, not {payload!r}")
    tracker = TrackerConfig(mode="position" if payload == "POSITION" else "transform")
    bodies = [tracker_body_at(i, tracker) for i in range(packets_per_run)]
    if endpoint is None:
        return _loopback_trial(bodies, runs, payload, timeout)
    return _remote_trial(endpoint, bodies, runs, payload, timeout)


def _collect(
    bodies, runs: int, payload: str, mode: str, send, wait
) -> TrialReport:
    results: list[RunStats] = []
    try:
        for run_no in range(1, runs + 1):
            samples = []
            for body in bodies:
                t0 = time.perf_counter_ns()
                send(body)
                wait()
                elapsed = time.perf_counter_ns() - t0
                assert elapsed >= 0, "monotonic clock went backwards"
                samples.append(elapsed / 1e6 / (2 if mode == REMOTE else 1))
            results.append(RunStats.from_samples(run_no, samples))
    except (ConnectionLost, ReceiveTimeout, queue.Empty) as exc:
        return TrialReport.from_runs(
            results, len(bodies), payload=payload, mode=mode, valid=False,
            error=str(exc) or type(exc).__name__,
        )
    return TrialReport.from_runs(results, len(bodies), payload=payload, mode=mode)


def _loopback_trial(bodies, runs: int, payload: str, timeout: float) -> TrialReport:
    listener = listen(EndpointConfig.server(0))
    arrivals: queue.SimpleQueue = queue.SimpleQueue()

    def receive_loop():
        try:
            with listener.accept(timeout=timeout) as conn:
                for outcome in conn:
                    if isinstance(outcome, Decoded):
                        arrivals.put(outcome.message)
        except IGTLError:
            pass

    receiver = threading.Thread(target=receive_loop, daemon=True)
    receiver.start()
    try:
        with connect(EndpointConfig.client("127.0.0.1", listener.port)) as conn:
            ts = Timestamp.now()
            return _collect(
                bodies, runs, payload, LOOPBACK,
                send=lambda body: conn.send(body, "Bench", ts),
                wait=lambda: arrivals.get(timeout=timeout),
            )
    finally:
        listener.close()
        receiver.join(timeout)


def _remote_trial(endpoint: EndpointConfig, bodies, runs: int, payload: str, timeout: float) -> TrialReport:
    if not endpoint.read_timeout:
        endpoint = EndpointConfig.client(endpoint.host, endpoint.port, read_timeout=int(timeout * 1000))

    with connect(endpoint) as conn:
        ts = Timestamp.now()

        def wait_ack():
            while True:
                outcome = conn.receive_message()
                if isinstance(outcome, Closed):
                    raise ConnectionLost("server closed before acknowledging")
                if isinstance(outcome, Decoded):
                    return

        return _collect(
            bodies, runs, payload, REMOTE,
            send=lambda body: conn.send(body, "Bench", ts),
            wait=wait_ack,
        )


def render_table(report: TrialReport) -> str:
    """Plain-text table: one column per run, rows Run No./min/max/mean."""
    title = (
        f"{report.payload} latency (ms), {report.packets_per_run} packets per run, "
        f"{_MODE_LABELS.get(report.mode, report.mode)}"
    )
    if not report.valid:
        title += " [INCOMPLETE]"
    rows = [
        ["Run No."] + [str(r.run_no) for r in report.runs],
        ["min"] + [f"{r.min_ms:.2f}" for r in report.runs],
        ["max"] + [f"{r.max_ms:.2f}" for r in report.runs],
        ["mean"] + [f"{r.mean_ms:.2f}" for r in report.runs],
    ]
    widths = [max(len(row[c]) for row in rows) for c in range(len(rows[0]))]
    lines = [title]
    for row in rows:
        head = row[0].ljust(widths[0])
        cells = [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        lines.append("  ".join([head] + cells).rstrip())
    lines.append(
        f"overall: {report.overall_mean_ms:.2f} ± {report.overall_std_ms:.2f} ms (n={report.runs_count})"
    )
    return "\n".join(lines)
