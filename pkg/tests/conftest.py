import threading
import time

import pytest

from igtlink.session import EndpointConfig, connect, listen
from igtlink.simulators import SinkOptions, SinkServer


@pytest.fixture
def listener():
    lst = listen(EndpointConfig.server(0))
    yield lst
    lst.close()


@pytest.fixture
def pair(listener):
    """(client, server) connections over loopback."""
    accepted = {}
    t = threading.Thread(target=lambda: accepted.setdefault("conn", listener.accept(timeout=5)))
    t.start()
    client = connect(EndpointConfig.client("127.0.0.1", listener.port, read_timeout=5000))
    t.join()
    server = accepted["conn"]
    server._sock.settimeout(5)
    yield client, server
    client.close()
    server.close()


@pytest.fixture
def sink_factory(tmp_path):
    """Start sink servers on ephemeral ports; they are shut down afterwards."""
    started = []

    def start(**options):
        options.setdefault("log_path", str(tmp_path / f"sink{len(started)}.jsonl"))
        server = SinkServer(EndpointConfig.server(0), SinkOptions(**options))
        thread = server.serve_in_thread()
        started.append((server, thread))
        return server

    yield start
    for server, thread in started:
        server.shutdown()
        thread.join(5)


# -- acceptance reporting -------------------------------------------------------

_VERDICTS = pytest.StashKey[list]()
_FAILED = pytest.StashKey[bool]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and report.failed:
        item.stash[_FAILED] = True


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for the acceptance criterion under test."""
    state = {}
    start = time.perf_counter()

    def record(criterion, detail=""):
        state["criterion"], state["detail"] = criterion, detail

    yield record
    elapsed = time.perf_counter() - start
    status = "FAIL" if request.node.stash.get(_FAILED, False) else "PASS"
    name = state.get("criterion", request.node.name)
    request.config.stash.setdefault(_VERDICTS, []).append(
        f"{status}  {name}  ({elapsed:.2f} s)  {state.get('detail', '')}".rstrip()
    )


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
