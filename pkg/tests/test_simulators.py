import io
import json
import math
import os
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from igtlink.errors import ConnectionRefused
from igtlink.messages import ImageBody, PositionBody, StatusBody, TransformBody, position_as_transform
from igtlink.session import Decoded, EndpointConfig, connect
from igtlink.simulators import (
    TrackerConfig,
    gradient_volume,
    make_gradient_image,
    pose_line,
    run_image_source,
    run_tracker_client,
    tracker_body_at,
    tracker_pose_at,
)
from igtlink.wire import Timestamp, frame_message

from test_session import free_port


def client_for(server):
    return EndpointConfig.client("127.0.0.1", server.port)


def read_log(path):
    with open(path) as f:
        return [json.loads(line) for line in f]


def wait_for(predicate, timeout=5.0):
    deadline = time.monotonic() + timeout
    while not predicate():
        if time.monotonic() > deadline:
            raise AssertionError("condition not reached")
        time.sleep(0.01)


class TestTrackerPose:
    def test_frame_zero(self):
        pose = tracker_pose_at(0)
        assert pose.translation == (50.0, 0.0, 0.0)
        assert pose.rotation == ((1, 0, 0), (0, 1, 0), (0, 0, 1))

    def test_quarter_turn(self):
        # cos 90 deg = 0, sin 90 deg = 1 => translation (0, r, 0), columns (0,1,0), (-1,0,0), (0,0,1)
        pose = tracker_pose_at(18, TrackerConfig(radius=50, angular_step=5))
        np.testing.assert_allclose(pose.translation, (0, 50, 0), atol=1e-12)
        np.testing.assert_allclose(pose.rotation, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-12)

    @given(st.integers(0, 10_000), st.floats(0.1, 1000), st.floats(0.01, 359.99))
    def test_rigid_and_on_circle(self, frame, radius, step):
        pose = tracker_pose_at(frame, TrackerConfig(radius=radius, angular_step=step))
        r = np.array(pose.rotation)
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-6)
        assert math.isclose(np.linalg.norm(pose.translation), radius, rel_tol=1e-9)

    def test_deterministic_bytes(self):
        cfg = TrackerConfig(radius=12.5, angular_step=7)
        a = b"".join(tracker_pose_at(i, cfg).encode() for i in range(200))
        b = b"".join(tracker_pose_at(i, cfg).encode() for i in range(200))
        assert a == b

    def test_negative_frame(self):
        with pytest.raises(ValueError):
            tracker_pose_at(-1)

    @pytest.mark.parametrize(
        "kwargs", [{"radius": 0}, {"angular_step": 0}, {"angular_step": 360}, {"fps": 0}, {"frames": 0}, {"mode": "x"}]
    )
    def test_config_invariants(self, kwargs):
        with pytest.raises(ValueError):
            TrackerConfig(**kwargs)


class TestTrackerClient:
    def test_hundred_frames(self, sink_factory):
        received = []
        sink = sink_factory(on_outcome=lambda c, o: received.append(o))
        summary = run_tracker_client(client_for(sink), TrackerConfig(fps=1000))
        assert summary.frames_sent == 100
        wait_for(lambda: len(received) == 100)
        assert all(isinstance(o, Decoded) and o.message.type_name == "TRANSFORM" for o in received)

    def test_single_frame(self, sink_factory):
        received = []
        sink = sink_factory(on_outcome=lambda c, o: received.append(o))
        run_tracker_client(client_for(sink), TrackerConfig(frames=1))
        wait_for(lambda: len(received) == 1)
        body = received[0].message.body
        np.testing.assert_allclose(body.rotation, tracker_pose_at(0).rotation, atol=1e-7)
        np.testing.assert_allclose(body.translation, tracker_pose_at(0).translation, rtol=1e-7)

    def test_position_mode_matches_transform(self, sink_factory):
        received = []
        sink = sink_factory(on_outcome=lambda c, o: received.append(o))
        cfg = TrackerConfig(frames=40, fps=1000, mode="position", angular_step=13)
        run_tracker_client(client_for(sink), cfg)
        wait_for(lambda: len(received) == 40)
        for i, outcome in enumerate(received):
            body = outcome.message.body
            assert isinstance(body, PositionBody)
            as_t = position_as_transform(body)
            expected = tracker_pose_at(i, cfg)
            np.testing.assert_allclose(as_t.rotation, expected.rotation, atol=1e-6)
            np.testing.assert_allclose(as_t.translation, expected.translation, atol=1e-5)

    def test_pacing(self, sink_factory):
        sink = sink_factory()
        summary = run_tracker_client(client_for(sink), TrackerConfig(fps=40, frames=100))
        assert summary.elapsed_ms >= 99 * 25 * 0.9

    def test_refused(self):
        with pytest.raises(ConnectionRefused):
            run_tracker_client(EndpointConfig.client("127.0.0.1", free_port()), TrackerConfig(frames=1))

    def test_position_body_helper(self):
        body = tracker_body_at(3, TrackerConfig(mode="position"))
        assert isinstance(body, PositionBody)
        assert abs(np.linalg.norm(body.quaternion) - 1) < 1e-6


class TestSink:
    def test_log_records_in_order(self, sink_factory, tmp_path):
        sink = sink_factory()
        run_tracker_client(client_for(sink), TrackerConfig(frames=3, fps=1000))
        wait_for(lambda: len(read_log(sink.options.log_path)) == 3)
        records = read_log(sink.options.log_path)
        assert [r["seq"] for r in records] == [1, 2, 3]
        assert all(r["kind"] == "decoded" and r["type"] == "TRANSFORM" for r in records)
        assert set(records[0]) == {"seq", "kind", "type", "device", "body_size", "recv_unix_ns"}
        assert records[0]["device"] == "Tracker" and records[0]["body_size"] == 48

    def test_unknown_then_transform(self, sink_factory):
        sink = sink_factory()
        with connect(client_for(sink)) as conn:
            conn.send_raw(frame_message("BOGUSTYPE", "X", Timestamp(), os.urandom(16)))
            conn.send(TransformBody())
        wait_for(lambda: len(read_log(sink.options.log_path)) == 2)
        records = read_log(sink.options.log_path)
        assert [r["kind"] for r in records] == ["skipped", "decoded"]
        assert records[0]["type"] == "BOGUSTYPE" and records[0]["device"] == "X" and records[0]["body_size"] == 16

    def test_crc_failure_logged(self, sink_factory):
        sink = sink_factory()
        frame = bytearray(frame_message("TRANSFORM", "X", Timestamp(), TransformBody().encode()))
        frame[-1] ^= 0x10
        with connect(client_for(sink)) as conn:
            conn.send_raw(bytes(frame))
        wait_for(lambda: len(read_log(sink.options.log_path)) == 1)
        assert read_log(sink.options.log_path)[0]["kind"] == "crc_failure"

    def test_reply_status(self, sink_factory):
        sink = sink_factory(reply_status=True)
        with connect(EndpointConfig.client("127.0.0.1", sink.port, read_timeout=5000)) as conn:
            conn.send(TransformBody())
            conn.send(TransformBody())
            outcome = conn.receive_message()
            assert isinstance(outcome, Decoded)
            assert outcome.message.body == StatusBody(code=1, error_name="OK")

    def test_print_poses(self, sink_factory):
        out = io.StringIO()
        sink = sink_factory(print_poses=True, out=out)
        run_tracker_client(client_for(sink), TrackerConfig(frames=19, fps=1000, radius=10))
        wait_for(lambda: out.getvalue().count("\n") == 19)
        lines = out.getvalue().splitlines()
        assert lines[0] == "Tracker 0.000 10.000 0.000 0.000"
        assert lines[18] == "Tracker 90.000 0.000 10.000 0.000"

    def test_pose_line_has_no_negative_zero(self):
        assert pose_line("D", TransformBody(translation=(-1e-9, -0.0004, 0))) == "D 0.000 0.000 0.000 0.000"

    def test_sequential_clients(self, sink_factory):
        sink = sink_factory()
        for _ in range(3):
            run_tracker_client(client_for(sink), TrackerConfig(frames=2, fps=1000))
        wait_for(lambda: len(read_log(sink.options.log_path)) == 6)
        assert sink.clients_served == 3

    def test_concurrent_clients(self, sink_factory):
        import threading

        sink = sink_factory(concurrent=True)
        threads = [
            threading.Thread(target=run_tracker_client, args=(client_for(sink), TrackerConfig(frames=10, fps=200)))
            for _ in range(4)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        wait_for(lambda: len(read_log(sink.options.log_path)) == 40)


class TestImageSource:
    def test_gradient_values(self):
        vol = gradient_volume((4, 3, 2), "uint8")
        assert vol.shape == (2, 3, 4)
        for k in range(2):
            for j in range(3):
                for i in range(4):
                    assert vol[k, j, i] == i + j + k

    def test_gradient_wraps_at_scalar_max(self):
        vol = gradient_volume((200, 100, 1), "uint8")
        assert vol[0, 99, 199] == (199 + 99) % 255

    def test_single_voxel(self):
        assert make_gradient_image((1, 1, 1)).pixel_data == b"\x00"

    def test_image_geometry(self):
        img = make_gradient_image((2, 3, 4), "float32")
        assert img.orientation == (1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0)
        assert len(img.encode()) == 72 + 2 * 3 * 4 * 4

    def test_loopback_4x4x4(self, sink_factory):
        received = []
        sink = sink_factory(on_outcome=lambda c, o: received.append(o))
        summary = run_image_source(client_for(sink), (4, 4, 4), "uint8")
        assert summary.body_length == 72 + 64
        wait_for(lambda: len(received) == 1)
        body = received[0].message.body
        assert isinstance(body, ImageBody)
        assert received[0].message.header.body_size == 136
        assert body.pixel_data == make_gradient_image((4, 4, 4)).pixel_data
        np.testing.assert_array_equal(body.to_array(), gradient_volume((4, 4, 4)))
