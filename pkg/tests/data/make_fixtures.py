"""Regenerate the golden capture fixtures: ``python tests/data/make_fixtures.py``.

Only rerun this after a deliberate wire-format change; the tests compare the
codec against the committed bytes.
"""

from pathlib import Path

from igtlink.messages import (
    CapabilityBody,
    ImageBody,
    PositionBody,
    StatusBody,
    TransformBody,
    XMarker,
    XMarkerListBody,
)
from igtlink.wire import Timestamp, frame_message

HERE = Path(__file__).parent
TIMESTAMP = Timestamp(1_000_000_000, 0x80000000)
DEVICE = "Golden"

BODIES = {
    "transform": TransformBody(
        ((0.0, -1.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0)), (10.0, -20.5, 30.25)
    ),
    "position": PositionBody((1.0, 2.0, 3.0), (0.0, 0.0, 0.5, 0.75)),
    "status": StatusBody(code=1, subcode=-2, error_name="OK", status_message="ready"),
    "capability": CapabilityBody(("TRANSFORM", "POSITION", "STATUS")),
    "image": ImageBody(matrix_size=(2, 2, 2), pixel_data=bytes([0, 1, 1, 2, 1, 2, 2, 3])),
    "xmarkerlist": XMarkerListBody(
        (XMarker((1, 2, 3, 0, 0, 0), (0, 0, 1), 7, "tip"), XMarker((4, 5, 6, 0.5, 0, 0), (1, 0, 0), -1, "entry"))
    ),
}


def framed(name: str) -> bytes:
    body = BODIES[name]
    return frame_message(body.TYPE_NAME, DEVICE, TIMESTAMP, body.encode())


if __name__ == "__main__":
    for name in BODIES:
        (HERE / f"{name}.igtl").write_bytes(framed(name))
