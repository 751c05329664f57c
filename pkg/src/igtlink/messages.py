"""Typed message bodies and their big-endian wire codecs.

Six body types are understood: the five standard ones (TRANSFORM, POSITION,
STATUS, CAPABILITY, IMAGE) and the user-defined XMARKERLIST. Anything else
decodes to :class:`Unknown` at the session layer.

Lengths are in millimetres throughout; rotations are unitless direction
cosines. All floats travel as IEEE-754 float32, so values are rounded to
single precision on encode.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import ClassVar, Union

import numpy as np

from .errors import BodyLengthMismatch, InvalidBody, MalformedString
from .pose import quaternion_to_rotation
from .wire import (
    DEVICE_NAME_SIZE,
    TYPE_NAME_SIZE,
    MessageHeader,
    Timestamp,
    crc64,
    decode_name,
    encode_name,
)

STATUS_OK = 1


def _floats(values, n: int, field_name: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in np.asarray(values, dtype=float).ravel())
    if len(out) != n:
        raise InvalidBody(field_name, f"expected {n} values, got {len(out)}")
    return out


def _pack_floats(values, field_name: str) -> bytes:
    try:
        return struct.pack(f">{len(values)}f", *values)
    except OverflowError as exc:
        raise InvalidBody(field_name, "value does not fit in float32") from exc


def _name_field(name: str, width: int, field_name: str) -> bytes:
    try:
        return encode_name(name, width, field_name)
    except ValueError as exc:
        raise InvalidBody(field_name, str(exc)) from exc


def _check_length(type_name: str, data: bytes, expected: int) -> None:
    if len(data) != expected:
        raise BodyLengthMismatch(f"{type_name} body must be {expected} bytes, got {len(data)}")


@dataclass(frozen=True)
class TransformBody:
    """Rigid transform: 3x3 rotation (row-indexed) plus translation in mm.

    On the wire the twelve floats are column-major: the three rotation
    columns followed by the translation.
    """

    TYPE_NAME: ClassVar[str] = "TRANSFORM"
    WIRE_SIZE: ClassVar[int] = 48

    rotation: tuple[tuple[float, float, float], ...] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        rot = _floats(self.rotation, 9, "rotation")
        object.__setattr__(self, "rotation", (rot[0:3], rot[3:6], rot[6:9]))
        object.__setattr__(self, "translation", _floats(self.translation, 3, "translation"))

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def encode(self) -> bytes:
        r = self.rotation
        cols = [r[i][j] for j in range(3) for i in range(3)]
        return _pack_floats(cols + list(self.translation), "rotation/translation")

    @classmethod
    def decode(cls, data: bytes) -> TransformBody:
        _check_length(cls.TYPE_NAME, data, cls.WIRE_SIZE)
        v = struct.unpack(">12f", data)
        rotation = tuple(tuple(v[3 * j + i] for j in range(3)) for i in range(3))
        return cls(rotation, v[9:12])


@dataclass(frozen=True)
class PositionBody:
    """Position in mm plus orientation quaternion ``(x, y, z, w)``."""

    TYPE_NAME: ClassVar[str] = "POSITION"
    WIRE_SIZE: ClassVar[int] = 28

    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    quaternion: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "position", _floats(self.position, 3, "position"))
        object.__setattr__(self, "quaternion", _floats(self.quaternion, 4, "quaternion"))

    def encode(self) -> bytes:
        if not all(math.isfinite(c) for c in self.quaternion):
            raise InvalidBody("quaternion", "components must be finite")
        return _pack_floats(self.position + self.quaternion, "position/quaternion")

    @classmethod
    def decode(cls, data: bytes) -> PositionBody:
        _check_length(cls.TYPE_NAME, data, cls.WIRE_SIZE)
        v = struct.unpack(">7f", data)
        return cls(v[0:3], v[3:7])


@dataclass(frozen=True)
class StatusBody:
    TYPE_NAME: ClassVar[str] = "STATUS"
    FIXED_SIZE: ClassVar[int] = 30

    code: int = STATUS_OK
    subcode: int = 0
    error_name: str = ""
    status_message: str = ""

    def encode(self) -> bytes:
        if not 0 <= self.code < 2**16:
            raise InvalidBody("code", f"{self.code} outside uint16")
        if not -(2**63) <= self.subcode < 2**63:
            raise InvalidBody("subcode", f"{self.subcode} outside int64")
        if "\0" in self.status_message:
            raise InvalidBody("status_message", "must not contain NUL")
        name = _name_field(self.error_name, 20, "error_name")
        return struct.pack(">Hq", self.code, self.subcode) + name + self.status_message.encode("utf-8")

    @classmethod
    def decode(cls, data: bytes) -> StatusBody:
        if len(data) < cls.FIXED_SIZE:
            raise BodyLengthMismatch(f"STATUS body needs at least 30 bytes, got {len(data)}")
        code, subcode = struct.unpack_from(">Hq", data)
        error_name = decode_name(data[10:30], "error_name")
        try:
            # senders built on the reference library NUL-terminate the message
            message = data[30:].rstrip(b"\0").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedString(f"status message is not UTF-8: {exc}") from exc
        return cls(code, subcode, error_name, message)


@dataclass(frozen=True)
class CapabilityBody:
    TYPE_NAME: ClassVar[str] = "CAPABILITY"

    types: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))

    def encode(self) -> bytes:
        return b"".join(_name_field(t, TYPE_NAME_SIZE, "types") for t in self.types)

    @classmethod
    def decode(cls, data: bytes) -> CapabilityBody:
        if len(data) % TYPE_NAME_SIZE:
            raise BodyLengthMismatch(f"CAPABILITY body length {len(data)} is not a multiple of 12")
        return cls(
            tuple(
                decode_name(data[i : i + TYPE_NAME_SIZE], "types")
                for i in range(0, len(data), TYPE_NAME_SIZE)
            )
        )


# name -> (wire code, numpy base type)
SCALAR_TYPES: dict[str, tuple[int, str]] = {
    "int8": (2, "i1"),
    "uint8": (3, "u1"),
    "int16": (4, "i2"),
    "uint16": (5, "u2"),
    "int32": (6, "i4"),
    "uint32": (7, "u4"),
    "float32": (10, "f4"),
    "float64": (11, "f8"),
}
_SCALAR_BY_CODE = {code: name for name, (code, _) in SCALAR_TYPES.items()}
_ENDIAN = {"big": 1, "little": 2}
_ENDIAN_BY_CODE = {v: k for k, v in _ENDIAN.items()}
_COORD = {"RAS": 1, "LPS": 2}
_COORD_BY_CODE = {v: k for k, v in _COORD.items()}

IMAGE_HEADER_SIZE = 72
IMAGE_VERSION = 1
_IMAGE_HEADER = struct.Struct(">HBBBB3H12f6H")
assert _IMAGE_HEADER.size == IMAGE_HEADER_SIZE

IDENTITY_ORIENTATION = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0)


def scalar_size(scalar_type: str) -> int:
    return np.dtype(SCALAR_TYPES[scalar_type][1]).itemsize


@dataclass(frozen=True)
class ImageBody:
    """2D or 3D image with metric information.

    ``orientation`` holds twelve floats: the i, j and k axis directions each
    scaled by the voxel spacing (mm), then the origin (mm). Pixel data covers
    the sub-volume, i fastest, components interleaved.
    """

    TYPE_NAME: ClassVar[str] = "IMAGE"

    matrix_size: tuple[int, int, int]
    pixel_data: bytes
    scalar_type: str = "uint8"
    num_components: int = 1
    endian: str = "big"
    coordinate_system: str = "RAS"
    orientation: tuple[float, ...] = IDENTITY_ORIENTATION
    subvolume_offset: tuple[int, int, int] = (0, 0, 0)
    subvolume_size: tuple[int, int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "matrix_size", tuple(int(v) for v in self.matrix_size))
        object.__setattr__(self, "subvolume_offset", tuple(int(v) for v in self.subvolume_offset))
        sub = self.matrix_size if self.subvolume_size is None else self.subvolume_size
        object.__setattr__(self, "subvolume_size", tuple(int(v) for v in sub))
        object.__setattr__(self, "orientation", _floats(self.orientation, 12, "orientation"))
        object.__setattr__(self, "pixel_data", bytes(self.pixel_data))

    @property
    def bytes_per_voxel(self) -> int:
        return scalar_size(self.scalar_type) * self.num_components

    @property
    def dtype(self) -> np.dtype:
        base = SCALAR_TYPES[self.scalar_type][1]
        return np.dtype((">" if self.endian == "big" else "<") + base)

    def validate(self) -> None:
        if self.scalar_type not in SCALAR_TYPES:
            raise InvalidBody("scalar_type", f"unknown scalar type {self.scalar_type!r}")
        if not 1 <= self.num_components <= 4:
            raise InvalidBody("num_components", f"{self.num_components} not in 1..4")
        if self.endian not in _ENDIAN:
            raise InvalidBody("endian", f"{self.endian!r} is not 'big' or 'little'")
        if self.coordinate_system not in _COORD:
            raise InvalidBody("coordinate_system", f"{self.coordinate_system!r} is not RAS or LPS")
        for name in ("matrix_size", "subvolume_offset", "subvolume_size"):
            triple = getattr(self, name)
            if len(triple) != 3 or not all(0 <= v < 2**16 for v in triple):
                raise InvalidBody(name, f"{triple} must be three uint16 values")
        for off, size, full in zip(self.subvolume_offset, self.subvolume_size, self.matrix_size):
            if off + size > full:
                raise InvalidBody("subvolume_size", "sub-volume exceeds matrix size")
        expected = math.prod(self.subvolume_size) * self.bytes_per_voxel
        if len(self.pixel_data) != expected:
            raise InvalidBody("pixel_data", f"expected {expected} bytes, got {len(self.pixel_data)}")

    def encode(self) -> bytes:
        self.validate()
        header = _IMAGE_HEADER.pack(
            IMAGE_VERSION,
            self.num_components,
            SCALAR_TYPES[self.scalar_type][0],
            _ENDIAN[self.endian],
            _COORD[self.coordinate_system],
            *self.matrix_size,
            *self.orientation,
            *self.subvolume_offset,
            *self.subvolume_size,
        )
        return header + self.pixel_data

    @classmethod
    def decode(cls, data: bytes) -> ImageBody:
        if len(data) < IMAGE_HEADER_SIZE:
            raise BodyLengthMismatch(f"IMAGE body needs at least 72 bytes, got {len(data)}")
        v = _IMAGE_HEADER.unpack_from(data)
        _, components, scalar_code, endian_code, coord_code = v[:5]
        try:
            scalar_type = _SCALAR_BY_CODE[scalar_code]
            endian = _ENDIAN_BY_CODE[endian_code]
            coord = _COORD_BY_CODE[coord_code]
        except KeyError as exc:
            raise InvalidBody("image header", f"unknown enum code {exc}") from None
        body = cls(
            matrix_size=v[5:8],
            orientation=v[8:20],
            subvolume_offset=v[20:23],
            subvolume_size=v[23:26],
            pixel_data=data[IMAGE_HEADER_SIZE:],
            scalar_type=scalar_type,
            num_components=components,
            endian=endian,
            coordinate_system=coord,
        )
        expected = math.prod(body.subvolume_size) * body.bytes_per_voxel
        if len(body.pixel_data) != expected:
            raise BodyLengthMismatch(
                f"IMAGE pixel data must be {expected} bytes, got {len(body.pixel_data)}"
            )
        return body

    def to_array(self) -> np.ndarray:
        """Pixel data as an array indexed ``[k, j, i]`` (plus component axis if > 1)."""
        shape = tuple(reversed(self.subvolume_size))
        if self.num_components > 1:
            shape += (self.num_components,)
        return np.frombuffer(self.pixel_data, dtype=self.dtype).reshape(shape)


@dataclass(frozen=True)
class XMarker:
    position: tuple[float, ...] = (0.0,) * 6
    vector: tuple[float, float, float] = (0.0, 0.0, 0.0)
    marker_type: int = 0
    name: str = ""

    WIRE_SIZE: ClassVar[int] = 60
    _STRUCT: ClassVar[struct.Struct] = struct.Struct(">9fi20s")

    def __post_init__(self):
        object.__setattr__(self, "position", _floats(self.position, 6, "position"))
        object.__setattr__(self, "vector", _floats(self.vector, 3, "vector"))

    def encode(self) -> bytes:
        if not -(2**31) <= self.marker_type < 2**31:
            raise InvalidBody("marker_type", f"{self.marker_type} outside int32")
        name = _name_field(self.name, 20, "name")
        try:
            return self._STRUCT.pack(*self.position, *self.vector, self.marker_type, name)
        except OverflowError as exc:
            raise InvalidBody("position/vector", "value does not fit in float32") from exc

    @classmethod
    def decode(cls, data: bytes) -> XMarker:
        v = cls._STRUCT.unpack(data)
        return cls(v[0:6], v[6:9], v[9], decode_name(v[10], "name"))


@dataclass(frozen=True)
class XMarkerListBody:
    """User-defined marker list: opaque 6-vector, 3-vector, type and name per marker."""

    TYPE_NAME: ClassVar[str] = "XMARKERLIST"

    markers: tuple[XMarker, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "markers", tuple(self.markers))

    def encode(self) -> bytes:
        return b"".join(m.encode() for m in self.markers)

    @classmethod
    def decode(cls, data: bytes) -> XMarkerListBody:
        size = XMarker.WIRE_SIZE
        if len(data) % size:
            raise BodyLengthMismatch(f"XMARKERLIST body length {len(data)} is not a multiple of {size}")
        return cls(tuple(XMarker.decode(data[i : i + size]) for i in range(0, len(data), size)))


@dataclass(frozen=True)
class Unknown:
    """Placeholder for a body whose type this library does not understand."""

    type_name: str
    body_length: int

    @property
    def TYPE_NAME(self) -> str:  # noqa: N802 - mirrors the class attribute of known bodies
        return self.type_name


Body = Union[TransformBody, PositionBody, StatusBody, CapabilityBody, ImageBody, XMarkerListBody]

BODY_TYPES: dict[str, type] = {
    cls.TYPE_NAME: cls
    for cls in (TransformBody, PositionBody, StatusBody, CapabilityBody, ImageBody, XMarkerListBody)
}
SUPPORTED_TYPES: tuple[str, ...] = tuple(BODY_TYPES)


def encode_body(body: Body) -> bytes:
    if isinstance(body, Unknown) or type(body) not in BODY_TYPES.values():
        raise InvalidBody("body", f"cannot encode {type(body).__name__}")
    return body.encode()


def decode_body(type_name: str, data: bytes) -> Body:
    try:
        cls = BODY_TYPES[type_name]
    except KeyError:
        raise KeyError(f"no codec for type {type_name!r}") from None
    return cls.decode(bytes(data))


def position_as_transform(p: PositionBody) -> TransformBody:
    return TransformBody(quaternion_to_rotation(p.quaternion), p.position)


@dataclass(frozen=True)
class Message:
    """A header plus its decoded body."""

    header: MessageHeader
    body: Body | Unknown = field(default=None)

    @property
    def type_name(self) -> str:
        return self.header.type_name

    @property
    def device_name(self) -> str:
        return self.header.device_name

    @classmethod
    def build(cls, body: Body, device_name: str = "", timestamp: Timestamp | None = None) -> Message:
        """Wrap ``body`` with a header whose size and CRC match its encoding."""
        encoded = encode_body(body)
        header = MessageHeader(
            type_name=body.TYPE_NAME,
            device_name=device_name,
            timestamp=Timestamp.now() if timestamp is None else timestamp,
            body_size=len(encoded),
            crc=crc64(encoded),
        )
        # validates names early rather than at send time
        encode_name(device_name, DEVICE_NAME_SIZE, "device_name")
        return cls(header, body)
