"""Coordinate conventions, homogeneous transforms, and camera geometry.

Two frame conventions are supported, both forward-X / up-Z:

* ``RH_FLU_ROOF``  -- right-handed, Y points left, vehicle origin at the
  center of the roof (the convention of typical real-world driving logs).
* ``LH_FRU_WHEEL`` -- left-handed, Y points right, vehicle origin on the
  wheel contact plane (the convention of the synthetic-scenario domain).

Converting between them negates the lateral coordinate and the yaw angle
and shifts the vertical coordinate by the roof height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError


class InvalidPoseError(SchemaError):
    """Pose with non-finite components."""


class NonInvertibleError(SchemaError):
    """Transform whose linear part is singular."""


class DegenerateIntrinsicsError(SchemaError):
    """Camera intrinsics with a zero or negative focal length."""


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi].

    Angles already in range are returned unchanged, so negation followed by
    normalization is an exact involution on normalized input.
    """
    if not math.isfinite(a):
        raise InvalidPoseError(f"non-finite angle {a!r}")
    if -math.pi < a <= math.pi:
        return a
    r = math.remainder(a, math.tau)
    return math.pi if r <= -math.pi else r


@dataclass(frozen=True)
class FrameConvention:
    """Handedness, lateral-axis semantics, and vehicle origin reference."""

    name: str
    handedness: str  # "right" | "left"
    lateral_axis: str  # "left_positive" | "right_positive"
    origin_ref: str  # "roof_center" | "wheel_contact_plane"

    def __post_init__(self) -> None:
        if self.handedness == "right" and self.lateral_axis != "left_positive":
            raise SchemaError("right-handed frames must have left_positive lateral axis")
        if self.handedness == "left" and self.lateral_axis != "right_positive":
            raise SchemaError("left-handed frames must have right_positive lateral axis")


RH_FLU_ROOF = FrameConvention("RH_FLU_ROOF", "right", "left_positive", "roof_center")
LH_FRU_WHEEL = FrameConvention("LH_FRU_WHEEL", "left", "right_positive", "wheel_contact_plane")

CONVENTIONS: dict[str, FrameConvention] = {c.name: c for c in (RH_FLU_ROOF, LH_FRU_WHEEL)}


def convention_from_name(name: str) -> FrameConvention:
    try:
        return CONVENTIONS[name]
    except KeyError:
        raise SchemaError(f"unknown frame convention {name!r}") from None


@dataclass(frozen=True)
class RoofOffset:
    """Height of the roof center above the wheel contact plane, meters."""

    h_roof: float = 1.5

    def __post_init__(self) -> None:
        if not (math.isfinite(self.h_roof) and self.h_roof > 0):
            raise SchemaError(f"h_roof must be positive and finite, got {self.h_roof!r}")


@dataclass(frozen=True)
class Pose:
    """Planar-plus-height pose: position in meters, yaw about the up axis."""

    x: float
    y: float
    z: float = 0.0
    yaw: float = 0.0

    def __post_init__(self) -> None:
        for name in ("x", "y", "z", "yaw"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidPoseError(f"non-finite pose field {name}")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


def convert_pose(
    p: Pose,
    src: FrameConvention,
    dst: FrameConvention,
    off: RoofOffset = RoofOffset(),
) -> Pose:
    """Re-express a pose given in ``src`` convention in ``dst`` convention.

    Identity when ``src == dst``. Otherwise the lateral coordinate and yaw
    are negated (handedness flip) and z is shifted by the roof height:
    wheel-plane origin to roof origin subtracts ``h_roof``.
    """
    for c in (src, dst):
        if c.name not in CONVENTIONS:
            raise SchemaError(f"unknown frame convention {c.name!r}")
    if src == dst:
        return p
    dz = -off.h_roof if src.origin_ref == "wheel_contact_plane" else off.h_roof
    return Pose(p.x, -p.y, p.z + dz, normalize_angle(-p.yaw))


class Transform4:
    """Immutable 4x4 homogeneous transform with exact (0,0,0,1) bottom row."""

    __slots__ = ("_m",)

    def __init__(self, m: np.ndarray):
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise SchemaError(f"Transform4 expects a 4x4 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise SchemaError("Transform4 entries must be finite")
        if not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise SchemaError("Transform4 bottom row must be (0, 0, 0, 1)")
        m = m.copy()
        m.setflags(write=False)
        self._m = m

    @property
    def m(self) -> np.ndarray:
        return self._m

    @classmethod
    def identity(cls) -> "Transform4":
        return cls(np.eye(4))

    @classmethod
    def translate(cls, x: float, y: float, z: float = 0.0) -> "Transform4":
        m = np.eye(4)
        m[:3, 3] = (x, y, z)
        return cls(m)

    @classmethod
    def rot_z(cls, yaw: float) -> "Transform4":
        c, s = math.cos(yaw), math.sin(yaw)
        m = np.eye(4)
        m[0, 0], m[0, 1] = c, -s
        m[1, 0], m[1, 1] = s, c
        return cls(m)

    @classmethod
    def from_flat(cls, values) -> "Transform4":
        arr = np.asarray(list(values), dtype=float)
        if arr.shape != (16,):
            raise SchemaError(f"expected 16 row-major values, got {arr.shape}")
        return cls(arr.reshape(4, 4))

    def to_flat(self) -> list[float]:
        """Row-major 16-vector, the serialized form and the encoder input."""
        return [float(v) for v in self._m.reshape(-1)]

    def apply_point(self, p) -> np.ndarray:
        v = np.ones(4)
        v[:3] = p
        return (self._m @ v)[:3]

    def __repr__(self) -> str:
        return f"Transform4({self._m.tolist()!r})"


def compose(a: Transform4, b: Transform4) -> Transform4:
    """Matrix product a * b (apply b first, then a)."""
    return Transform4(a.m @ b.m)


def invert(t: Transform4) -> Transform4:
    """Inverse of an affine homogeneous transform.

    Computed blockwise so the bottom row stays exactly (0,0,0,1).
    """
    a = t.m[:3, :3]
    b = t.m[:3, 3]
    try:
        a_inv = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        raise NonInvertibleError("transform has a singular linear part") from None
    if not np.all(np.isfinite(a_inv)):
        raise NonInvertibleError("transform inverse is not finite")
    m = np.eye(4)
    m[:3, :3] = a_inv
    m[:3, 3] = -a_inv @ b
    return Transform4(m)


def pose_to_matrix(p: Pose) -> Transform4:
    """Rigid transform mapping pose-local coordinates into the world frame."""
    m = Transform4.rot_z(p.yaw).m.copy()
    m[:3, 3] = (p.x, p.y, p.z)
    return Transform4(m)


def convention_change_matrix(
    src: FrameConvention, dst: FrameConvention, off: RoofOffset = RoofOffset()
) -> Transform4:
    """Affine point map equivalent to :func:`convert_pose` on positions.

    The linear part mirrors the lateral axis (determinant -1); the
    translation carries the wheel-plane/roof origin shift.
    """
    if src == dst:
        return Transform4.identity()
    dz = -off.h_roof if src.origin_ref == "wheel_contact_plane" else off.h_roof
    m = np.diag([1.0, -1.0, 1.0, 1.0])
    m[2, 3] = dz
    return Transform4(m)


LATERAL_MIRROR = Transform4(np.diag([1.0, -1.0, 1.0, 1.0]))

# Fixed camera view order used by records, rigs, and prompt rendering.
VIEW_ORDER = ("front", "front_left", "front_right", "back", "back_left", "back_right")


@dataclass(frozen=True)
class CameraCalibration:
    """Pinhole intrinsics plus camera-to-ego mounting transform."""

    name: str
    fx: float
    fy: float
    cx: float
    cy: float
    T_cam_to_ego: Transform4 = field(default_factory=Transform4.identity)
    width: int = 1600
    height: int = 900

    def __post_init__(self) -> None:
        for v in (self.fx, self.fy, self.cx, self.cy):
            if not math.isfinite(v):
                raise DegenerateIntrinsicsError("non-finite intrinsic parameter")
        if self.fx <= 0 or self.fy <= 0:
            raise DegenerateIntrinsicsError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise SchemaError("image dimensions must be positive")

    def intrinsic_matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


def hom(k3: np.ndarray) -> Transform4:
    """Embed a 3x3 matrix into an identity-padded 4x4 homogeneous matrix."""
    k3 = np.asarray(k3, dtype=float)
    if k3.shape != (3, 3):
        raise SchemaError(f"expected a 3x3 matrix, got shape {k3.shape}")
    m = np.eye(4)
    m[:3, :3] = k3
    return Transform4(m)


def image_to_ego_matrix(c: CameraCalibration) -> Transform4:
    """T_cam_to_ego * hom(K^-1): maps homogeneous pixel rays into the ego frame.

    The flattened 16-vector of the result is the geometry-encoder input for
    this camera view.
    """
    if c.fx == 0 or c.fy == 0:
        raise DegenerateIntrinsicsError("zero focal length")
    k_inv = np.array(
        [
            [1.0 / c.fx, 0.0, -c.cx / c.fx],
            [0.0, 1.0 / c.fy, -c.cy / c.fy],
            [0.0, 0.0, 1.0],
        ]
    )
    return compose(c.T_cam_to_ego, hom(k_inv))


def _mount(yaw_deg: float, x: float, y: float, z: float) -> Transform4:
    m = Transform4.rot_z(math.radians(yaw_deg)).m.copy()
    m[:3, 3] = (x, y, z)
    return Transform4(m)


def default_camera_rig(kind: str = "sim") -> tuple[CameraCalibration, ...]:
    """Six-camera 900x1600 surround rig.

    Two presets with deliberately different intrinsics and mounting
    positions, standing in for the hardware gap between the synthetic and
    the real-world sensor suites.
    """
    if kind == "sim":
        fx = fy = 800.0
        cx, cy = 800.0, 450.0
        radius, z = 1.2, 1.6
    elif kind == "real":
        fx = fy = 1266.4
        cx, cy = 816.2, 491.5
        radius, z = 1.0, 0.1
    else:
        raise SchemaError(f"unknown camera rig kind {kind!r}")
    yaws = {"front": 0.0, "front_left": 55.0, "front_right": -55.0,
            "back": 180.0, "back_left": 110.0, "back_right": -110.0}
    cams = []
    for name in VIEW_ORDER:
        yaw = yaws[name]
        mx = radius * math.cos(math.radians(yaw))
        my = radius * math.sin(math.radians(yaw))
        cams.append(
            CameraCalibration(name=name, fx=fx, fy=fy, cx=cx, cy=cy,
                              T_cam_to_ego=_mount(yaw, mx, my, z))
        )
    return tuple(cams)
