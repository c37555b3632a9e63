"""Shared domain types: point clouds, rigid transforms, registration settings.

Point clouds are plain ``(N, 3)`` float64 arrays.  Rigid transforms are kept
as a (rotation, translation) pair and only turned into a 4x4 homogeneous
matrix at I/O boundaries.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

ORTHONORMAL_TOL = 1e-9


def as_cloud(points, *, name: str = "cloud") -> np.ndarray:
    """Validate and return ``points`` as a read-only ``(N, 3)`` float64 array.

    Raises ``ValueError`` for a wrong shape, an empty cloud or non-finite
    coordinates.
    """
    arr = np.array(points, dtype=np.float64, copy=True)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite coordinates")
    arr.flags.writeable = False
    return arr


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion ``p -> rotation @ p + translation``."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = _frozen(self.rotation)
        t = _frozen(self.translation).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if not (np.isfinite(R).all() and np.isfinite(t).all()):
            raise ValueError("transform contains non-finite values")
        if np.linalg.norm(R.T @ R - np.eye(3)) > ORTHONORMAL_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation is a reflection (det != +1)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix) -> "RigidTransform":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix (row-major)."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)

    def __eq__(self, other):
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    __hash__ = None


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform that applies ``b`` first, then ``a``."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def apply(t: RigidTransform, cloud) -> np.ndarray:
    """Apply ``t`` to every point of ``cloud``; order and count are kept."""
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise ValueError("cloud must be a nonempty (N, 3) array")
    return pts @ t.rotation.T + t.translation


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class EulerPose:
    """Roll/pitch/yaw in radians plus a translation."""

    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0

    def __post_init__(self):
        for name in ("roll", "pitch", "yaw", "tx", "ty", "tz"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"pose field {name} is not finite")
            object.__setattr__(self, name, value)

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.roll, self.pitch, self.yaw, self.tx, self.ty, self.tz)


def euler_to_transform(pose: EulerPose) -> RigidTransform:
    """Extrinsic X-Y-Z Euler angles: ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    R = rot_z(pose.yaw) @ rot_y(pose.pitch) @ rot_x(pose.roll)
    return RigidTransform(R, (pose.tx, pose.ty, pose.tz))


def rotation_angle(R) -> float:
    """Geodesic angle of a rotation matrix, in radians.

    Uses ``atan2(sin, cos)`` rather than ``acos`` of the trace, which loses
    about half the digits near zero.
    """
    R = np.asarray(R, dtype=np.float64)
    c = (np.trace(R) - 1.0) / 2.0
    s = 0.5 * math.hypot(R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1])
    return float(math.atan2(s, c))


def transform_error(estimate: RigidTransform, truth: RigidTransform) -> tuple[float, float]:
    """(rotation geodesic angle, translation norm) between two transforms."""
    rot_err = rotation_angle(estimate.rotation.T @ truth.rotation)
    trans_err = float(np.linalg.norm(estimate.translation - truth.translation))
    return rot_err, trans_err


class Method(str, enum.Enum):
    COSM = "cosm"
    STANDARD_SVD = "svd"


# Scale factor of the MSE objective; never estimated.
SCALE = 1.0


@dataclass(frozen=True)
class RegistrationConfig:
    sigma: float = 100.0
    max_iterations: int = 50
    rmse_abs_tol: float = 0.0
    rmse_rel_tol: float = 0.0
    method: Method = Method.COSM
    # Only used by the CoSM method. Turning it off keeps just the (i, c(i)) cells.
    mirror: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be a positive finite number")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if self.rmse_abs_tol < 0 or self.rmse_rel_tol < 0:
            raise ValueError("tolerances must be nonnegative")
