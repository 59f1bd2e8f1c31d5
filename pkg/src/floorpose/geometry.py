"""Quaternion, rotation, and similarity-transform math.

Conventions fixed across the toolkit:

- quaternions are length-4 arrays ordered (w, x, y, z), matching the
  QW-first column order of the pose text files;
- rotation matrices are 3x3, right-handed, acting on column vectors;
- Euler angles are intrinsic z-y-x (yaw, pitch, roll) in radians;
- the canonical hemisphere has w >= 0. Canonicalization happens in
  ``normalize_quat`` only, never at construction, so raw file values
  survive a parse/serialize round trip unchanged.

All functions are pure and all types are immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidQuaternionError, InvalidRotationError

_GIMBAL_EPS = 1e-9


def _as_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise InvalidQuaternionError(f"quaternion must have shape (4,), got {q.shape}")
    return q


def _as_vec3(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {v.shape}")
    return v


def normalize_quat(q) -> np.ndarray:
    """Scale to unit norm and pick the canonical hemisphere.

    Canonical means w >= 0; if w == 0 the first nonzero of (x, y, z) is
    made nonnegative so q and -q always map to one representative.
    """
    q = _as_quat(q)
    norm = np.linalg.norm(q)
    if norm <= 0.0 or not np.isfinite(norm):
        raise InvalidQuaternionError("cannot normalize zero or non-finite quaternion")
    q = q / norm
    for c in q:
        if c > 0.0:
            break
        if c < 0.0:
            q = -q
            break
    return q


def quat_conjugate(q) -> np.ndarray:
    q = _as_quat(q)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product a * b (apply b first, then a)."""
    w1, x1, y1, z1 = _as_quat(a)
    w2, x2, y2, z2 = _as_quat(b)
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_rotate(q, v) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion."""
    q = _as_quat(q)
    v = _as_vec3(v)
    u = q[1:]
    t = 2.0 * np.cross(u, v)
    return v + q[0] * t + np.cross(u, t)


def quat_to_rotmat(q) -> np.ndarray:
    q = _as_quat(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotmat_to_quat(R) -> np.ndarray:
    """Convert an orthonormal rotation matrix to a canonical unit quaternion.

    Uses the eigenvector method: the quaternion is the eigenvector of a
    symmetric 4x4 matrix built from R, which is stable for all rotation
    angles including near 180 degrees.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise InvalidRotationError(f"rotation matrix must be 3x3, got {R.shape}")
    if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
        raise InvalidRotationError("matrix is not orthonormal within 1e-9")
    if abs(np.linalg.det(R) - 1.0) > 1e-9:
        raise InvalidRotationError("matrix determinant is not +1 within 1e-9")
    Rxx, Ryx, Rzx, Rxy, Ryy, Rzy, Rxz, Ryz, Rzz = R.flat
    K = (
        np.array(
            [
                [Rxx - Ryy - Rzz, 0, 0, 0],
                [Ryx + Rxy, Ryy - Rxx - Rzz, 0, 0],
                [Rzx + Rxz, Rzy + Ryz, Rzz - Rxx - Ryy, 0],
                [Ryz - Rzy, Rzx - Rxz, Rxy - Ryx, Rxx + Ryy + Rzz],
            ]
        )
        / 3.0
    )
    eigvals, eigvecs = np.linalg.eigh(K)
    q = eigvecs[[3, 0, 1, 2], np.argmax(eigvals)]
    if q[0] < 0:
        q = -q
    return q


def log_quat(q) -> np.ndarray:
    """Rotation-vector logarithm of a unit quaternion (half-angle scaled axis).

    Hemisphere-invariant: q and -q give the same result. Near the identity
    the atan2-based factor degenerates to 0/0, so a Taylor branch is used.
    """
    q = _as_quat(q)
    if q[0] < 0:
        q = -q
    w = q[0]
    v = q[1:]
    s = np.linalg.norm(v)
    if s < 1e-9:
        # atan2(s, w)/s -> 1/w as s -> 0; w is ~1 here
        return v / w
    return v * (math.atan2(s, w) / s)


def exp_quat(v) -> np.ndarray:
    """Inverse of log_quat: rotation vector (half-angle scaled) to quaternion."""
    v = _as_vec3(v)
    half = np.linalg.norm(v)
    if half < 1e-9:
        sinc = 1.0 - half * half / 6.0
    else:
        sinc = math.sin(half) / half
    return np.concatenate(([math.cos(half)], v * sinc))


def euler_to_quat(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Intrinsic z-y-x: rotate by yaw about z, then pitch about y, then roll about x."""
    qz = np.array([math.cos(yaw / 2), 0.0, 0.0, math.sin(yaw / 2)])
    qy = np.array([math.cos(pitch / 2), 0.0, math.sin(pitch / 2), 0.0])
    qx = np.array([math.cos(roll / 2), math.sin(roll / 2), 0.0, 0.0])
    return quat_multiply(quat_multiply(qz, qy), qx)


def quat_to_euler(q) -> tuple[float, float, float]:
    """Extract intrinsic z-y-x (yaw, pitch, roll) angles in radians.

    At gimbal lock (|pitch| = pi/2) yaw and roll are not separable; the
    convention here sets roll to 0 and folds everything into yaw.
    """
    R = quat_to_rotmat(_as_quat(q))
    sp = min(1.0, max(-1.0, -R[2, 0]))
    pitch = math.asin(sp)
    if 1.0 - abs(sp) < _GIMBAL_EPS:
        return math.atan2(-R[0, 1], R[1, 1]), pitch, 0.0
    yaw = math.atan2(R[1, 0], R[0, 0])
    roll = math.atan2(R[2, 1], R[2, 2])
    return yaw, pitch, roll


def rotation_error_deg(q1, q2) -> float:
    """Angular distance in degrees: 2*arccos(|<q1, q2>|), in [0, 180].

    The absolute value makes the metric invariant to the sign of either
    quaternion, and the cosine is clamped to [-1, 1] so accumulated float
    error can never produce a NaN from arccos. The squared form divides by
    both squared norms, which makes the error exactly 0.0 for q2 = +-q1
    (numerator and denominator are then the same float product).
    """
    q1 = _as_quat(q1)
    q2 = _as_quat(q2)
    n = float(np.dot(q1, q1)) * float(np.dot(q2, q2))
    if n <= 0.0 or not np.isfinite(n):
        raise InvalidQuaternionError("rotation_error_deg requires nonzero quaternions")
    t = float(np.dot(q1, q2))
    cos_sq = t * t / n
    cos_sq = min(1.0, max(-1.0, cos_sq))
    return math.degrees(2.0 * math.acos(math.sqrt(cos_sq)))


def translation_error(p1, p2) -> float:
    return float(np.linalg.norm(_as_vec3(p1) - _as_vec3(p2)))


def camera_center_from_extrinsics(qvec, tvec) -> np.ndarray:
    """World-frame camera center C = -R^T t for world-to-camera extrinsics."""
    R = quat_to_rotmat(qvec)
    return -R.T @ _as_vec3(tvec)


@dataclass(frozen=True)
class Pose6DoF:
    """Camera position plus camera-to-world unit-quaternion orientation."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position))
        object.__setattr__(self, "orientation", _as_quat(self.orientation))


@dataclass(frozen=True)
class SimilarityTransform:
    """p -> scale * R(rotation) * p + translation."""

    scale: float
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        object.__setattr__(self, "rotation", _as_quat(self.rotation))
        object.__setattr__(self, "translation", _as_vec3(self.translation))

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(scale=1.0)

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_rotmat(self.rotation)

    def apply(self, points) -> np.ndarray:
        """Transform one (3,) point or a stack of (N, 3) points."""
        p = np.asarray(points, dtype=np.float64)
        return self.scale * p @ self.rotation_matrix.T + self.translation

    def apply_to_pose(self, pose: Pose6DoF) -> Pose6DoF:
        """Move a pose; scale does not affect the orientation."""
        return Pose6DoF(
            position=self.apply(pose.position),
            orientation=quat_multiply(self.rotation, pose.orientation),
        )

    def inverse(self) -> "SimilarityTransform":
        inv_rot = quat_conjugate(self.rotation)
        inv_scale = 1.0 / self.scale
        inv_trans = -inv_scale * quat_rotate(inv_rot, self.translation)
        return SimilarityTransform(scale=inv_scale, rotation=inv_rot, translation=inv_trans)


def apply_similarity(transform: SimilarityTransform, point) -> np.ndarray:
    return transform.apply(point)


def apply_similarity_to_pose(transform: SimilarityTransform, pose: Pose6DoF) -> Pose6DoF:
    return transform.apply_to_pose(pose)
