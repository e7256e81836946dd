"""SE(3) poses and minimal 6-DoF perturbations.

Poses are rotation-matrix + translation pairs. Perturbations use the
[dt, dq] parameterization where dq is the imaginary part of a unit
quaternion (Hamilton convention, real part recovered as
sqrt(1 - ||dq||^2)). All solver Jacobians assume the right-perturbation
update X * exp(v).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Compositions tolerated before the rotation is re-orthonormalized.
REORTHO_INTERVAL = 1000


class InvalidPerturbationError(ValueError):
    """Perturbation vector cannot encode a rotation (||dq|| >= 1)."""


def skew(p: np.ndarray) -> np.ndarray:
    """3x3 matrix S such that S @ q == cross(p, q) for every q."""
    x, y, z = np.asarray(p, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def quat_to_rotation(qx: float, qy: float, qz: float, qw: float) -> np.ndarray:
    """Rotation matrix of the (not necessarily unit) quaternion qw + (qx,qy,qz)."""
    n = qw * qw + qx * qx + qy * qy + qz * qz
    if n < 1e-12:
        raise ValueError("cannot normalize near-zero quaternion")
    s = 2.0 / n
    wx, wy, wz = s * qw * qx, s * qw * qy, s * qw * qz
    xx, xy, xz = s * qx * qx, s * qx * qy, s * qx * qz
    yy, yz, zz = s * qy * qy, s * qy * qz, s * qz * qz
    return np.array(
        [
            [1.0 - (yy + zz), xy - wz, xz + wy],
            [xy + wz, 1.0 - (xx + zz), yz - wx],
            [xz - wy, yz + wx, 1.0 - (xx + yy)],
        ]
    )


def rotation_to_quat(rotation: np.ndarray) -> np.ndarray:
    """Quaternion [qx, qy, qz, qw] (real part last) of a rotation matrix.

    Returns the representative with non-negative real part.
    """
    m = np.asarray(rotation, dtype=float)
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0.0:
        s = np.sqrt(trace + 1.0) * 2.0
        qw = 0.25 * s
        qx = (m[2, 1] - m[1, 2]) / s
        qy = (m[0, 2] - m[2, 0]) / s
        qz = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        qw = (m[2, 1] - m[1, 2]) / s
        qx = 0.25 * s
        qy = (m[0, 1] + m[1, 0]) / s
        qz = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        qw = (m[0, 2] - m[2, 0]) / s
        qx = (m[0, 1] + m[1, 0]) / s
        qy = 0.25 * s
        qz = (m[1, 2] + m[2, 1]) / s
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        qw = (m[1, 0] - m[0, 1]) / s
        qx = (m[0, 2] + m[2, 0]) / s
        qy = (m[1, 2] + m[2, 1]) / s
        qz = 0.25 * s
    q = np.array([qx, qy, qz, qw])
    if q[3] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def rotation_angle(rotation: np.ndarray) -> float:
    """Rotation angle in radians (angle-axis magnitude) of a rotation matrix."""
    c = 0.5 * (np.trace(rotation) - 1.0)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def _orthonormalize(rotation: np.ndarray) -> np.ndarray:
    # Polar factor: nearest rotation in Frobenius norm.
    u, _, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass(frozen=True)
class Pose:
    """Rigid transform with 3x3 rotation and 3-vector translation (meters).

    Immutable: the stored arrays are copies with the writeable flag
    cleared, so instances are safe to share across threads.
    """

    rotation: np.ndarray
    translation: np.ndarray
    # Compositions since the last re-orthonormalization; drift control only.
    generation: int = field(default=0, compare=False, repr=False)

    def __post_init__(self) -> None:
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_quat(t: np.ndarray, q_xyzw: np.ndarray) -> "Pose":
        qx, qy, qz, qw = np.asarray(q_xyzw, dtype=float)
        return Pose(quat_to_rotation(qx, qy, qz, qw), t)

    def quat(self) -> np.ndarray:
        """Rotation as [qx, qy, qz, qw]."""
        return rotation_to_quat(self.rotation)

    def compose(self, other: "Pose") -> "Pose":
        r = self.rotation @ other.rotation
        t = self.rotation @ other.translation + self.translation
        gen = max(self.generation, other.generation) + 1
        if gen >= REORTHO_INTERVAL:
            return Pose(_orthonormalize(r), t, 0)
        return Pose(r, t, gen)

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -(rt @ self.translation), self.generation)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply to one point (3,) or a batch (..., 3)."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected 4x4 matrix, got {m.shape}")
        return Pose(m[:3, :3], m[:3, 3])

    def orthonormalized(self) -> "Pose":
        return Pose(_orthonormalize(self.rotation), self.translation, 0)


@dataclass(frozen=True)
class PerturbationVector:
    """Minimal update [dt, dq]: dt in meters, dq quaternion imaginary part."""

    dt: np.ndarray
    dq: np.ndarray

    def __post_init__(self) -> None:
        dt = np.array(self.dt, dtype=float).reshape(3)
        dq = np.array(self.dq, dtype=float).reshape(3)
        dt.flags.writeable = False
        dq.flags.writeable = False
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "dq", dq)

    @staticmethod
    def zero() -> "PerturbationVector":
        return PerturbationVector(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_vector(v: np.ndarray) -> "PerturbationVector":
        v = np.asarray(v, dtype=float).reshape(6)
        return PerturbationVector(v[:3], v[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.dt, self.dq])

    def negated(self) -> "PerturbationVector":
        return PerturbationVector(-self.dt, -self.dq)


def exp(v: PerturbationVector) -> Pose:
    """Pose whose rotation is R(dq) and translation dt.

    The quaternion real part is sqrt(1 - ||dq||^2), so exp of the zero
    vector is exactly the identity.
    """
    nq2 = float(v.dq @ v.dq)
    if nq2 >= 1.0:
        raise InvalidPerturbationError(
            f"||dq|| = {np.sqrt(nq2):.6f} >= 1 is not a quaternion imaginary part"
        )
    qw = np.sqrt(1.0 - nq2)
    return Pose(quat_to_rotation(v.dq[0], v.dq[1], v.dq[2], qw), v.dt)


def boxplus(x: Pose, v: PerturbationVector) -> Pose:
    """Right-perturbation update X * exp(v)."""
    return x.compose(exp(v))


def relative(x_i: Pose, x_j: Pose) -> Pose:
    """Relative transform X_j^-1 * X_i mapping frame-i coordinates into frame j."""
    return x_j.inverse().compose(x_i)
