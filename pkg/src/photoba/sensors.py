"""Pinhole and spherical projection models with analytic Jacobians.

Pixel coordinates are (column, row): the first component is horizontal.
Pinhole maps p -> [fx*x/z + cx, fy*y/z + cy]; spherical maps p to
azimuth/elevation, u = [fx*atan2(y,x) + cx, fy*atan2(z, hypot(x,y)) + cy],
with the column wrapped modulo the image width (panoramas are cyclic in
azimuth). `d` is z-depth for pinhole sensors and Euclidean range for
spherical ones.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import Pose

PINHOLE = "pinhole"
SPHERICAL = "spherical"


class InvalidDepthError(ValueError):
    """Depth/range outside the sensor's valid interval."""


class SingularJacobianError(ValueError):
    """Projective Jacobian undefined at this point (z<=0 pinhole, on-axis spherical)."""


@dataclass(frozen=True)
class Intrinsics:
    """Projection parameters plus image size and valid depth bounds.

    fx/fy are pixels-per-unit for the pinhole model and pixels-per-radian
    for the spherical one; cx/cy is the principal point or the angular
    offset in pixels.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    model: str
    depth_min: float
    depth_max: float

    def __post_init__(self) -> None:
        if self.model not in (PINHOLE, SPHERICAL):
            raise ValueError(f"unknown sensor model {self.model!r}")
        if self.fx == 0.0 or self.fy == 0.0:
            raise ValueError("fx and fy must be nonzero")
        if self.width < 2 or self.height < 2:
            raise ValueError("image must be at least 2x2")
        if not 0.0 < self.depth_min < self.depth_max:
            raise ValueError("need 0 < depth_min < depth_max")

    def scaled(self, s: float) -> "Intrinsics":
        """Intrinsics of the same view downscaled by factor s in (0, 1].

        The principal point gets the half-pixel footprint correction
        c' = s*c + (s-1)/2 so a downscaled pixel center unprojects
        through the centroid of the source pixels it aggregates; plain
        c*s misaligns the two by half a fine pixel.
        """
        return replace(
            self,
            fx=self.fx * s,
            fy=self.fy * s,
            cx=self.cx * s + (s - 1.0) / 2.0,
            cy=self.cy * s + (s - 1.0) / 2.0,
            width=int(np.floor(self.width * s)),
            height=int(np.floor(self.height * s)),
        )

    def camera_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class SensorExtrinsics:
    """Rigid offset mapping sensor-frame points into the platform frame."""

    offset: Pose

    @staticmethod
    def identity() -> "SensorExtrinsics":
        return SensorExtrinsics(Pose.identity())


def project(
    cam: Intrinsics, points: np.ndarray, bound_slack: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Project points (..., 3) to pixels (..., 2) with a validity mask.

    A projection is invalid when the point is behind a pinhole camera,
    when its depth/range falls outside [depth_min, depth_max], or when
    the pixel lands outside [0, width) x [0, height). Invalidity is a
    value, not an error. `bound_slack` (pixels) loosens only the image
    bounds; counting callers use it to keep exact-boundary round trips.
    """
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    uv = np.zeros(p.shape[:-1] + (2,))
    if cam.model == PINHOLE:
        z = p[..., 2]
        in_front = z > 0.0
        zs = np.where(in_front, z, 1.0)
        uv[..., 0] = cam.fx * p[..., 0] / zs + cam.cx
        uv[..., 1] = cam.fy * p[..., 1] / zs + cam.cy
        d = z
        valid = in_front
    else:
        azimuth = np.arctan2(p[..., 1], p[..., 0])
        elevation = np.arctan2(p[..., 2], np.hypot(p[..., 0], p[..., 1]))
        uv[..., 0] = np.mod(cam.fx * azimuth + cam.cx, cam.width)
        uv[..., 1] = cam.fy * elevation + cam.cy
        d = np.linalg.norm(p, axis=-1)
        valid = np.ones(p.shape[:-1], dtype=bool)
    valid &= (d >= cam.depth_min) & (d <= cam.depth_max)
    valid &= (uv[..., 0] >= -bound_slack) & (uv[..., 0] < cam.width + bound_slack)
    valid &= (uv[..., 1] >= -bound_slack) & (uv[..., 1] < cam.height + bound_slack)
    if single:
        return uv[0], bool(valid[0])
    return uv, valid


def unproject(cam: Intrinsics, uv: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """Inverse projection: pixel(s) plus depth/range back to 3D points.

    Pinhole scales the pixel ray so its z-component equals `depth`;
    spherical scales the unit direction so its norm equals `depth`.
    """
    u = np.asarray(uv, dtype=float)
    d = np.asarray(depth, dtype=float)
    if np.any(d < cam.depth_min) or np.any(d > cam.depth_max):
        raise InvalidDepthError(
            f"depth outside [{cam.depth_min}, {cam.depth_max}]"
        )
    x = (u[..., 0] - cam.cx) / cam.fx
    y = (u[..., 1] - cam.cy) / cam.fy
    if cam.model == PINHOLE:
        return np.stack([x * d, y * d, d], axis=-1)
    azimuth, elevation = x, y
    ce = np.cos(elevation)
    direction = np.stack(
        [ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)], axis=-1
    )
    return direction * d[..., None]


def projective_jacobian_batch(
    cam: Intrinsics, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """d(project)/dp for a batch (..., 3) -> (..., 2, 3) plus validity mask."""
    p = np.asarray(points, dtype=float)
    p = np.atleast_2d(p)
    jac = np.zeros(p.shape[:-1] + (2, 3))
    if cam.model == PINHOLE:
        v = p @ cam.camera_matrix().T
        vz = v[..., 2]
        ok = vz > 0.0
        vz = np.where(ok, vz, 1.0)
        inv_z2 = 1.0 / (vz * vz)
        front = np.zeros(p.shape[:-1] + (2, 3))
        front[..., 0, 0] = vz
        front[..., 0, 2] = -v[..., 0]
        front[..., 1, 1] = vz
        front[..., 1, 2] = -v[..., 1]
        jac = inv_z2[..., None, None] * (front @ cam.camera_matrix())
        return jac, ok
    vx, vy, vz = p[..., 0], p[..., 1], p[..., 2]
    rho2 = vx * vx + vy * vy
    ok = rho2 > 0.0
    rho2 = np.where(ok, rho2, 1.0)
    rho = np.sqrt(rho2)
    r2 = rho2 + vz * vz
    jac[..., 0, 0] = cam.fx * (-vy / rho2)
    jac[..., 0, 1] = cam.fx * (vx / rho2)
    jac[..., 1, 0] = cam.fy * (-vx * vz / (rho * r2))
    jac[..., 1, 1] = cam.fy * (-vy * vz / (rho * r2))
    jac[..., 1, 2] = cam.fy * (rho / r2)
    return jac, ok


def projective_jacobian(cam: Intrinsics, point: np.ndarray) -> np.ndarray:
    """d(project)/dp at a single point; raises on singular configurations."""
    jac, ok = projective_jacobian_batch(cam, np.asarray(point, dtype=float))
    if not ok[0]:
        where = "z <= 0" if cam.model == PINHOLE else "on the optical axis"
        raise SingularJacobianError(f"projection Jacobian singular: point {where}")
    return jac[0]
