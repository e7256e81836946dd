"""Trajectory accuracy: timestamp association, rigid alignment, ATE RMSE.

The headline metric is the RMSE of translational differences between
matched poses after a closed-form SE(3) alignment (no scale); rotation
error is reported as auxiliary output only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose, rotation_angle


class NoAssociationError(RuntimeError):
    """No trajectory pairs matched within the timestamp window."""


class DegenerateAlignmentError(RuntimeError):
    """Alignment point set is collinear or coincident."""


@dataclass
class Trajectory:
    """Timestamped poses with strictly increasing timestamps."""

    timestamps: np.ndarray
    poses: list[Pose]

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        if len(self.timestamps) != len(self.poses):
            raise ValueError("timestamps and poses disagree in length")
        if len(self.timestamps) == 0:
            raise ValueError("trajectory must hold at least one pose")
        if np.any(np.diff(self.timestamps) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.poses)

    def translations(self) -> np.ndarray:
        return np.stack([p.translation for p in self.poses])


def associate(est: Trajectory, ref: Trajectory, max_dt: float = 0.02) -> list[tuple[int, int]]:
    """Greedy one-to-one nearest-timestamp matching.

    Candidate pairs are taken best-first by |dt|; each pose on either
    side is used at most once and pairs beyond max_dt are dropped.
    """
    dts = np.abs(est.timestamps[:, None] - ref.timestamps[None, :])
    ii, jj = np.nonzero(dts <= max_dt)
    order = np.lexsort((jj, ii, dts[ii, jj]))
    used_est: set[int] = set()
    used_ref: set[int] = set()
    pairs: list[tuple[int, int]] = []
    for k in order:
        i, j = int(ii[k]), int(jj[k])
        if i in used_est or j in used_ref:
            continue
        used_est.add(i)
        used_ref.add(j)
        pairs.append((i, j))
    if not pairs:
        raise NoAssociationError(
            f"no pose pairs within {max_dt} s between trajectories of "
            f"{len(est)} and {len(ref)} poses"
        )
    return sorted(pairs)


def horn_align(est_points: np.ndarray, ref_points: np.ndarray) -> Pose:
    """Closed-form rigid transform minimizing sum ||ref - (R est + t)||^2."""
    est = np.asarray(est_points, dtype=float)
    ref = np.asarray(ref_points, dtype=float)
    if est.shape != ref.shape or est.ndim != 2 or est.shape[1] != 3:
        raise ValueError("expected matching (N, 3) point arrays")
    if est.shape[0] < 3:
        raise DegenerateAlignmentError("need at least 3 point pairs")
    mu_e = est.mean(axis=0)
    mu_r = ref.mean(axis=0)
    cov = (ref - mu_r).T @ (est - mu_e)
    u, s, vt = np.linalg.svd(cov)
    spread = np.linalg.svd(est - mu_e, compute_uv=False)
    if spread[1] < 1e-9 * max(spread[0], 1.0):
        raise DegenerateAlignmentError("alignment points are collinear or coincident")
    d = np.sign(np.linalg.det(u @ vt))
    rotation = u @ np.diag([1.0, 1.0, d]) @ vt
    return Pose(rotation, mu_r - rotation @ mu_e)


@dataclass
class AteReport:
    rmse: float
    rotation_rmse: float  # auxiliary, radians
    matches: int
    alignment: Pose


def evaluate_ate(est: Trajectory, ref: Trajectory, max_dt: float = 0.02) -> AteReport:
    """Associate, align, and compute the ATE report."""
    pairs = associate(est, ref, max_dt)
    e_idx = [i for i, _ in pairs]
    r_idx = [j for _, j in pairs]
    est_t = est.translations()[e_idx]
    ref_t = ref.translations()[r_idx]
    g = horn_align(est_t, ref_t)
    aligned = est_t @ g.rotation.T + g.translation
    rmse = float(np.sqrt(np.mean(np.sum((ref_t - aligned) ** 2, axis=1))))
    rot_errors = [
        rotation_angle(ref.poses[j].rotation.T @ g.rotation @ est.poses[i].rotation)
        for i, j in pairs
    ]
    return AteReport(rmse, float(np.sqrt(np.mean(np.square(rot_errors)))), len(pairs), g)


def ate_rmse(est: Trajectory, ref: Trajectory, max_dt: float = 0.02) -> float:
    """Translation RMSE after association and rigid alignment, in meters."""
    return evaluate_ate(est, ref, max_dt).rmse
