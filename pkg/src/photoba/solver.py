"""Multi-cue photometric bundle adjustment over frame poses.

For every matching pair and source pixel, the residual stacks five cues:
intensity, depth/range, and the three normal components. The predicted
value maps the source measurement through the relative transform (depth
by its z-component for pinhole sensors, by the Euclidean norm for
spherical ones; normals by rotation) and is compared against the
destination image sampled at the reprojected pixel.

Jacobians are analytic: a cue-mapping term plus the destination image
gradient chained through the projection and the pose perturbation. With
the Hamilton quaternion convention used by `geometry.exp`, the
rotational blocks carry -2*skew(.) factors; the sign is pinned by the
finite-difference tests, not by transcription.

The solver is Levenberg-Marquardt with per-cue Huber weights, one fixed
gauge pose, occlusion suppression rebuilt every iteration, and a
coarse-to-fine schedule over the cue pyramids. Accumulation order is
fixed by edge index, so results are bit-identical across runs and
worker counts.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cues import CueImage, sample_cues
from .geometry import Pose, PerturbationVector, boxplus
from .graph import MatchGraph
from .sensors import (
    PINHOLE,
    Intrinsics,
    SensorExtrinsics,
    project,
    projective_jacobian_batch,
    unproject,
)


class UnderConstrainedError(RuntimeError):
    """Some poses are not connected to the gauge pose by any edge."""


class FusionConfigError(ValueError):
    """The two sensor problems do not describe the same trajectory."""


COUPLED = "coupled"
CONSECUTIVE = "consecutive"


@dataclass(frozen=True)
class SolverConfig:
    """Robustification, damping, termination, and sampling controls.

    Ordering of `max_iterations_per_level` follows the solved schedule,
    coarsest first; the last entry repeats if there are more levels.
    Occlusion tolerance is quoted at full resolution and grows by the
    inverse level scale on coarser levels.
    """

    huber_delta_intensity: float = 0.1
    huber_delta_depth: float = 0.1
    huber_delta_normal: float = 0.1
    omega_intensity: float = 1.0
    omega_depth: float = 10.0
    omega_normal: tuple[float, float, float] = (1.0, 1.0, 1.0)
    lm_initial_lambda: float = 1e-3
    lm_factor: float = 10.0
    max_iterations_per_level: tuple[int, ...] = (10, 5, 3)
    termination_rel_decrease: float = 1e-4
    occlusion_depth_tolerance: float = 0.05
    pixel_stride: int = 1
    threads: int = 1

    def __post_init__(self) -> None:
        deltas = (self.huber_delta_intensity, self.huber_delta_depth, self.huber_delta_normal)
        omegas = (self.omega_intensity, self.omega_depth) + tuple(self.omega_normal)
        if any(v <= 0.0 for v in deltas + omegas):
            raise ValueError("Huber thresholds and information weights must be positive")
        if not 0.0 < self.termination_rel_decrease < 1.0:
            raise ValueError("termination_rel_decrease must lie in (0, 1)")
        if self.pixel_stride < 1 or any(m < 1 for m in self.max_iterations_per_level):
            raise ValueError("strides and iteration caps must be >= 1")

    def omega_diagonal(self) -> np.ndarray:
        return np.array([self.omega_intensity, self.omega_depth, *self.omega_normal])


@dataclass
class BAProblem:
    """One sensor's matching graph plus its mounting offset and gauge."""

    graph: MatchGraph
    extrinsics: dict[str, SensorExtrinsics] = field(default_factory=dict)
    gauge_index: int = 0

    def extrinsics_of(self, sensor_id: str) -> SensorExtrinsics:
        return self.extrinsics.get(sensor_id, SensorExtrinsics.identity())


@dataclass
class IterationRecord:
    """One LM iteration: state after the accept/reject decision."""

    level: int
    iteration: int
    lam: float
    error: float
    valid_blocks: int
    accepted: bool

    def format_line(self) -> str:
        return (
            f"level={self.level} iter={self.iteration} lambda={self.lam:.3e} "
            f"error={self.error:.9e} blocks={self.valid_blocks} "
            f"accepted={int(self.accepted)}"
        )


@dataclass
class SolveResult:
    poses: list[Pose]
    records: list[IterationRecord]
    level_indices: list[int]
    # One (level, seconds) entry per solved level, in schedule order.
    level_times: list[tuple[int, float]] = field(default_factory=list)

    def iterations_per_level(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for r in self.records:
            counts[r.level] = counts.get(r.level, 0) + 1
        return counts

    def final_error(self) -> float:
        return self.records[-1].error if self.records else float("nan")


def _batch_skew(v: np.ndarray) -> np.ndarray:
    s = np.zeros(v.shape[:-1] + (3, 3))
    s[..., 0, 1] = -v[..., 2]
    s[..., 0, 2] = v[..., 1]
    s[..., 1, 0] = v[..., 2]
    s[..., 1, 2] = -v[..., 0]
    s[..., 2, 0] = -v[..., 1]
    s[..., 2, 1] = v[..., 0]
    return s


def reproject(
    uv: np.ndarray,
    depth: np.ndarray,
    x_i: Pose,
    x_j: Pose,
    ext: SensorExtrinsics,
    cam_src: Intrinsics,
    cam_dst: Intrinsics,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map source pixels with depth into destination pixels.

    Returns (uv_dst, p_bar, valid) where p_bar is the point in the
    destination sensor frame and valid flags projections that land
    inside the destination view.
    """
    p_sensor = unproject(cam_src, np.asarray(uv, dtype=float), np.asarray(depth, dtype=float))
    r_o, t_o = ext.offset.rotation, ext.offset.translation
    p_u = p_sensor @ r_o.T + t_o
    q = p_u @ x_i.rotation.T + (x_i.translation - x_j.translation)
    g = q @ x_j.rotation
    p_bar = (g - t_o) @ r_o
    uv_dst, valid = project(cam_dst, p_bar)
    return uv_dst, p_bar, valid


@dataclass
class PairContext:
    """Static per-pair data: everything that survives pose updates.

    Holds the valid source pixels of one pyramid level, their sensor-
    frame unprojections lifted into the platform frame, and the source
    cue values entering the residuals.
    """

    src: CueImage
    dst: CueImage
    ext: SensorExtrinsics
    pixels: np.ndarray  # (M, 2) integer source pixels as (col, row)
    p_u: np.ndarray  # (M, 3) platform-frame points
    src_intensity: np.ndarray
    src_depth: np.ndarray
    src_normals: np.ndarray
    src_normal_ok: np.ndarray  # normal cue usable at this source pixel

    @staticmethod
    def build(src: CueImage, dst: CueImage, ext: SensorExtrinsics, stride: int = 1) -> "PairContext":
        usable = src.depth_valid[::stride, ::stride]
        h, w = src.shape
        cols, rows = np.meshgrid(
            np.arange(0, w, stride, dtype=float), np.arange(0, h, stride, dtype=float)
        )
        uv = np.stack([cols[usable], rows[usable]], axis=-1)
        sub = (slice(None, None, stride), slice(None, None, stride))
        depths = src.depth[sub][usable]
        p_sensor = unproject(src.intrinsics, uv, depths)
        r_o, t_o = ext.offset.rotation, ext.offset.translation
        return PairContext(
            src=src,
            dst=dst,
            ext=ext,
            pixels=uv,
            p_u=p_sensor @ r_o.T + t_o,
            src_intensity=src.intensity[sub][usable],
            src_depth=depths,
            src_normals=src.normals[sub][usable],
            src_normal_ok=src.normal_valid[sub][usable],
        )

    def evaluate(
        self,
        x_i: Pose,
        x_j: Pose,
        occlusion_tolerance: float | None = None,
        want_jacobians: bool = True,
    ) -> "PairEvaluation":
        """Residuals, validity, occlusion, and optionally Jacobians."""
        r_o, t_o = self.ext.offset.rotation, self.ext.offset.translation
        r_i, t_i = x_i.rotation, x_i.translation
        r_j, t_j = x_j.rotation, x_j.translation
        spherical = self.dst.intrinsics.model != PINHOLE

        g = (self.p_u @ r_i.T + (t_i - t_j)) @ r_j  # R_j^T (R_i p_u + t_i - t_j)
        p_bar = (g - t_o) @ r_o
        uv_dst, ok_proj = project(self.dst.intrinsics, p_bar)
        values, grads, core_ok, normals_ok = sample_cues(self.dst, uv_dst)

        zeta_d = np.linalg.norm(p_bar, axis=-1) if spherical else p_bar[:, 2]
        rot_n = r_o.T @ r_j.T @ r_i @ r_o
        mapped_n = self.src_normals @ rot_n.T

        m = self.pixels.shape[0]
        residuals = np.zeros((m, 5))
        residuals[:, 0] = self.src_intensity - values[:, 0]
        residuals[:, 1] = zeta_d - values[:, 1]
        residuals[:, 2:5] = mapped_n - values[:, 2:5]
        # The normal cue drops out of blocks where either end cannot
        # provide a usable normal; the scalar cues stay.
        normal_on = normals_ok & self.src_normal_ok
        residuals[~normal_on, 2:5] = 0.0

        occluded = np.zeros(m, dtype=bool)
        if occlusion_tolerance is not None:
            # Only a measured destination depth can veto a block.
            occluded = ok_proj & core_ok & ((zeta_d - values[:, 1]) > occlusion_tolerance)
        valid = ok_proj & core_ok & ~occluded

        j_i = j_j = None
        if want_jacobians:
            proj_jac, ok_jac = projective_jacobian_batch(self.dst.intrinsics, p_bar)
            valid = valid & ok_jac

            m_i = r_o.T @ r_j.T @ r_i
            a_i = np.empty((m, 3, 6))
            a_i[:, :, :3] = m_i
            a_i[:, :, 3:] = np.einsum("ab,mbc->mac", m_i, -2.0 * _batch_skew(self.p_u))
            a_j = np.empty((m, 3, 6))
            a_j[:, :, :3] = -r_o.T
            a_j[:, :, 3:] = np.einsum("ab,mbc->mac", r_o.T, 2.0 * _batch_skew(g))

            # Destination-image term, shared by every cue.
            img_i = np.einsum("mcp,mpk,mkn->mcn", grads, proj_jac, a_i)
            img_j = np.einsum("mcp,mpk,mkn->mcn", grads, proj_jac, a_j)

            j_i = -img_i
            j_j = -img_j
            if spherical:
                with np.errstate(invalid="ignore", divide="ignore"):
                    unit = p_bar / np.where(zeta_d > 0.0, zeta_d, 1.0)[:, None]
                j_i[:, 1, :] += np.einsum("mk,mkn->mn", unit, a_i)
                j_j[:, 1, :] += np.einsum("mk,mkn->mn", unit, a_j)
            else:
                j_i[:, 1, :] += a_i[:, 2, :]
                j_j[:, 1, :] += a_j[:, 2, :]
            n_src = self.src_normals @ r_o.T  # R_o n_u
            j_i[:, 2:5, 3:] += np.einsum("ab,mbc->mac", m_i, -2.0 * _batch_skew(n_src))
            j_j[:, 2:5, 3:] += np.einsum(
                "ab,mbc->mac", r_o.T, 2.0 * _batch_skew(n_src @ r_i.T @ r_j)
            )
            j_i[~normal_on, 2:5, :] = 0.0
            j_j[~normal_on, 2:5, :] = 0.0

        return PairEvaluation(
            uv_dst=uv_dst,
            p_bar=p_bar,
            residuals=residuals,
            valid=valid,
            occluded=occluded,
            j_i=j_i,
            j_j=j_j,
        )


@dataclass
class PairEvaluation:
    uv_dst: np.ndarray
    p_bar: np.ndarray
    residuals: np.ndarray  # (M, 5)
    valid: np.ndarray  # (M,)
    occluded: np.ndarray
    j_i: np.ndarray | None
    j_j: np.ndarray | None


def robust_cue_weights(
    residuals: np.ndarray, cfg: SolverConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cue Huber weights (M, 3) and loss values (M, 3).

    Each cue's information-weighted sub-norm is robustified on its own:
    weight 1 below the cue's threshold, delta/norm above it.
    """
    omega = cfg.omega_diagonal()
    e2 = residuals * residuals * omega
    norms = np.stack(
        [np.sqrt(e2[:, 0]), np.sqrt(e2[:, 1]), np.sqrt(e2[:, 2:5].sum(axis=1))], axis=1
    )
    deltas = np.array(
        [cfg.huber_delta_intensity, cfg.huber_delta_depth, cfg.huber_delta_normal]
    )
    small = norms <= deltas
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.where(small, 1.0, deltas / np.where(norms > 0.0, norms, 1.0))
    losses = np.where(small, norms * norms, deltas * (2.0 * norms - deltas))
    return weights, losses


_CUE_OF_CHANNEL = np.array([0, 1, 2, 2, 2])  # intensity, depth, nx, ny, nz


@dataclass
class _EdgeTerm:
    i: int
    j: int
    cost: float
    count: int
    h_ii: np.ndarray | None = None
    h_jj: np.ndarray | None = None
    h_ij: np.ndarray | None = None
    b_i: np.ndarray | None = None
    b_j: np.ndarray | None = None


def _edge_term(
    ctx: PairContext,
    i: int,
    j: int,
    x_i: Pose,
    x_j: Pose,
    cfg: SolverConfig,
    occlusion_tolerance: float,
    want_jacobians: bool,
) -> _EdgeTerm:
    ev = ctx.evaluate(x_i, x_j, occlusion_tolerance, want_jacobians)
    sel = ev.valid
    count = int(sel.sum())
    if count == 0:
        zero = np.zeros((6, 6))
        return _EdgeTerm(i, j, 0.0, 0, zero, zero.copy(), zero.copy(), np.zeros(6), np.zeros(6))
    e = ev.residuals[sel]
    weights, losses = robust_cue_weights(e, cfg)
    cost = float(losses.sum())
    if not want_jacobians:
        return _EdgeTerm(i, j, cost, count)
    ww = weights[:, _CUE_OF_CHANNEL] * cfg.omega_diagonal()
    j_i = ev.j_i[sel]
    j_j = ev.j_j[sel]
    return _EdgeTerm(
        i,
        j,
        cost,
        count,
        h_ii=np.einsum("mca,mc,mcb->ab", j_i, ww, j_i),
        h_jj=np.einsum("mca,mc,mcb->ab", j_j, ww, j_j),
        h_ij=np.einsum("mca,mc,mcb->ab", j_i, ww, j_j),
        b_i=np.einsum("mca,mc->a", j_i, ww * e),
        b_j=np.einsum("mca,mc->a", j_j, ww * e),
    )


class _LevelProblem:
    """All edge contexts of one pyramid level across one or more sensors."""

    def __init__(self, problems: list[BAProblem], level: int, cfg: SolverConfig):
        self.cfg = cfg
        self.n_poses = len(problems[0].graph.nodes)
        self.gauge = problems[0].gauge_index
        self.contexts: list[tuple[int, int, PairContext, float]] = []
        for problem in problems:
            nodes = problem.graph.nodes
            index_of = {n.id: k for k, n in enumerate(nodes)}
            for edge in problem.graph.edges:
                ni, nj = nodes[index_of[edge.i]], nodes[index_of[edge.j]]
                if ni.sensor_id != nj.sensor_id:
                    raise FusionConfigError("edges must connect frames of one sensor")
                ext = problem.extrinsics_of(ni.sensor_id)
                scale = ni.pyramid.scales[level]
                tol = cfg.occlusion_depth_tolerance / scale
                ctx = PairContext.build(
                    ni.pyramid.levels[level], nj.pyramid.levels[level], ext, cfg.pixel_stride
                )
                self.contexts.append((index_of[edge.i], index_of[edge.j], ctx, tol))

    def evaluate(self, poses: list[Pose], want_jacobians: bool, pool: ThreadPoolExecutor | None):
        cfg = self.cfg

        def term(entry):
            i, j, ctx, tol = entry
            return _edge_term(ctx, i, j, poses[i], poses[j], cfg, tol, want_jacobians)

        if pool is not None:
            terms = list(pool.map(term, self.contexts))
        else:
            terms = [term(entry) for entry in self.contexts]

        total = sum(t.cost for t in terms)
        count = sum(t.count for t in terms)
        if not want_jacobians:
            return total, count, None, None

        slot = {k: 6 * s for s, k in enumerate(p for p in range(self.n_poses) if p != self.gauge)}
        dim = 6 * (self.n_poses - 1)
        h = np.zeros((dim, dim))
        b = np.zeros(dim)
        for t in terms:  # fixed edge order keeps accumulation deterministic
            si = slot.get(t.i)
            sj = slot.get(t.j)
            if si is not None:
                h[si : si + 6, si : si + 6] += t.h_ii
                b[si : si + 6] += t.b_i
            if sj is not None:
                h[sj : sj + 6, sj : sj + 6] += t.h_jj
                b[sj : sj + 6] += t.b_j
            if si is not None and sj is not None:
                h[si : si + 6, sj : sj + 6] += t.h_ij
                h[sj : sj + 6, si : si + 6] += t.h_ij.T
        return total, count, h, b

    def apply_step(self, poses: list[Pose], delta: np.ndarray) -> list[Pose]:
        updated = list(poses)
        s = 0
        for k in range(self.n_poses):
            if k == self.gauge:
                continue
            v = PerturbationVector.from_vector(delta[s : s + 6])
            updated[k] = boxplus(poses[k], v)
            s += 6
        return updated


def check_connectivity(problems: list[BAProblem]) -> None:
    """Every pose must reach the gauge through edges of some problem."""
    n = len(problems[0].graph.nodes)
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for problem in problems:
        index_of = {node.id: k for k, node in enumerate(problem.graph.nodes)}
        for edge in problem.graph.edges:
            ra, rb = find(index_of[edge.i]), find(index_of[edge.j])
            if ra != rb:
                parent[ra] = rb
    gauge_root = find(problems[0].gauge_index)
    stranded = sorted(k for k in range(n) if find(k) != gauge_root)
    if stranded:
        raise UnderConstrainedError(
            f"poses {stranded} are not connected to gauge pose "
            f"{problems[0].gauge_index}; the problem is under-constrained"
        )


_LAMBDA_CEILING = 1e12
# Mean robustified block error below this is floating-point noise; a
# level starting there is already at its optimum.
_COST_FLOOR_PER_BLOCK = 1e-18


def _solve_level_multi(
    problems: list[BAProblem],
    poses: list[Pose],
    level: int,
    cfg: SolverConfig,
    max_iterations: int,
    pool: ThreadPoolExecutor | None,
) -> tuple[list[Pose], list[IterationRecord]]:
    lp = _LevelProblem(problems, level, cfg)
    records: list[IterationRecord] = []
    cost, count, h, b = lp.evaluate(poses, True, pool)
    lam = cfg.lm_initial_lambda
    for iteration in range(1, max_iterations + 1):
        if cost <= _COST_FLOOR_PER_BLOCK * max(count, 1):
            break
        damped = h + lam * np.diag(np.diag(h))
        try:
            delta = np.linalg.solve(damped, -b)
        except np.linalg.LinAlgError:
            if iteration == 1:
                raise UnderConstrainedError(
                    "normal equations are singular; some pose has no valid observations"
                ) from None
            lam *= cfg.lm_factor
            records.append(IterationRecord(level, iteration, lam, cost, count, False))
            if lam > _LAMBDA_CEILING:
                break
            continue
        candidate = lp.apply_step(poses, delta)
        new_cost, new_count, new_h, new_b = lp.evaluate(candidate, True, pool)
        rel_change = abs(cost - new_cost) / max(cost, 1e-300)
        # A step that empties the residual set trivially zeroes the cost;
        # never accept it.
        if new_cost < cost and new_count > 0:
            poses, cost, count, h, b = candidate, new_cost, new_count, new_h, new_b
            lam = max(lam * 0.5, 1e-12)
            accepted = True
        else:
            lam *= cfg.lm_factor
            accepted = False
        records.append(IterationRecord(level, iteration, lam, cost, count, accepted))
        if rel_change < cfg.termination_rel_decrease or lam > _LAMBDA_CEILING:
            break
    return poses, records


def _level_caps(cfg: SolverConfig, n_levels: int) -> list[int]:
    caps = list(cfg.max_iterations_per_level)
    while len(caps) < n_levels:
        caps.append(caps[-1])
    return caps[:n_levels]


def _shared_level_count(problems: list[BAProblem]) -> int:
    counts = {len(n.pyramid) for p in problems for n in p.graph.nodes}
    if len(counts) != 1:
        raise ValueError(f"pyramids must share their level count, found {sorted(counts)}")
    return counts.pop()


def solve_level(
    problem: BAProblem,
    poses: list[Pose],
    level: int,
    cfg: SolverConfig | None = None,
    max_iterations: int | None = None,
) -> tuple[list[Pose], list[IterationRecord]]:
    """Levenberg-Marquardt on one pyramid level, gauge pose held fixed."""
    cfg = cfg or SolverConfig()
    check_connectivity([problem])
    cap = max_iterations or _level_caps(cfg, level + 1)[level]
    with _optional_pool(cfg.threads) as pool:
        return _solve_level_multi([problem], poses, level, cfg, cap, pool)


class _optional_pool:
    def __init__(self, threads: int):
        self.threads = threads
        self.pool: ThreadPoolExecutor | None = None

    def __enter__(self) -> ThreadPoolExecutor | None:
        if self.threads > 1:
            self.pool = ThreadPoolExecutor(max_workers=self.threads)
        return self.pool

    def __exit__(self, *exc) -> None:
        if self.pool is not None:
            self.pool.shutdown()


def _hierarchical(
    problems: list[BAProblem],
    cfg: SolverConfig,
    initial: list[Pose] | None,
    levels: list[int] | None,
) -> SolveResult:
    check_connectivity(problems)
    n_levels = _shared_level_count(problems)
    schedule = list(range(n_levels)) if levels is None else list(levels)
    if not schedule or any(not 0 <= k < n_levels for k in schedule):
        raise ValueError(f"invalid level schedule {schedule} for {n_levels} levels")
    poses = list(initial) if initial is not None else [n.pose_guess for n in problems[0].graph.nodes]
    caps = _level_caps(cfg, len(schedule))
    records: list[IterationRecord] = []
    level_times: list[tuple[int, float]] = []
    with _optional_pool(cfg.threads) as pool:
        for pos, level in enumerate(schedule):
            t0 = time.perf_counter()
            poses, recs = _solve_level_multi(problems, poses, level, cfg, caps[pos], pool)
            level_times.append((level, time.perf_counter() - t0))
            records.extend(recs)
    return SolveResult(poses, records, schedule, level_times)


def solve_hierarchical(
    problem: BAProblem,
    cfg: SolverConfig | None = None,
    initial: list[Pose] | None = None,
    levels: list[int] | None = None,
) -> SolveResult:
    """Coarse-to-fine solve, threading pose estimates through the levels."""
    return _hierarchical([problem], cfg or SolverConfig(), initial, levels)


def solve_fusion(
    problem_a: BAProblem,
    problem_b: BAProblem,
    mode: str = COUPLED,
    cfg: SolverConfig | None = None,
    initial: list[Pose] | None = None,
    levels: list[int] | None = None,
) -> SolveResult:
    """Two-sensor refinement over one shared platform trajectory.

    `coupled` minimizes the summed objective in a single hierarchical
    run; `consecutive` solves problem_a fully and seeds problem_b with
    the result (pass the wide-basin sensor first).
    """
    cfg = cfg or SolverConfig()
    if len(problem_a.graph.nodes) != len(problem_b.graph.nodes):
        raise FusionConfigError(
            f"trajectory lengths disagree: {len(problem_a.graph.nodes)} vs "
            f"{len(problem_b.graph.nodes)}"
        )
    if problem_a.gauge_index != problem_b.gauge_index:
        raise FusionConfigError("fusion problems must share the gauge pose")
    if mode == COUPLED:
        return _hierarchical([problem_a, problem_b], cfg, initial, levels)
    if mode == CONSECUTIVE:
        first = _hierarchical([problem_a], cfg, initial, levels)
        second = _hierarchical([problem_b], cfg, first.poses, levels)
        return SolveResult(
            second.poses,
            first.records + second.records,
            second.level_indices,
            first.level_times + second.level_times,
        )
    raise ValueError(f"unknown fusion mode {mode!r}")


def total_error(
    problem: BAProblem,
    poses: list[Pose] | None = None,
    level: int = 0,
    cfg: SolverConfig | None = None,
    suppress_occlusions: bool = True,
) -> tuple[float, int]:
    """Robustified objective value and valid-block count at given poses."""
    cfg = cfg or SolverConfig()
    if poses is None:
        poses = [n.pose_guess for n in problem.graph.nodes]
    lp = _LevelProblem([problem], level, cfg)
    if not suppress_occlusions:
        lp.contexts = [(i, j, ctx, np.inf) for i, j, ctx, _ in lp.contexts]
    cost, count, _, _ = lp.evaluate(poses, False, None)
    return cost, count
