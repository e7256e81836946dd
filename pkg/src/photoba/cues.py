"""Five-channel cue images and pyramids.

A cue image stacks intensity, depth/range, and a surface-normal field at
one resolution; a pyramid holds the same view at several scales, coarsest
first. Depth <= 0 marks an invalid pixel; an invalid depth always implies
an invalid normal. Normals are unit length and face the observer.

Image gradients are central differences precomputed per channel. The
1-pixel border carries no gradient and is excluded from sampling, which
also makes the azimuth seam of spherical panoramas behave like a border.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sensors import Intrinsics, unproject


class PyramidConfigError(ValueError):
    """Bad scale list for pyramid construction."""


@dataclass(frozen=True)
class NormalConfig:
    """Plane-fit normal estimation parameters.

    The neighborhood half-width in pixels is k_tau / depth, clamped to
    [radius_min, radius_max] (Chebyshev radius, so windows stay
    rectangular and integral-image friendly).
    """

    k_tau: float = 4.0
    radius_min: float = 2.0
    radius_max: float = 8.0
    min_points: int = 6
    degeneracy_ratio: float = 1e-4


# Neighboring normals must agree within ~26 deg for differencing and
# interpolation to describe one surface.
NORMAL_COHERENCE_MIN_DOT = 0.9


def _neighbor_coherence(normals: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """True where the 4-neighborhood normals all agree with the center."""
    ok = np.zeros(valid.shape, dtype=bool)
    center = normals[1:-1, 1:-1]
    agree = np.ones(center.shape[:2], dtype=bool)
    for shifted in (
        normals[1:-1, 2:],
        normals[1:-1, :-2],
        normals[2:, 1:-1],
        normals[:-2, 1:-1],
    ):
        agree &= np.einsum("rck,rck->rc", center, shifted) >= NORMAL_COHERENCE_MIN_DOT
    ok[1:-1, 1:-1] = agree
    return ok


def _central_gradients(values: np.ndarray, valid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel [d/dcol, d/drow] central differences and their validity.

    A gradient is valid only where the pixel and its four neighbors all
    hold valid values; the border frame never has one.
    """
    grad = np.zeros(values.shape + (2,))
    grad[1:-1, 1:-1, ..., 0] = 0.5 * (values[1:-1, 2:] - values[1:-1, :-2])
    grad[1:-1, 1:-1, ..., 1] = 0.5 * (values[2:, 1:-1] - values[:-2, 1:-1])
    ok = np.zeros(valid.shape, dtype=bool)
    ok[1:-1, 1:-1] = (
        valid[1:-1, 1:-1]
        & valid[1:-1, 2:]
        & valid[1:-1, :-2]
        & valid[2:, 1:-1]
        & valid[:-2, 1:-1]
    )
    grad[~ok] = 0.0
    return grad, ok


@dataclass
class CueImage:
    """One five-channel image: intensity in [0,1], depth in meters, normals.

    Intensity is treated as valid only where depth is (no return means no
    photometry). Validity masks and gradient images are derived eagerly.
    """

    intensity: np.ndarray
    depth: np.ndarray
    normals: np.ndarray
    intrinsics: Intrinsics

    depth_valid: np.ndarray = field(init=False, repr=False)
    normal_valid: np.ndarray = field(init=False, repr=False)
    grad_intensity: np.ndarray = field(init=False, repr=False)
    grad_depth: np.ndarray = field(init=False, repr=False)
    grad_normals: np.ndarray = field(init=False, repr=False)
    sampleable_intensity: np.ndarray = field(init=False, repr=False)
    sampleable_depth: np.ndarray = field(init=False, repr=False)
    sampleable_normals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        h, w = self.intensity.shape
        if self.depth.shape != (h, w) or self.normals.shape != (h, w, 3):
            raise ValueError("cue channel shapes disagree")
        if (self.intrinsics.height, self.intrinsics.width) != (h, w):
            raise ValueError("intrinsics do not match image size")
        cam = self.intrinsics
        depth = np.array(self.depth, dtype=float)
        bad = ~np.isfinite(depth) | (depth < cam.depth_min) | (depth > cam.depth_max)
        depth[bad] = 0.0
        self.depth = depth
        self.depth_valid = depth > 0.0
        normals = np.array(self.normals, dtype=float)
        norms = np.linalg.norm(normals, axis=-1)
        self.normal_valid = (norms > 0.5) & self.depth_valid
        normals[~self.normal_valid] = 0.0
        self.normals = normals
        self.intensity = np.asarray(self.intensity, dtype=float)

        self.grad_intensity, gi_ok = _central_gradients(self.intensity, self.depth_valid)
        self.grad_depth, gd_ok = _central_gradients(self.depth, self.depth_valid)
        # Interpolating or differencing normals across a surface crease
        # blends unrelated orientations, so the normal channel is only
        # sampleable where the neighborhood is coherent.
        coherent = self.normal_valid & _neighbor_coherence(normals, self.normal_valid)
        self.grad_normals, gn_ok = _central_gradients(self.normals, coherent)
        self.sampleable_intensity = gi_ok
        self.sampleable_depth = gd_ok
        self.sampleable_normals = gn_ok
        # Shared across solver threads: freeze everything.
        for name in (
            "intensity", "depth", "normals", "depth_valid", "normal_valid",
            "grad_intensity", "grad_depth", "grad_normals",
            "sampleable_intensity", "sampleable_depth", "sampleable_normals",
        ):
            arr = getattr(self, name)
            if arr.flags.owndata or not arr.flags.writeable:
                arr.flags.writeable = False
            else:
                frozen = arr.copy()
                frozen.flags.writeable = False
                setattr(self, name, frozen)

    @property
    def shape(self) -> tuple[int, int]:
        return self.intensity.shape


@dataclass(frozen=True)
class CuePyramid:
    """Cue images of one view at increasing resolution (coarsest first)."""

    levels: tuple[CueImage, ...]
    scales: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.levels) != len(self.scales):
            raise ValueError("levels and scales disagree")

    def __len__(self) -> int:
        return len(self.levels)


# ---------------------------------------------------------------------------
# normal estimation
# ---------------------------------------------------------------------------


def _window_stats(stats: np.ndarray, rows: np.ndarray, cols: np.ndarray, half: int) -> np.ndarray:
    """Clipped box-window sums of per-pixel statistics via an integral image."""
    h, w = stats.shape[:2]
    ii = np.zeros((h + 1, w + 1) + stats.shape[2:])
    np.cumsum(stats, axis=0, out=ii[1:, 1:])
    np.cumsum(ii[1:, 1:], axis=1, out=ii[1:, 1:])
    r0 = np.clip(rows - half, 0, h)
    r1 = np.clip(rows + half + 1, 0, h)
    c0 = np.clip(cols - half, 0, w)
    c1 = np.clip(cols + half + 1, 0, w)
    return ii[r1, c1] - ii[r0, c1] - ii[r1, c0] + ii[r0, c0]


def estimate_normals(depth: np.ndarray, cam: Intrinsics, cfg: NormalConfig | None = None) -> np.ndarray:
    """Estimate observer-facing unit normals from a depth/range image.

    For each valid pixel, the 3D points unprojected from a depth-dependent
    neighborhood are fit with a least-squares plane (smallest eigenvector
    of the scatter matrix). Pixels with too few valid neighbors, a
    degenerate fit, or a grazing view come out invalid (zero vector).
    """
    cfg = cfg or NormalConfig()
    h, w = depth.shape
    valid = np.isfinite(depth) & (depth >= cam.depth_min) & (depth <= cam.depth_max)
    normals = np.zeros((h, w, 3))
    if not valid.any():
        return normals

    cols_g, rows_g = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    uv = np.stack([cols_g, rows_g], axis=-1)
    points = np.zeros((h, w, 3))
    points[valid] = unproject(cam, uv[valid], depth[valid])

    # Accumulate [x y z xx xy xz yy yz zz count] so any window's scatter
    # matrix comes from one integral-image lookup.
    stats = np.zeros((h, w, 10))
    stats[..., 0:3] = np.where(valid[..., None], points, 0.0)
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    for k, prod in enumerate((x * x, x * y, x * z, y * y, y * z, z * z)):
        stats[..., 3 + k] = np.where(valid, prod, 0.0)
    stats[..., 9] = valid

    radius = np.clip(np.round(cfg.k_tau / np.where(valid, depth, 1.0)), cfg.radius_min, cfg.radius_max)
    radius = radius.astype(int)

    for r in np.unique(radius[valid]):
        sel = valid & (radius == r)
        rows, cols = np.nonzero(sel)
        if rows.size == 0:
            continue
        s = _window_stats(stats, rows, cols, int(r))
        count = s[:, 9]
        enough = count >= cfg.min_points
        if not enough.any():
            continue
        rows, cols, s, count = rows[enough], cols[enough], s[enough], count[enough]
        mean = s[:, 0:3] / count[:, None]
        scatter = np.empty((rows.size, 3, 3))
        scatter[:, 0, 0] = s[:, 3]
        scatter[:, 0, 1] = scatter[:, 1, 0] = s[:, 4]
        scatter[:, 0, 2] = scatter[:, 2, 0] = s[:, 5]
        scatter[:, 1, 1] = s[:, 6]
        scatter[:, 1, 2] = scatter[:, 2, 1] = s[:, 7]
        scatter[:, 2, 2] = s[:, 8]
        scatter -= count[:, None, None] * mean[:, :, None] * mean[:, None, :]
        eigval, eigvec = np.linalg.eigh(scatter)
        n = eigvec[:, :, 0]
        planar = eigval[:, 1] > np.maximum(cfg.degeneracy_ratio * eigval[:, 2], 0.0)
        toward = np.einsum("ij,ij->i", n, points[rows, cols])
        n = np.where(toward[:, None] > 0.0, -n, n)
        ok = planar & (np.abs(toward) > 1e-12) & np.isfinite(n).all(axis=1)
        normals[rows[ok], cols[ok]] = n[ok]
    return normals


# ---------------------------------------------------------------------------
# pyramid construction
# ---------------------------------------------------------------------------


def _footprint_index(h: int, w: int, s: float) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Flat output index per source pixel under u_out = floor(u_src * s)."""
    out_h, out_w = int(np.floor(h * s)), int(np.floor(w * s))
    row_of = np.floor(np.arange(h) * s).astype(int)
    col_of = np.floor(np.arange(w) * s).astype(int)
    keep = (row_of[:, None] < out_h) & (col_of[None, :] < out_w)
    idx = row_of[:, None] * out_w + col_of[None, :]
    return idx, keep, out_h, out_w


def _segment_lower_median(idx: np.ndarray, values: np.ndarray, n_groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower median per group: always an actual member, never a blend."""
    order = np.lexsort((values, idx))
    si, sv = idx[order], values[order]
    starts = np.searchsorted(si, np.arange(n_groups), side="left")
    ends = np.searchsorted(si, np.arange(n_groups), side="right")
    counts = ends - starts
    out = np.zeros(n_groups)
    nonempty = counts > 0
    mid = starts[nonempty] + (counts[nonempty] - 1) // 2
    out[nonempty] = sv[mid]
    return out, counts


def _downscale_cues(
    intensity: np.ndarray,
    depth: np.ndarray,
    normals: np.ndarray,
    depth_ok: np.ndarray,
    normal_ok: np.ndarray,
    s: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h, w = depth.shape
    idx, keep, out_h, out_w = _footprint_index(h, w, s)
    n_out = out_h * out_w
    flat = idx[keep]
    d_ok = depth_ok[keep]
    n_ok = normal_ok[keep]

    # Intensity: average over depth-valid pixels, falling back to a plain
    # average when the footprint holds no valid return.
    ints = intensity[keep]
    sum_valid = np.bincount(flat[d_ok], weights=ints[d_ok], minlength=n_out)
    cnt_valid = np.bincount(flat[d_ok], minlength=n_out)
    sum_all = np.bincount(flat, weights=ints, minlength=n_out)
    cnt_all = np.bincount(flat, minlength=n_out)
    out_i = np.where(
        cnt_valid > 0,
        sum_valid / np.maximum(cnt_valid, 1),
        sum_all / np.maximum(cnt_all, 1),
    )

    # Depth: lower median of the valid footprint values; discontinuities
    # keep a measured value instead of a phantom blend.
    out_d, _ = _segment_lower_median(flat[d_ok], depth[keep][d_ok], n_out)

    # Normals: average the valid ones, renormalize, drop incoherent cells.
    out_n = np.zeros((n_out, 3))
    cnt_n = np.bincount(flat[n_ok], minlength=n_out)
    for k in range(3):
        out_n[:, k] = np.bincount(flat[n_ok], weights=normals[..., k][keep][n_ok], minlength=n_out)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_n = out_n / np.maximum(cnt_n, 1)[:, None]
    norm = np.linalg.norm(mean_n, axis=-1)
    coherent = (cnt_n > 0) & (norm >= 0.5)
    unit = np.zeros_like(mean_n)
    unit[coherent] = mean_n[coherent] / norm[coherent, None]

    return (
        out_i.reshape(out_h, out_w),
        out_d.reshape(out_h, out_w),
        unit.reshape(out_h, out_w, 3),
    )


def build_cue_image(
    intensity: np.ndarray,
    depth: np.ndarray,
    cam: Intrinsics,
    cfg: NormalConfig | None = None,
    normals: np.ndarray | None = None,
) -> CueImage:
    """Full-resolution cue image, estimating normals unless provided."""
    if normals is None:
        normals = estimate_normals(depth, cam, cfg)
    return CueImage(intensity, depth, normals, cam)


def build_pyramid(
    intensity: np.ndarray,
    depth: np.ndarray,
    cam: Intrinsics,
    scales: tuple[float, ...] = (0.125, 0.25, 0.5),
    cfg: NormalConfig | None = None,
) -> CuePyramid:
    """Build a cue pyramid from one intensity/depth pair.

    Normals are estimated once at full resolution; each level then
    downscales the cues per channel (intensity box-averaged, depth
    median-reduced, normals averaged and renormalized) and scales the
    intrinsics accordingly. `scales` runs coarsest to finest, in (0, 1].
    """
    scales = tuple(float(s) for s in scales)
    if not scales:
        raise PyramidConfigError("need at least one pyramid scale")
    if any(not 0.0 < s <= 1.0 for s in scales):
        raise PyramidConfigError(f"scales must lie in (0, 1], got {scales}")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise PyramidConfigError(f"scales must increase toward the finest level, got {scales}")
    if intensity.shape != depth.shape:
        raise ValueError("intensity and depth shapes disagree")

    depth = np.where(np.isfinite(depth), depth, 0.0)
    depth_ok = (depth >= cam.depth_min) & (depth <= cam.depth_max)
    normals = estimate_normals(depth, cam, cfg)
    normal_ok = np.linalg.norm(normals, axis=-1) > 0.5

    levels = []
    for s in scales:
        lvl_i, lvl_d, lvl_n = _downscale_cues(intensity, depth, normals, depth_ok, normal_ok, s)
        levels.append(CueImage(lvl_i, lvl_d, lvl_n, cam.scaled(s)))
    return CuePyramid(tuple(levels), scales)


# ---------------------------------------------------------------------------
# sub-pixel sampling
# ---------------------------------------------------------------------------

_CHANNELS = ("intensity", "depth", "normals")


def _bilinear(arr: np.ndarray, x0, y0, wx, wy) -> np.ndarray:
    v00 = arr[y0, x0]
    v01 = arr[y0, x0 + 1]
    v10 = arr[y0 + 1, x0]
    v11 = arr[y0 + 1, x0 + 1]
    extra = v00.ndim - np.ndim(wx)
    if extra > 0:
        wx = np.reshape(wx, np.shape(wx) + (1,) * extra)
        wy = np.reshape(wy, np.shape(wy) + (1,) * extra)
    return (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) + wy * ((1.0 - wx) * v10 + wx * v11)


def _corner_indices(img: CueImage, uv: np.ndarray):
    h, w = img.shape
    x, y = uv[..., 0], uv[..., 1]
    inside = (x >= 0.0) & (x <= w - 1.0) & (y >= 0.0) & (y <= h - 1.0)
    x0 = np.clip(np.floor(np.where(inside, x, 0.0)).astype(int), 0, w - 2)
    y0 = np.clip(np.floor(np.where(inside, y, 0.0)).astype(int), 0, h - 2)
    wx = np.where(inside, x - x0, 0.0)
    wy = np.where(inside, y - y0, 0.0)
    return inside, x0, y0, wx, wy


def _corners_ok(mask: np.ndarray, x0, y0) -> np.ndarray:
    return mask[y0, x0] & mask[y0, x0 + 1] & mask[y0 + 1, x0] & mask[y0 + 1, x0 + 1]


def sample(img: CueImage, uv: np.ndarray, channel: str):
    """Bilinear value and gradient of one channel at continuous pixels.

    Returns (value, gradient, valid). The gradient interpolates the
    precomputed central-difference images. A lookup is invalid when any
    of its four contributing pixels is invalid or has no gradient.
    """
    if channel not in _CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    u = np.asarray(uv, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    inside, x0, y0, wx, wy = _corner_indices(img, u)
    valid = inside & _corners_ok(getattr(img, "sampleable_" + channel), x0, y0)
    values = _bilinear(getattr(img, channel), x0, y0, wx, wy)
    grads = _bilinear(getattr(img, "grad_" + channel), x0, y0, wx, wy)
    if single:
        return values[0], grads[0], bool(valid[0])
    return values, grads, valid


def sample_cues(img: CueImage, uv: np.ndarray):
    """All five channels at once for the residual machinery.

    Returns values (M,5), gradients (M,5,2), core validity (M,) for the
    intensity+depth channels, and a separate normal-channel validity;
    blocks can keep their scalar cues where normals are unusable.
    """
    u = np.atleast_2d(np.asarray(uv, dtype=float))
    inside, x0, y0, wx, wy = _corner_indices(img, u)
    m = u.shape[0]
    values = np.zeros((m, 5))
    grads = np.zeros((m, 5, 2))
    values[:, 0] = _bilinear(img.intensity, x0, y0, wx, wy)
    values[:, 1] = _bilinear(img.depth, x0, y0, wx, wy)
    values[:, 2:5] = _bilinear(img.normals, x0, y0, wx, wy)
    grads[:, 0] = _bilinear(img.grad_intensity, x0, y0, wx, wy)
    grads[:, 1] = _bilinear(img.grad_depth, x0, y0, wx, wy)
    grads[:, 2:5] = _bilinear(img.grad_normals, x0, y0, wx, wy)
    core_ok = (
        inside
        & _corners_ok(img.sampleable_intensity, x0, y0)
        & _corners_ok(img.sampleable_depth, x0, y0)
    )
    normals_ok = inside & _corners_ok(img.sampleable_normals, x0, y0)
    return values, grads, core_ok, normals_ok
