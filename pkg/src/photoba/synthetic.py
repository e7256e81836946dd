"""Synthetic scenes: ray-cast datasets with exact ground truth.

Scenes are built from planes and axis-aligned boxes with per-surface
albedo, shaded Lambert-style from one declared light direction plus an
ambient floor. Intensity is a pure surface property, so noiseless
renders of the same scene are photo-consistent across viewpoints.
Checker textures (parity of the hit point's world cell) give surfaces
the intensity gradients direct alignment needs.

Rays leave each pixel center; the hit parameter along the unprojected
direction equals z-depth for pinhole sensors and range for spherical
ones. Analytic observer-facing normals are returned for test oracles
and never written to disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset_io import (
    DatasetManifest,
    SensorConfig,
    save_manifest,
    save_trajectory,
    timestamp_name,
    write_depth,
    write_intensity,
)
from .evaluation import Trajectory
from .geometry import Pose, PerturbationVector, exp
from .sensors import Intrinsics, SensorExtrinsics, unproject


class SceneConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Checker:
    """3D checkerboard albedo modulation (hard edges; aliases on purpose)."""

    scale: float = 0.5
    contrast: float = 0.5


@dataclass(frozen=True)
class SineTexture:
    """Band-limited albedo modulation: smooth sums of world-axis sines.

    Alignment test scenes want this one; point sampling of hard edges
    biases photometric minima.
    """

    frequency: tuple[float, float, float] = (2.1, 1.7, 2.9)
    phase: tuple[float, float, float] = (0.4, 1.3, 2.2)
    amplitude: float = 0.45


@dataclass(frozen=True)
class PlaneSurface:
    """Infinite plane {x : normal . x = offset}."""

    normal: tuple[float, float, float]
    offset: float
    albedo: float = 0.8
    texture: Checker | SineTexture | None = None


@dataclass(frozen=True)
class BoxSurface:
    """Axis-aligned box; all six faces are two-sided surfaces."""

    low: tuple[float, float, float]
    high: tuple[float, float, float]
    albedo: float = 0.8
    texture: Checker | SineTexture | None = None


@dataclass
class Scene:
    surfaces: list
    light_direction: tuple[float, float, float] = (0.3, -0.5, -0.8)
    ambient: float = 0.35

    def __post_init__(self) -> None:
        if not self.surfaces:
            raise SceneConfigError("scene needs at least one surface")


@dataclass
class RenderResult:
    """Exact per-pixel rendering plus analytic oracle channels."""

    intensity: np.ndarray
    depth: np.ndarray
    normals: np.ndarray  # analytic, sensor frame, observer-facing
    hit: np.ndarray


def _surface_albedo(surface, points: np.ndarray) -> np.ndarray:
    albedo = np.full(points.shape[:-1], surface.albedo)
    tex = surface.texture
    if isinstance(tex, Checker):
        cells = np.floor(points / tex.scale).astype(np.int64).sum(axis=-1)
        dark = tex.contrast * surface.albedo
        albedo = np.where(cells % 2 == 0, albedo, albedo - dark)
    elif isinstance(tex, SineTexture):
        s = sum(
            np.sin(tex.frequency[k] * points[..., k] + tex.phase[k]) for k in range(3)
        ) / 3.0
        albedo = np.clip(albedo * (1.0 + tex.amplitude * s), 0.05, 1.0)
    return albedo


def _intersect_plane(surface: PlaneSurface, origin: np.ndarray, dirs: np.ndarray):
    n = np.asarray(surface.normal, dtype=float)
    n = n / np.linalg.norm(n)
    denom = dirs @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (surface.offset - origin @ n) / denom
    t = np.where((np.abs(denom) > 1e-12) & (t > 1e-9), t, np.inf)
    normals = np.broadcast_to(n, dirs.shape)
    return t, normals


def _intersect_box(surface: BoxSurface, origin: np.ndarray, dirs: np.ndarray):
    low = np.asarray(surface.low, dtype=float)
    high = np.asarray(surface.high, dtype=float)
    best_t = np.full(dirs.shape[:-1], np.inf)
    best_n = np.zeros(dirs.shape)
    for axis in range(3):
        for value, sign in ((low[axis], -1.0), (high[axis], 1.0)):
            d = dirs[..., axis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (value - origin[axis]) / d
            t = np.where((np.abs(d) > 1e-12) & (t > 1e-9), t, np.inf)
            with np.errstate(invalid="ignore"):
                p = origin + np.where(np.isfinite(t), t, 0.0)[..., None] * dirs
            o1, o2 = (axis + 1) % 3, (axis + 2) % 3
            inside = (
                (p[..., o1] >= low[o1] - 1e-9)
                & (p[..., o1] <= high[o1] + 1e-9)
                & (p[..., o2] >= low[o2] - 1e-9)
                & (p[..., o2] <= high[o2] + 1e-9)
            )
            t = np.where(inside, t, np.inf)
            better = t < best_t
            best_t = np.where(better, t, best_t)
            face_n = np.zeros(3)
            face_n[axis] = sign
            best_n = np.where(better[..., None], face_n, best_n)
    return best_t, best_n


def render_view(scene: Scene, cam: Intrinsics, sensor_pose: Pose) -> RenderResult:
    """Ray-cast one view. Depth semantics follow the sensor model."""
    h, w = cam.height, cam.width
    cols, rows = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    uv = np.stack([cols, rows], axis=-1).reshape(-1, 2)
    # Unit parameterization: t along these directions is z-depth for
    # pinhole (dir_z = 1) and range for spherical (unit norm).
    dirs_sensor = unproject(cam, uv, np.ones(uv.shape[0]))
    dirs_world = dirs_sensor @ sensor_pose.rotation.T
    origin = sensor_pose.translation

    best_t = np.full(uv.shape[0], np.inf)
    best_n = np.zeros((uv.shape[0], 3))
    best_albedo = np.zeros(uv.shape[0])
    for surface in scene.surfaces:
        if isinstance(surface, PlaneSurface):
            t, n = _intersect_plane(surface, origin, dirs_world)
        elif isinstance(surface, BoxSurface):
            t, n = _intersect_box(surface, origin, dirs_world)
        else:
            raise SceneConfigError(f"unknown surface type {type(surface).__name__}")
        better = t < best_t
        if not better.any():
            continue
        points = origin + np.where(np.isfinite(t), t, 0.0)[..., None] * dirs_world
        albedo = _surface_albedo(surface, points)
        best_t = np.where(better, t, best_t)
        best_n = np.where(better[..., None], n, best_n)
        best_albedo = np.where(better, albedo, best_albedo)

    hit = np.isfinite(best_t) & (best_t >= cam.depth_min) & (best_t <= cam.depth_max)
    depth = np.where(hit, best_t, 0.0)

    # Orient normals toward the observer in world space.
    toward = np.einsum("ij,ij->i", best_n, dirs_world)
    best_n = np.where(toward[:, None] > 0.0, -best_n, best_n)

    light = np.asarray(scene.light_direction, dtype=float)
    light = light / np.linalg.norm(light)
    lambert = np.maximum(0.0, -(best_n @ light))
    shade = scene.ambient + (1.0 - scene.ambient) * lambert
    intensity = np.clip(best_albedo * shade, 0.0, 1.0)
    intensity = np.where(hit, intensity, 0.0)

    normals_sensor = best_n @ sensor_pose.rotation
    normals_sensor = np.where(hit[:, None], normals_sensor, 0.0)
    return RenderResult(
        intensity.reshape(h, w),
        depth.reshape(h, w),
        normals_sensor.reshape(h, w, 3),
        hit.reshape(h, w),
    )


# ---------------------------------------------------------------------------
# scene + dataset definitions
# ---------------------------------------------------------------------------


@dataclass
class SyntheticSensor:
    sensor_id: str
    intrinsics: Intrinsics
    extrinsics: SensorExtrinsics = field(default_factory=SensorExtrinsics.identity)
    depth_scale: float = 0.001


def box_room_scene(half: float = 3.0) -> Scene:
    """A closed room with smooth textured walls: the workhorse test scene."""
    return Scene(
        surfaces=[
            BoxSurface(
                low=(-half, -half, -half),
                high=(half, half, half),
                albedo=0.85,
                texture=SineTexture(),
            )
        ]
    )


def perturb_trajectory(
    trajectory: Trajectory, sigma_t: float, sigma_r: float, seed: int, keep_first: bool = True
) -> Trajectory:
    """Pose guesses: ground truth plus seeded Gaussian SE(3) noise."""
    rng = np.random.default_rng(seed)
    poses = []
    for k, pose in enumerate(trajectory.poses):
        if keep_first and k == 0:
            poses.append(pose)
            continue
        dt = rng.normal(0.0, sigma_t, 3)
        # sigma_r is a rotation-angle sigma; dq magnitude is angle/2.
        dq = rng.normal(0.0, sigma_r / 2.0, 3)
        poses.append(pose.compose(exp(PerturbationVector(dt, dq))))
    return Trajectory(trajectory.timestamps.copy(), poses)


def generate_synthetic(
    scene: Scene,
    trajectory: Trajectory,
    sensors: list[SyntheticSensor],
    out_dir: Path,
    pyramid_scales: tuple[float, ...] = (0.125, 0.25, 0.5),
    guess_trajectory: Trajectory | None = None,
) -> Path:
    """Render and write a full dataset directory.

    `trajectory` is the exact platform trajectory (written to
    trajectory_gt.txt); `guess_trajectory` (default: the ground truth)
    becomes the initial-guess trajectory.txt that refinement starts from.
    """
    if not sensors:
        raise SceneConfigError("need at least one sensor")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for sensor in sensors:
        idir = out_dir / sensor.sensor_id / "intensity"
        ddir = out_dir / sensor.sensor_id / "depth"
        idir.mkdir(parents=True, exist_ok=True)
        ddir.mkdir(parents=True, exist_ok=True)
        for ts, pose in zip(trajectory.timestamps, trajectory.poses):
            sensor_pose = pose.compose(sensor.extrinsics.offset)
            render = render_view(scene, sensor.intrinsics, sensor_pose)
            name = timestamp_name(float(ts)) + ".pgm"
            write_intensity(idir / name, render.intensity)
            write_depth(ddir / name, render.depth, sensor.depth_scale)
    manifest = DatasetManifest(
        sensors=[
            SensorConfig(
                sensor_id=s.sensor_id,
                intrinsics=s.intrinsics,
                extrinsics=s.extrinsics,
                depth_scale=s.depth_scale,
                intensity_dir=f"{s.sensor_id}/intensity",
                depth_dir=f"{s.sensor_id}/depth",
            )
            for s in sensors
        ],
        pyramid_scales=pyramid_scales,
    )
    save_manifest(manifest, out_dir / "manifest")
    save_trajectory(guess_trajectory or trajectory, out_dir / "trajectory.txt")
    save_trajectory(trajectory, out_dir / "trajectory_gt.txt")
    return out_dir


# ---------------------------------------------------------------------------
# scene-spec files (for the CLI)
# ---------------------------------------------------------------------------


def _texture_from_dict(d: dict | None):
    if d is None:
        return None
    kind = d.get("kind")
    if kind == "checker":
        return Checker(scale=float(d.get("scale", 0.5)), contrast=float(d.get("contrast", 0.5)))
    if kind == "sine":
        tex = SineTexture()
        return SineTexture(
            frequency=tuple(float(v) for v in d.get("frequency", tex.frequency)),
            phase=tuple(float(v) for v in d.get("phase", tex.phase)),
            amplitude=float(d.get("amplitude", tex.amplitude)),
        )
    raise SceneConfigError(f"unknown texture kind {kind!r}")


def _surface_from_dict(d: dict):
    kind = d.get("type")
    texture = _texture_from_dict(d.get("texture"))
    if kind == "plane":
        return PlaneSurface(
            normal=tuple(float(v) for v in d["normal"]),
            offset=float(d["offset"]),
            albedo=float(d.get("albedo", 0.8)),
            texture=texture,
        )
    if kind == "box":
        return BoxSurface(
            low=tuple(float(v) for v in d["low"]),
            high=tuple(float(v) for v in d["high"]),
            albedo=float(d.get("albedo", 0.8)),
            texture=texture,
        )
    raise SceneConfigError(f"unknown surface type {kind!r}")


def load_scene_spec(path: Path) -> dict:
    """Parse a scene-spec JSON file into scene, sensors, and trajectory.

    Schema documented in docs/formats.md. Returns a dict with keys
    scene, sensors, trajectory, pyramid_scales, perturbation.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneConfigError(f"cannot read scene spec {path}: {exc}") from None
    try:
        scene = Scene(
            surfaces=[_surface_from_dict(s) for s in doc["surfaces"]],
            light_direction=tuple(float(v) for v in doc.get("light_direction", (0.3, -0.5, -0.8))),
            ambient=float(doc.get("ambient", 0.35)),
        )
        sensors = []
        for s in doc["sensors"]:
            intr = s["intrinsics"]
            ext = s.get("extrinsics")
            offset = Pose.identity()
            if ext is not None:
                offset = Pose(
                    np.array(ext["rotation"], dtype=float),
                    np.array(ext["translation"], dtype=float),
                )
            sensors.append(
                SyntheticSensor(
                    sensor_id=str(s["sensor_id"]),
                    intrinsics=Intrinsics(
                        fx=float(intr["fx"]),
                        fy=float(intr["fy"]),
                        cx=float(intr["cx"]),
                        cy=float(intr["cy"]),
                        width=int(intr["width"]),
                        height=int(intr["height"]),
                        model=str(intr["model"]),
                        depth_min=float(intr["depth_min"]),
                        depth_max=float(intr["depth_max"]),
                    ),
                    extrinsics=SensorExtrinsics(offset),
                    depth_scale=float(s.get("depth_scale", 0.001)),
                )
            )
        rows = doc["trajectory"]
        trajectory = Trajectory(
            np.array([float(r[0]) for r in rows]),
            [Pose.from_quat(np.array(r[1:4], dtype=float), np.array(r[4:8], dtype=float)) for r in rows],
        )
        return {
            "scene": scene,
            "sensors": sensors,
            "trajectory": trajectory,
            "pyramid_scales": tuple(float(v) for v in doc.get("pyramid_scales", (0.125, 0.25, 0.5))),
            "perturbation": doc.get("perturbation"),
        }
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise SceneConfigError(f"bad scene spec {path}: {exc}") from None
