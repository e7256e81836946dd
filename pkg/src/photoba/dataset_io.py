"""On-disk formats: manifest, raster images, trajectories, dataset loading.

Layout of a dataset directory:

    manifest                      JSON, schema in docs/formats.md
    trajectory.txt                initial-guess trajectory
    <sensor_id>/intensity/<timestamp>.pgm
    <sensor_id>/depth/<timestamp>.pgm

Rasters are binary PGM (P5): single channel, 8- or 16-bit, big-endian,
bit-exact and diffable. Depth files are 16-bit with raw value 0 marking
an invalid pixel and meters = raw * depth_scale. Trajectory lines are
`timestamp tx ty tz qx qy qz qw` (quaternion real part last), `#` for
comments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cues import NormalConfig, build_pyramid
from .evaluation import Trajectory
from .geometry import Pose
from .graph import FrameNode
from .sensors import Intrinsics, SensorExtrinsics


class DatasetError(RuntimeError):
    """Base class for dataset loading/saving problems."""


class ManifestError(DatasetError):
    pass


class MissingFileError(DatasetError):
    pass


class DimensionMismatchError(DatasetError):
    pass


class TrajectoryFormatError(DatasetError):
    pass


# ---------------------------------------------------------------------------
# raster files
# ---------------------------------------------------------------------------


def write_raster(path: Path, values: np.ndarray) -> None:
    """Write a uint8 or uint16 grid as binary PGM (16-bit big-endian)."""
    path = Path(path)
    if values.dtype == np.uint8:
        maxval = 255
        payload = values.tobytes()
    elif values.dtype == np.uint16:
        maxval = 65535
        payload = values.astype(">u2").tobytes()
    else:
        raise ValueError(f"raster dtype must be uint8 or uint16, got {values.dtype}")
    h, w = values.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        f.write(payload)


def read_raster(path: Path) -> np.ndarray:
    """Read a binary PGM written by write_raster (or any plain P5 file)."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"raster file not found: {path}")
    data = path.read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P5":
        raise DatasetError(f"{path}: not a binary PGM file")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    expected = w * h * dtype.itemsize
    raw = data[pos : pos + expected]
    if len(raw) != expected:
        raise DatasetError(f"{path}: truncated raster payload")
    return np.frombuffer(raw, dtype=dtype).reshape(h, w).astype(
        np.uint16 if maxval > 255 else np.uint8
    )


def write_intensity(path: Path, intensity: np.ndarray) -> None:
    """Store [0,1] intensity as 16-bit raster."""
    scaled = np.clip(np.round(intensity * 65535.0), 0, 65535).astype(np.uint16)
    write_raster(path, scaled)


def read_intensity(path: Path) -> np.ndarray:
    raw = read_raster(path)
    scale = 255.0 if raw.dtype == np.uint8 else 65535.0
    return raw.astype(float) / scale


def write_depth(path: Path, meters: np.ndarray, depth_scale: float) -> None:
    """Store depth in meters as 16-bit raster; raw 0 = invalid."""
    raw = np.zeros(meters.shape, dtype=np.uint16)
    valid = np.isfinite(meters) & (meters > 0.0)
    raw[valid] = np.clip(np.round(meters[valid] / depth_scale), 1, 65535).astype(np.uint16)
    write_raster(path, raw)


def read_depth(path: Path, depth_scale: float) -> np.ndarray:
    raw = read_raster(path)
    if raw.dtype != np.uint16:
        raise DatasetError(f"{path}: depth rasters must be 16-bit")
    return raw.astype(float) * depth_scale


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def save_trajectory(traj: Trajectory, path: Path) -> None:
    path = Path(path)
    lines = ["# timestamp tx ty tz qx qy qz qw\n"]
    for ts, pose in zip(traj.timestamps, traj.poses):
        q = pose.quat()
        t = pose.translation
        lines.append(
            f"{ts:.6f} {t[0]:.9f} {t[1]:.9f} {t[2]:.9f} "
            f"{q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f}\n"
        )
    path.write_text("".join(lines))


def load_trajectory(path: Path) -> Trajectory:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"trajectory file not found: {path}")
    timestamps: list[float] = []
    poses: list[Pose] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise TrajectoryFormatError(
                f"{path}:{lineno}: expected 8 fields 'ts tx ty tz qx qy qz qw', got {len(parts)}"
            )
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise TrajectoryFormatError(f"{path}:{lineno}: {exc}") from None
        timestamps.append(values[0])
        poses.append(Pose.from_quat(np.array(values[1:4]), np.array(values[4:8])))
    if not timestamps:
        raise TrajectoryFormatError(f"{path}: no poses found")
    try:
        return Trajectory(np.array(timestamps), poses)
    except ValueError as exc:
        raise TrajectoryFormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


@dataclass
class SensorConfig:
    """One sensor's entry in the dataset manifest."""

    sensor_id: str
    intrinsics: Intrinsics
    extrinsics: SensorExtrinsics
    depth_scale: float
    intensity_dir: str
    depth_dir: str

    def __post_init__(self) -> None:
        if self.depth_scale <= 0.0:
            raise ManifestError(f"sensor {self.sensor_id}: depth_scale must be positive")


@dataclass
class DatasetManifest:
    sensors: list[SensorConfig]
    trajectory_file: str = "trajectory.txt"
    pyramid_scales: tuple[float, ...] = (0.125, 0.25, 0.5)
    solver_overrides: dict = field(default_factory=dict)


def _intrinsics_to_dict(k: Intrinsics) -> dict:
    return {
        "model": k.model,
        "fx": k.fx,
        "fy": k.fy,
        "cx": k.cx,
        "cy": k.cy,
        "width": k.width,
        "height": k.height,
        "depth_min": k.depth_min,
        "depth_max": k.depth_max,
    }


def _intrinsics_from_dict(d: dict) -> Intrinsics:
    return Intrinsics(
        fx=float(d["fx"]),
        fy=float(d["fy"]),
        cx=float(d["cx"]),
        cy=float(d["cy"]),
        width=int(d["width"]),
        height=int(d["height"]),
        model=str(d["model"]),
        depth_min=float(d["depth_min"]),
        depth_max=float(d["depth_max"]),
    )


def save_manifest(manifest: DatasetManifest, path: Path) -> None:
    doc = {
        "sensors": [
            {
                "sensor_id": s.sensor_id,
                "intrinsics": _intrinsics_to_dict(s.intrinsics),
                "extrinsics": {
                    "rotation": s.extrinsics.offset.rotation.tolist(),
                    "translation": s.extrinsics.offset.translation.tolist(),
                },
                "depth_scale": s.depth_scale,
                "intensity_dir": s.intensity_dir,
                "depth_dir": s.depth_dir,
            }
            for s in manifest.sensors
        ],
        "trajectory": manifest.trajectory_file,
        "pyramid_scales": list(manifest.pyramid_scales),
        "solver": manifest.solver_overrides,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_manifest(path: Path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from None
    try:
        sensors = [
            SensorConfig(
                sensor_id=str(s["sensor_id"]),
                intrinsics=_intrinsics_from_dict(s["intrinsics"]),
                extrinsics=SensorExtrinsics(
                    Pose(
                        np.array(s["extrinsics"]["rotation"], dtype=float),
                        np.array(s["extrinsics"]["translation"], dtype=float),
                    )
                ),
                depth_scale=float(s["depth_scale"]),
                intensity_dir=str(s["intensity_dir"]),
                depth_dir=str(s["depth_dir"]),
            )
            for s in doc["sensors"]
        ]
        return DatasetManifest(
            sensors=sensors,
            trajectory_file=str(doc.get("trajectory", "trajectory.txt")),
            pyramid_scales=tuple(float(s) for s in doc.get("pyramid_scales", (0.125, 0.25, 0.5))),
            solver_overrides=dict(doc.get("solver", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{path}: bad manifest entry: {exc}") from None


# ---------------------------------------------------------------------------
# dataset loading
# ---------------------------------------------------------------------------


def timestamp_name(ts: float) -> str:
    return f"{ts:.6f}"


def load_dataset(
    dataset_dir: Path,
    scales: tuple[float, ...] | None = None,
    normal_cfg: NormalConfig | None = None,
) -> tuple[DatasetManifest, Trajectory, dict[str, list[FrameNode]]]:
    """Load a dataset directory into per-sensor frame lists.

    Every trajectory row must have an intensity and a depth raster per
    sensor (named by timestamp); pyramids are built on load.
    """
    dataset_dir = Path(dataset_dir)
    manifest = load_manifest(dataset_dir / "manifest")
    trajectory = load_trajectory(dataset_dir / manifest.trajectory_file)
    use_scales = scales or manifest.pyramid_scales
    frames: dict[str, list[FrameNode]] = {}
    for sensor in manifest.sensors:
        nodes: list[FrameNode] = []
        for k, (ts, pose) in enumerate(zip(trajectory.timestamps, trajectory.poses)):
            name = timestamp_name(ts) + ".pgm"
            ipath = dataset_dir / sensor.intensity_dir / name
            dpath = dataset_dir / sensor.depth_dir / name
            if not ipath.exists():
                raise MissingFileError(f"sensor {sensor.sensor_id}: missing intensity image {ipath}")
            if not dpath.exists():
                raise MissingFileError(f"sensor {sensor.sensor_id}: missing depth image {dpath}")
            intensity = read_intensity(ipath)
            depth = read_depth(dpath, sensor.depth_scale)
            k_int = sensor.intrinsics
            if intensity.shape != (k_int.height, k_int.width) or depth.shape != intensity.shape:
                raise DimensionMismatchError(
                    f"sensor {sensor.sensor_id} frame {timestamp_name(ts)}: image size "
                    f"{intensity.shape} does not match intrinsics "
                    f"({k_int.height}, {k_int.width})"
                )
            pyramid = build_pyramid(intensity, depth, k_int, use_scales, normal_cfg)
            nodes.append(FrameNode(k, pose, pyramid, float(ts), sensor.sensor_id))
        frames[sensor.sensor_id] = nodes
    return manifest, trajectory, frames


def trajectory_from_poses(timestamps, poses: list[Pose]) -> Trajectory:
    return Trajectory(np.asarray(timestamps, dtype=float), list(poses))
