"""Match-graph construction: which frame pairs enter the optimization.

A pair of posed frames becomes a covisibility edge when their guessed
poses are close in angle and translation and enough of one frame's valid
pixels reproject into the other (checked in both directions). Frames
from a sequential acquisition additionally get consecutive odometry
edges regardless of geometry.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cues import CuePyramid
from .geometry import Pose, rotation_angle
from .sensors import SensorExtrinsics, project, unproject

COVISIBILITY = "covisibility"
ODOMETRY = "odometry"


class GraphConfigError(ValueError):
    """Match graph cannot be built from this node set."""


@dataclass
class FrameNode:
    """One frame: initial pose guess plus its cue pyramid."""

    id: int
    pose_guess: Pose
    pyramid: CuePyramid
    timestamp: float
    sensor_id: str = "sensor0"


@dataclass(frozen=True)
class MatchCriteria:
    """Pairing thresholds; defaults are the usual 30 deg / 1 m / 1/3."""

    max_angle: float = math.radians(30.0)
    max_translation: float = 1.0
    min_overlap_ratio: float = 1.0 / 3.0


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    kind: str

    def __post_init__(self) -> None:
        if self.i >= self.j:
            raise ValueError("edges are stored with i < j")


@dataclass
class MatchGraph:
    nodes: list[FrameNode]
    edges: list[Edge]

    def edge_pairs(self) -> list[tuple[int, int]]:
        return [(e.i, e.j) for e in self.edges]


def overlap_ratio(
    node_i: FrameNode,
    node_j: FrameNode,
    level: int = 0,
    stride: int = 1,
    extrinsics: SensorExtrinsics | None = None,
) -> float:
    """Fraction of i's valid pixels that reproject validly into j.

    Deterministic count over a fixed pixel stride at the given pyramid
    level. Occlusion is ignored; this is a coarse covisibility gate.
    """
    ext = (extrinsics or SensorExtrinsics.identity()).offset
    src = node_i.pyramid.levels[level]
    dst = node_j.pyramid.levels[level]
    valid = src.depth_valid[::stride, ::stride]
    total = int(valid.sum())
    if total == 0:
        return 0.0
    h, w = src.shape
    cols, rows = np.meshgrid(
        np.arange(0, w, stride, dtype=float), np.arange(0, h, stride, dtype=float)
    )
    uv = np.stack([cols[valid], rows[valid]], axis=-1)
    depths = src.depth[::stride, ::stride][valid]
    p_sensor = unproject(src.intrinsics, uv, depths)
    # Sensor-of-i -> world -> sensor-of-j, all through the platform poses.
    sensor_i = node_i.pose_guess.compose(ext)
    sensor_j = node_j.pose_guess.compose(ext)
    p_dst = sensor_j.inverse().compose(sensor_i).transform(p_sensor)
    _, ok = project(dst.intrinsics, p_dst, bound_slack=1e-6)
    return float(ok.sum()) / float(total)


def _pair_matches(
    node_i: FrameNode,
    node_j: FrameNode,
    criteria: MatchCriteria,
    extrinsics: SensorExtrinsics | None,
    overlap_level: int,
    overlap_stride: int,
) -> bool:
    rel_angle = rotation_angle(node_j.pose_guess.rotation.T @ node_i.pose_guess.rotation)
    if rel_angle > criteria.max_angle:
        return False
    if np.linalg.norm(node_i.pose_guess.translation - node_j.pose_guess.translation) > criteria.max_translation:
        return False
    kwargs = dict(level=overlap_level, stride=overlap_stride, extrinsics=extrinsics)
    if overlap_ratio(node_i, node_j, **kwargs) < criteria.min_overlap_ratio:
        return False
    return overlap_ratio(node_j, node_i, **kwargs) >= criteria.min_overlap_ratio


def build_graph(
    nodes: list[FrameNode],
    criteria: MatchCriteria | None = None,
    sequential: bool = True,
    extrinsics: SensorExtrinsics | None = None,
    overlap_level: int = 0,
    overlap_stride: int = 2,
    threads: int = 1,
) -> MatchGraph:
    """Build the undirected graph of matching pairs from pose guesses.

    Covisibility edges require all three criteria; consecutive-id edges
    are added when `sequential` is set. The edge list is sorted, so the
    result is identical across runs and thread counts.
    """
    criteria = criteria or MatchCriteria()
    if len(nodes) < 2:
        raise GraphConfigError(f"need at least 2 frames to build a graph, got {len(nodes)}")
    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        raise GraphConfigError("frame ids must be unique")
    for a, b in zip(nodes, nodes[1:]):
        if a.sensor_id == b.sensor_id and b.timestamp < a.timestamp:
            raise GraphConfigError(
                f"timestamps must be non-decreasing within a sensor stream "
                f"(frame {b.id} at {b.timestamp} after {a.timestamp})"
            )

    index_of = {n.id: k for k, n in enumerate(nodes)}
    pairs = [
        (ids[a], ids[b])
        for a in range(len(nodes))
        for b in range(a + 1, len(nodes))
    ]

    def check(pair: tuple[int, int]) -> bool:
        ni, nj = nodes[index_of[pair[0]]], nodes[index_of[pair[1]]]
        return _pair_matches(ni, nj, criteria, extrinsics, overlap_level, overlap_stride)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            matched = list(pool.map(check, pairs))
    else:
        matched = [check(p) for p in pairs]

    covisible = {p for p, ok in zip(pairs, matched) if ok}
    edges = {p: COVISIBILITY for p in covisible}
    if sequential:
        ordered = sorted(ids)
        for a, b in zip(ordered, ordered[1:]):
            edges.setdefault((min(a, b), max(a, b)), ODOMETRY)

    edge_list = [Edge(i, j, kind) for (i, j), kind in sorted(edges.items())]
    return MatchGraph(list(nodes), edge_list)


def dump_edges(graph: MatchGraph) -> str:
    """One `i j kind` line per edge, for debugging and the CLI export."""
    return "".join(f"{e.i} {e.j} {e.kind}\n" for e in graph.edges)
