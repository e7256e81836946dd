"""Tests for match-graph construction."""

import math

import numpy as np
import pytest

from photoba.geometry import PerturbationVector, Pose, exp
from photoba.graph import (
    COVISIBILITY,
    ODOMETRY,
    FrameNode,
    GraphConfigError,
    MatchCriteria,
    build_graph,
    dump_edges,
    overlap_ratio,
)
from photoba.sensors import PINHOLE, Intrinsics
from photoba.synthetic import PlaneSurface, Scene, SineTexture

from rigs import ROOM, render_pyramid, rgbd_cam


def pan_pose(t, pan_rad) -> Pose:
    # Heading change for a camera that looks along +z: rotate about y.
    c, s = math.cos(pan_rad), math.sin(pan_rad)
    return Pose(np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]), t)


def room_node(node_id, pose, ts=None) -> FrameNode:
    return FrameNode(node_id, pose, render_pyramid(rgbd_cam(), pose), ts if ts is not None else node_id * 0.1)


# ---------------------------------------------------------------------------
# overlap_ratio
# ---------------------------------------------------------------------------


def test_overlap_with_self_is_one():
    n = room_node(0, Pose(np.eye(3), [0.0, 0.0, -0.5]))
    assert overlap_ratio(n, n, level=0) == 1.0


def test_overlap_after_half_turn_is_zero():
    a = room_node(0, Pose(np.eye(3), [0.0, 0.0, -0.5]))
    flipped = pan_pose([0.0, 0.0, -0.5], math.pi)
    b = room_node(1, flipped)
    assert overlap_ratio(a, b, level=0) == 0.0


def test_overlap_half_overlapping_planar_views():
    cam = rgbd_cam()
    scene = Scene(surfaces=[PlaneSurface(normal=(0, 0, 1), offset=2.0, texture=SineTexture())])
    p0 = Pose.identity()
    # Lateral shift that moves the image by exactly half its width at the
    # plane distance: dx = (width/2)/fx * z.
    dx = (cam.width / 2.0) / cam.fx * 2.0
    p1 = Pose(np.eye(3), [dx, 0.0, 0.0])
    n0 = FrameNode(0, p0, render_pyramid(cam, p0, scene=scene), 0.0)
    n1 = FrameNode(1, p1, render_pyramid(cam, p1, scene=scene), 0.1)
    ratio = overlap_ratio(n0, n1, level=len(n0.pyramid) - 1, stride=1)
    assert abs(ratio - 0.5) <= 0.05


# ---------------------------------------------------------------------------
# build_graph
# ---------------------------------------------------------------------------


def test_identical_poses_match():
    p = Pose(np.eye(3), [0.0, 0.0, -0.5])
    graph = build_graph([room_node(0, p), room_node(1, p)], sequential=False)
    assert [(e.i, e.j, e.kind) for e in graph.edges] == [(0, 1, COVISIBILITY)]


def test_distant_poses_do_not_match():
    a = room_node(0, Pose(np.eye(3), [-2.5, 0.0, -0.5]))
    b = room_node(1, Pose(np.eye(3), [2.5, 0.0, -0.5]))  # 5 m apart
    graph = build_graph([a, b], sequential=False)
    assert graph.edges == []


def test_sequential_chain_when_nothing_covisible():
    nodes = [
        room_node(k, pan_pose([-2.0 + 1.4 * k, 0.0, -0.5], (math.pi / 2) * (k % 4)))
        for k in range(4)
    ]
    graph = build_graph(nodes, sequential=True)
    assert [(e.i, e.j) for e in graph.edges] == [(0, 1), (1, 2), (2, 3)]
    assert all(e.kind == ODOMETRY for e in graph.edges)


def test_hand_enumerated_six_pose_scenario():
    # Distances and angles chosen far from the default thresholds
    # (30 deg / 1 m / 1/3) so the expected edge set is unambiguous:
    #   0-1, 0-2, 1-2: same heading, 0.4-0.8 m apart -> covisibility
    #   3: at pose 0's position but yawed 45 deg -> no covisibility
    #   4, 5: same heading, 0.4 m apart, but > 1 m from everyone else
    poses = [
        Pose(np.eye(3), [0.0, 0.0, -0.5]),
        Pose(np.eye(3), [0.4, 0.0, -0.5]),
        Pose(np.eye(3), [0.8, 0.0, -0.5]),
        pan_pose([0.0, 0.0, -0.5], math.radians(45.0)),
        Pose(np.eye(3), [2.0, 0.0, -0.5]),
        Pose(np.eye(3), [2.4, 0.0, -0.5]),
    ]
    nodes = [room_node(k, p) for k, p in enumerate(poses)]
    graph = build_graph(nodes, MatchCriteria(), sequential=True)
    got = {(e.i, e.j): e.kind for e in graph.edges}
    expected = {
        (0, 1): COVISIBILITY,
        (0, 2): COVISIBILITY,
        (1, 2): COVISIBILITY,
        (4, 5): COVISIBILITY,
        (2, 3): ODOMETRY,
        (3, 4): ODOMETRY,
    }
    assert got == expected


def test_loosening_thresholds_never_removes_edges():
    rng = np.random.default_rng(91)
    nodes = []
    for k in range(5):
        p = Pose(
            exp(PerturbationVector([0, 0, 0], [0, 0, rng.uniform(-0.2, 0.2)])).rotation,
            [rng.uniform(-0.8, 0.8), rng.uniform(-0.5, 0.5), -0.5],
        )
        nodes.append(room_node(k, p))
    tight = build_graph(nodes, MatchCriteria(math.radians(10), 0.5, 0.6), sequential=False)
    loose = build_graph(nodes, MatchCriteria(math.radians(40), 2.0, 0.2), sequential=False)
    assert set(tight.edge_pairs()) <= set(loose.edge_pairs())


def test_graph_determinism_across_threads():
    rng = np.random.default_rng(92)
    nodes = []
    for k in range(5):
        p = Pose(np.eye(3), [rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3), -0.5])
        nodes.append(room_node(k, p))
    serial = build_graph(nodes, threads=1)
    threaded = build_graph(nodes, threads=4)
    again = build_graph(nodes, threads=4)
    assert serial.edge_pairs() == threaded.edge_pairs() == again.edge_pairs()


def test_graph_rejects_bad_node_sets():
    n = room_node(0, Pose(np.eye(3), [0.0, 0.0, -0.5]))
    with pytest.raises(GraphConfigError):
        build_graph([n])
    with pytest.raises(GraphConfigError):
        build_graph([])
    m = room_node(0, Pose(np.eye(3), [0.1, 0.0, -0.5]))
    with pytest.raises(GraphConfigError):
        build_graph([n, m])  # duplicate ids


def test_graph_rejects_decreasing_timestamps():
    a = room_node(0, Pose(np.eye(3), [0.0, 0.0, -0.5]), ts=1.0)
    b = room_node(1, Pose(np.eye(3), [0.1, 0.0, -0.5]), ts=0.5)
    with pytest.raises(GraphConfigError):
        build_graph([a, b])


def test_dump_edges_format():
    p = Pose(np.eye(3), [0.0, 0.0, -0.5])
    graph = build_graph([room_node(0, p), room_node(1, p)], sequential=True)
    text = dump_edges(graph)
    assert text == "0 1 covisibility\n"
