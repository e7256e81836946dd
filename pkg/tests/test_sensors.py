"""Tests for the pinhole and spherical sensor models."""

import math

import numpy as np
import pytest

from photoba.sensors import (
    PINHOLE,
    SPHERICAL,
    Intrinsics,
    InvalidDepthError,
    SingularJacobianError,
    project,
    projective_jacobian,
    projective_jacobian_batch,
    unproject,
)


def pinhole_cam(
    fx=100.0, fy=100.0, cx=64.0, cy=48.0, width=128, height=96, depth_min=0.1, depth_max=50.0
) -> Intrinsics:
    return Intrinsics(fx, fy, cx, cy, width, height, PINHOLE, depth_min, depth_max)


def spherical_cam(width=256, height=64, v_fov=math.pi / 2, depth_min=0.5, depth_max=80.0) -> Intrinsics:
    # Full 360 deg azimuth; elevation 0 at the image center row.
    fx = width / (2.0 * math.pi)
    fy = height / v_fov
    return Intrinsics(fx, fy, width / 2.0, height / 2.0, width, height, SPHERICAL, depth_min, depth_max)


def unit_pinhole() -> Intrinsics:
    # fx = fy = 1, cx = cy = 0: projection is plain division by z.
    return Intrinsics(1.0, 1.0, 0.0, 0.0, 16, 16, PINHOLE, 0.1, 100.0)


# ---------------------------------------------------------------------------
# project
# ---------------------------------------------------------------------------


def test_pinhole_project_divides_by_z():
    uv, ok = project(unit_pinhole(), np.array([2.0, 4.0, 2.0]))
    assert ok
    assert np.allclose(uv, [1.0, 2.0])


def test_pinhole_project_rejects_behind_camera():
    _, ok = project(pinhole_cam(), np.array([0.0, 0.0, -1.0]))
    assert not ok
    _, ok = project(pinhole_cam(), np.array([0.1, 0.1, 0.0]))
    assert not ok


def test_pinhole_project_rejects_out_of_depth_range():
    cam = pinhole_cam(depth_min=0.5, depth_max=5.0)
    _, ok = project(cam, np.array([0.0, 0.0, 6.0]))
    assert not ok
    _, ok = project(cam, np.array([0.0, 0.0, 0.4]))
    assert not ok


def test_spherical_forward_axis_hits_principal_point():
    cam = spherical_cam()
    uv, ok = project(cam, np.array([1.0, 0.0, 0.0]))
    assert ok
    assert np.allclose(uv, [cam.cx, cam.cy], atol=1e-12)


def test_spherical_quarter_turn_azimuth():
    cam = spherical_cam()
    uv, ok = project(cam, np.array([0.0, 1.0, 0.0]))
    assert ok
    # Scalar oracle: azimuth atan2(1, 0) = pi/2 scaled by fx pixels/radian.
    assert np.allclose(uv[0], cam.cx + cam.fx * math.atan2(1.0, 0.0))
    assert np.allclose(uv[1], cam.cy)


def test_spherical_azimuth_wraps_modulo_width():
    cam = spherical_cam()
    angles = np.linspace(-math.pi, math.pi, 8, endpoint=False) + math.pi / 16
    cols = []
    for a in angles:
        uv, ok = project(cam, np.array([5.0 * math.cos(a), 5.0 * math.sin(a), 0.0]))
        assert ok
        cols.append(uv[0])
        assert 0.0 <= uv[0] < cam.width
    # Sweeping azimuth through +/- pi produces columns equal modulo width.
    expected = np.mod(cam.fx * angles + cam.cx, cam.width)
    assert np.allclose(cols, expected, atol=1e-9)


# ---------------------------------------------------------------------------
# unproject
# ---------------------------------------------------------------------------


def test_pinhole_unproject_inverse_example():
    p = unproject(unit_pinhole(), np.array([1.0, 2.0]), 2.0)
    assert np.allclose(p, [2.0, 4.0, 2.0])


def test_spherical_unproject_forward_axis():
    cam = spherical_cam()
    p = unproject(cam, np.array([cam.cx, cam.cy]), 5.0)
    assert np.allclose(p, [5.0, 0.0, 0.0], atol=1e-12)


def test_unproject_rejects_out_of_range_depth():
    with pytest.raises(InvalidDepthError):
        unproject(pinhole_cam(), np.array([10.0, 10.0]), 1000.0)
    with pytest.raises(InvalidDepthError):
        unproject(spherical_cam(), np.array([10.0, 10.0]), 0.001)


def test_round_trip_both_models():
    rng = np.random.default_rng(21)
    for cam in (pinhole_cam(), spherical_cam()):
        u = np.stack(
            [
                rng.uniform(0.0, cam.width, 2000),
                rng.uniform(1.0, cam.height - 1.0, 2000),
            ],
            axis=-1,
        )
        d = rng.uniform(cam.depth_min * 1.01, cam.depth_max * 0.99, 2000)
        uv, ok = project(cam, unproject(cam, u, d))
        assert ok.all()
        assert np.max(np.abs(uv - u)) < 1e-6


def test_depth_range_consistency():
    rng = np.random.default_rng(22)
    cam = pinhole_cam()
    u = np.array([30.0, 40.0])
    d = rng.uniform(1.0, 10.0)
    assert unproject(cam, u, d)[2] == d  # z-depth stored exactly
    sph = spherical_cam()
    p = unproject(sph, np.array([100.0, 20.0]), d)
    assert abs(np.linalg.norm(p) - d) < 1e-12


# ---------------------------------------------------------------------------
# projective Jacobian
# ---------------------------------------------------------------------------


def test_pinhole_jacobian_unit_point():
    jac = projective_jacobian(unit_pinhole(), np.array([0.0, 0.0, 1.0]))
    assert np.allclose(jac, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_spherical_jacobian_forward_axis():
    # fx = fy = 1 makes the Jacobian equal the raw azimuth/elevation rows.
    cam = Intrinsics(1.0, 1.0, 8.0, 8.0, 16, 16, SPHERICAL, 0.1, 100.0)
    jac = projective_jacobian(cam, np.array([1.0, 0.0, 0.0]))
    assert np.allclose(jac[0], [0.0, 1.0, 0.0], atol=1e-12)
    assert np.allclose(jac[1], [0.0, 0.0, 1.0], atol=1e-12)


def test_jacobian_singular_configurations_raise():
    with pytest.raises(SingularJacobianError):
        projective_jacobian(pinhole_cam(), np.array([1.0, 1.0, 0.0]))
    with pytest.raises(SingularJacobianError):
        projective_jacobian(spherical_cam(), np.array([0.0, 0.0, 3.0]))


def _fd_projection_jacobian(cam, p, h=1e-6):
    fd = np.zeros((2, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        up, _ = project(cam, p + e)
        um, _ = project(cam, p - e)
        fd[:, k] = (up - um) / (2.0 * h)
    return fd


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(23)
    cam_p = pinhole_cam()
    cam_s = spherical_cam()
    checked = 0
    while checked < 1000:
        z = rng.uniform(0.5, 10.0)
        p = np.array([rng.uniform(-0.4, 0.4) * z, rng.uniform(-0.3, 0.3) * z, z])
        _, ok = project(cam_p, p)
        if not ok:
            continue
        jac = projective_jacobian(cam_p, p)
        fd = _fd_projection_jacobian(cam_p, p)
        assert np.allclose(jac, fd, rtol=1e-4, atol=1e-7)
        checked += 1
    checked = 0
    while checked < 1000:
        p = rng.uniform(-5.0, 5.0, 3)
        if np.hypot(p[0], p[1]) < 0.3 or not (cam_s.depth_min < np.linalg.norm(p) < cam_s.depth_max):
            continue
        uv, ok = project(cam_s, p)
        # Stay off the wrap seam so finite differences see a continuous map.
        if not ok or uv[0] < 1.0 or uv[0] > cam_s.width - 1.0 or uv[1] < 1.0 or uv[1] > cam_s.height - 1.0:
            continue
        jac = projective_jacobian(cam_s, p)
        fd = _fd_projection_jacobian(cam_s, p)
        assert np.allclose(jac, fd, rtol=1e-4, atol=1e-7)
        checked += 1


def test_jacobian_batch_matches_scalar():
    rng = np.random.default_rng(24)
    cam = pinhole_cam()
    pts = np.stack([rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50), rng.uniform(0.5, 5, 50)], axis=-1)
    jac, ok = projective_jacobian_batch(cam, pts)
    assert ok.all()
    for k in range(50):
        assert np.allclose(jac[k], projective_jacobian(cam, pts[k]))


def test_scaled_intrinsics():
    cam = pinhole_cam().scaled(0.5)
    assert (cam.width, cam.height) == (64, 48)
    assert cam.fx == 50.0
    # Principal point carries the footprint-centroid correction: a scaled
    # pixel center must unproject through the centroid of its source
    # pixels, so c' = s*c + (s-1)/2.
    assert cam.cx == 64.0 * 0.5 - 0.25
    full = pinhole_cam()
    # Source pixel block {2k, 2k+1} has centroid 2k + 0.5: the scaled
    # pixel k maps back to exactly that full-resolution coordinate.
    k = 10.0
    x_full = (k - cam.cx) / cam.fx * full.fx + full.cx
    assert abs(x_full - (2.0 * k + 0.5)) < 1e-12


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        Intrinsics(0.0, 1.0, 0.0, 0.0, 4, 4, PINHOLE, 0.1, 1.0)
    with pytest.raises(ValueError):
        Intrinsics(1.0, 1.0, 0.0, 0.0, 4, 4, PINHOLE, 1.0, 0.5)
    with pytest.raises(ValueError):
        Intrinsics(1.0, 1.0, 0.0, 0.0, 4, 4, "fisheye", 0.1, 1.0)
