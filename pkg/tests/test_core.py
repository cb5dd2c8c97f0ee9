import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rubble_landing.core import (CameraIntrinsics, Costmap, DepthMap, Pose, pixel_to_world,
                                 uav_radius_pixels, world_to_pixel)
from rubble_landing.errors import InvalidDepthError, OutOfBoundsError

INTR = CameraIntrinsics.centered(64, 48, 40.0, 50.0)

angles = st.floats(-math.pi, math.pi, allow_nan=False)
coords = st.floats(-50, 50, allow_nan=False)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0, 1.0, 1.0, 1.0, 4, 4)
    with pytest.raises(ValueError):
        CameraIntrinsics(1.0, 1.0, 9.0, 1.0, 4, 4)
    assert INTR.shape == (48, 64)
    assert INTR.cx == 31.5 and INTR.cy == 23.5


def test_pose_rejects_non_unit_quaternion():
    with pytest.raises(ValueError):
        Pose([0, 0, 0], [1.0, 1.0, 0.0, 0.0])


def test_nadir_pose_axes():
    p = Pose.looking_down([1.0, 2.0, 10.0])
    assert np.allclose(p.matrix, np.diag([1.0, -1.0, -1.0]))
    # optical axis points down
    assert np.allclose(p.apply([0.0, 0.0, 1.0]), [1.0, 2.0, 9.0])


@given(coords, coords, coords, angles, angles, angles)
@settings(max_examples=60, deadline=None)
def test_pose_inverse_roundtrip(x, y, z, yaw, pitch, roll):
    p = Pose.looking_down([x, y, z], yaw, pitch, roll)
    pts = np.array([[0.3, -1.0, 2.0], [5.0, 4.0, -3.0]])
    assert np.allclose(p.inverse().apply(p.apply(pts)), pts, atol=1e-9)
    assert np.allclose(p.compose(p.inverse()).matrix, np.eye(3), atol=1e-9)
    assert np.allclose(p.matrix @ p.matrix.T, np.eye(3), atol=1e-12)


@given(st.floats(0, 63), st.floats(0, 47), st.floats(0.1, 19.0), angles, st.floats(-0.4, 0.4))
@settings(max_examples=80, deadline=None)
def test_pixel_world_roundtrip(u, v, d, yaw, pitch):
    pose = Pose.looking_down([1.0, -2.0, 12.0], yaw, pitch)
    w = pixel_to_world((u, v), d, INTR, pose)
    px, depth = world_to_pixel(w, INTR, pose)
    assert np.allclose(px, [u, v], atol=1e-7)
    assert math.isclose(depth, d, rel_tol=1e-9)


def test_pixel_to_world_errors():
    pose = Pose.identity()
    with pytest.raises(InvalidDepthError) as e:
        pixel_to_world((1, 1), 25.0, INTR, pose)
    assert e.value.code == "invalid-depth"
    with pytest.raises(InvalidDepthError):
        pixel_to_world((1, 1), float("nan"), INTR, pose)
    with pytest.raises(OutOfBoundsError):
        pixel_to_world((64.5, 1), 2.0, INTR, pose)
    with pytest.raises(InvalidDepthError):
        world_to_pixel([0, 0, -1.0], INTR, pose)


def test_depth_map_invalid_marking():
    d = DepthMap(np.array([[1.0, 0.01, np.inf], [30.0, -1.0, 5.0]]))
    assert d.valid.tolist() == [[True, False, False], [False, False, True]]
    with pytest.raises(ValueError):
        d.data[0, 0] = 2.0
    with pytest.raises(ValueError):
        DepthMap(np.ones(4))
    with pytest.raises(ValueError):
        DepthMap(np.ones((2, 2)), d_min=3.0, d_max=1.0)


def test_camera_points_are_z_depth():
    d = DepthMap(np.full(INTR.shape, 4.0))
    pts = d.camera_points(INTR)
    assert np.allclose(pts[..., 2], 4.0)
    assert np.allclose(pts[0, 0, :2], [-31.5 * 4 / 40, -23.5 * 4 / 50])
    with pytest.raises(ValueError):
        DepthMap(np.ones((3, 3))).camera_points(INTR)


def test_uav_radius_pixels_uses_larger_focal():
    assert math.isclose(uav_radius_pixels(0.26, 2.0, INTR), 50 * 0.26 / 2.0)
    arr = uav_radius_pixels(0.5, np.array([1.0, 5.0]), INTR)
    assert np.allclose(arr, [25.0, 5.0])


def test_costmap_masking():
    cm = Costmap(np.arange(4.0).reshape(2, 2), "x")
    m = cm.masked(np.array([[True, False], [False, True]]))
    assert m.valid.tolist() == [[True, False], [False, True]]
    assert m.name == "x"
