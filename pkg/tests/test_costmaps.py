import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from rubble_landing.core import CameraIntrinsics, Costmap, DepthMap, Pose
from rubble_landing.costmaps import (CostmapWeights, EdgeParams, SteepnessParams, combine, depth_confidence,
                                     depth_edges, depth_to_u8, energy, flatness, minmax_normalize,
                                     slope_angles, steepness, surface_normals)
from rubble_landing.edt import distance_transform, edt_squared
from rubble_landing.errors import EmptyDepthError, ShapeMismatchError
from rubble_landing.scenegen import Box, Plane, Scene, bare_plane, render_depth, tilted_plane

INTR = CameraIntrinsics.centered(160, 120, 80.0)


# -- distance transform --------------------------------------------------------

@given(arrays(np.bool_, st.tuples(st.integers(1, 24), st.integers(1, 24))))
@settings(max_examples=150, deadline=None)
def test_edt_matches_brute_force(features):
    got = edt_squared(features)
    want = oracles.brute_edt_squared(features)
    if features.any():
        assert np.array_equal(got, want.astype(np.float64))
    else:
        assert np.all(np.isinf(got))


@given(arrays(np.bool_, (12, 15)))
@settings(max_examples=60, deadline=None)
def test_edt_zero_exactly_on_features_and_one_lipschitz(features):
    features[3, 4] = True
    d = distance_transform(features)
    assert np.array_equal(d == 0, features)
    assert np.all(np.abs(np.diff(d, axis=0)) <= 1 + 1e-12)
    assert np.all(np.abs(np.diff(d, axis=1)) <= 1 + 1e-12)


def test_edt_rejects_non_2d():
    with pytest.raises(ValueError):
        edt_squared(np.zeros(5, dtype=bool))
    assert edt_squared(np.zeros((0, 3), dtype=bool)).shape == (0, 3)


# -- depth confidence -------------------------------------------------------------

@given(arrays(np.float64, (6, 7), elements=st.floats(0.05, 20.0)))
@settings(max_examples=60, deadline=None)
def test_depth_confidence_range_and_order(data):
    jde = depth_confidence(DepthMap(data)).data
    assert np.all(jde <= 1.0 + 1e-15) and np.all(jde >= 0.0)
    assert math.isclose(jde.flat[np.argmin(data)], 1.0)
    # closer is never worse
    order = np.argsort(data, axis=None, kind="stable")
    assert np.all(np.diff(jde.flat[order]) <= 1e-15)


def test_depth_confidence_keeps_invalid_and_rejects_empty():
    d = DepthMap(np.array([[1.0, np.nan], [2.0, 3.0]]))
    assert np.isnan(depth_confidence(d).data[0, 1])
    with pytest.raises(EmptyDepthError):
        depth_confidence(DepthMap(np.full((2, 2), np.nan)))


# -- edges and flatness -----------------------------------------------------------

def test_depth_to_u8_span_floor_and_invalid():
    d = DepthMap(np.array([[2.0, 2.5], [np.nan, 3.0]]))
    assert depth_to_u8(d).tolist() == [[0, 128], [255, 255]]
    # with a 10 m floor a 1 m range only uses a tenth of the scale
    assert depth_to_u8(d, min_span=10.0).tolist() == [[0, 13], [255, 26]]
    assert depth_to_u8(DepthMap(np.full((2, 2), 4.0))).tolist() == [[0, 0], [0, 0]]


def test_flat_plane_has_no_interior_edges():
    d = render_depth(bare_plane(), Pose.looking_down([0, 0, 5.0]), INTR)
    edges = depth_edges(d)
    assert edges[1:-1, 1:-1].sum() == 0
    fl = flatness(d).data
    assert fl[60, 80] == pytest.approx(min(60, 80 - 1, 120 - 1 - 60, 160 - 1 - 80), abs=0.5)


def test_box_step_creates_edges_and_lowers_flatness():
    scene = Scene((Plane(), Box((0.0, 0.0, 0.5), (1.0, 1.0, 1.0))))
    pose = Pose.looking_down([0, 0, 5.0])
    d = render_depth(scene, pose, INTR)
    edges = depth_edges(d)
    assert edges[1:-1, 1:-1].sum() > 0
    # box half-width projects to 0.5 * 80 / 4 = 10 px from the centre
    fl = flatness(d).data
    assert 8 <= fl[60, 80] <= 12


def test_edge_params_validation():
    with pytest.raises(ValueError):
        EdgeParams(low=100, high=50)
    with pytest.raises(ValueError):
        EdgeParams(sigma=-1)
    with pytest.raises(ValueError):
        EdgeParams(min_span=-0.1)


# -- normals and steepness --------------------------------------------------------

@pytest.mark.parametrize("deg", [0.0, 7.0, 20.0, 35.0])
@pytest.mark.parametrize("yaw", [0.0, 1.1])
def test_plane_normals_recover_tilt(deg, yaw):
    pose = Pose.looking_down([0.0, 0.0, 6.0], yaw=yaw, pitch=0.05)
    d = render_depth(tilted_plane(math.radians(deg)), pose, INTR)
    theta = slope_angles(surface_normals(d, INTR, pose))
    inner = theta[10:-10, 10:-10]
    assert np.all(np.isfinite(inner))
    assert np.max(np.abs(np.degrees(inner) - deg)) < 0.05


def test_normals_invalid_near_dropouts_and_border():
    data = np.full(INTR.shape, 5.0)
    data[50, 50] = np.nan
    pose = Pose.looking_down([0, 0, 5.0])
    n = surface_normals(DepthMap(data), INTR, pose)
    assert np.isnan(n[50, 53, 0]) and np.isfinite(n[50, 54, 0])
    assert np.isnan(n[0, 80, 0]) and np.isnan(n[60, 2, 0])
    with pytest.raises(ValueError):
        surface_normals(DepthMap(data), INTR, pose, window=4)


def test_steepness_score_at_threshold():
    pose = Pose.looking_down([0.0, 0.0, 6.0])
    d = render_depth(tilted_plane(math.radians(15.0)), pose, INTR)
    jn = steepness(d, INTR, pose, SteepnessParams(math.radians(15.0))).data
    assert abs(np.nanmedian(jn) - math.exp(-0.5)) < 1e-3


def test_energy_is_euclidean_range():
    d = DepthMap(np.full(INTR.shape, 3.0))
    e = energy(d, INTR).data
    sx = (0 - INTR.cx) / INTR.fx
    sy = (0 - INTR.cy) / INTR.fy
    assert math.isclose(e[0, 0], 3.0 * math.sqrt(1 + sx * sx + sy * sy))
    assert np.nanmin(e) >= 3.0


# -- fusion -----------------------------------------------------------------------

def test_weights_must_be_convex():
    with pytest.raises(ValueError):
        CostmapWeights(0.5, 0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        CostmapWeights(-0.1, 0.5, 0.5, 0.1)


@given(arrays(np.float64, (5, 6), elements=st.floats(-1e3, 1e3)))
@settings(max_examples=60, deadline=None)
def test_minmax_normalize_bounds(values):
    valid = np.ones(values.shape, dtype=bool)
    valid[0, 0] = False
    out = minmax_normalize(values, valid)
    assert np.isnan(out[0, 0])
    assert np.all((out[valid] >= 0) & (out[valid] <= 1))


@given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda w: sum(w) > 0.1),
       st.integers(0, 2 ** 31))
@settings(max_examples=60, deadline=None)
def test_combine_is_a_convex_combination(raw, seed):
    w = np.asarray(raw) / sum(raw)
    rng = np.random.default_rng(seed)
    maps = [Costmap(rng.random((4, 5)) * 7 - 2) for _ in range(4)]
    j = combine(*maps, weights=CostmapWeights(*w)).data
    assert np.all((j >= 0) & (j <= 1))


def test_combine_propagates_invalid_and_checks_shapes():
    a = np.random.default_rng(0).random((3, 3))
    b = a.copy()
    b[1, 1] = np.nan
    j = combine(Costmap(a), Costmap(b), Costmap(a), Costmap(a)).data
    assert np.isnan(j[1, 1]) and np.isfinite(j[0, 0])
    with pytest.raises(ShapeMismatchError):
        combine(Costmap(a), Costmap(a), Costmap(a), Costmap(np.zeros((2, 2))))
