import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from rubble_landing.core import CameraIntrinsics, Pose
from rubble_landing.mapping import OccupancyGrid, logodds, traverse
from rubble_landing.scenegen import bare_plane, render_depth

coord = st.floats(-4, 4, allow_nan=False)
pt = st.tuples(coord, coord, coord)


@given(pt, pt, st.sampled_from([0.25, 0.5, 1.0]))
@settings(max_examples=200, deadline=None)
def test_traversal_is_exact_supercover(a, b, res):
    a, b = np.array(a), np.array(b)
    vox = traverse(a, b, res)
    assert tuple(vox[0]) == tuple(np.floor(a / res).astype(int))
    assert tuple(vox[-1]) == tuple(np.floor(b / res).astype(int))
    # face-connected walk, no repeats
    steps = np.abs(np.diff(vox, axis=0)).sum(axis=1)
    assert np.all(steps == 1)
    assert len({tuple(v) for v in vox}) == len(vox)
    # every voxel listed is really crossed by the segment
    eps = 1e-9
    for v in vox:
        assert oracles.segment_hits_box(a, b, v * res - eps, (v + 1) * res + eps)
    # and every dense sample lies in (or within eps of) a listed voxel
    listed = {tuple(v) for v in vox}
    for t in np.linspace(0, 1, 1001):
        p = (1 - t) * a + t * b
        if tuple(np.floor(p / res).astype(int)) in listed:
            continue
        assert any(np.all(p >= v * res - eps) and np.all(p <= (v + 1) * res + eps) for v in vox)


def test_axial_ray_log_odds():
    g = OccupancyGrid(0.5)
    g.integrate_rays([0.1, 0.1, 0.1], np.array([[0.1, 0.1, 5.1]]))
    assert (0, 0, 0) not in g.voxels  # sensor voxel untouched
    for k in range(1, 10):
        assert g.log_odds((0, 0, k)) == pytest.approx(logodds(0.4))
    assert g.log_odds((0, 0, 10)) == pytest.approx(logodds(0.7))
    assert g.probability((0, 0, 10)) == pytest.approx(0.7)


def test_clamping():
    g = OccupancyGrid(0.5)
    end = np.array([[0.1, 0.1, 5.1]])
    for _ in range(30):
        g.integrate_rays([0.1, 0.1, 0.1], end)
    assert g.log_odds((0, 0, 10)) == pytest.approx(logodds(0.97))
    assert g.log_odds((0, 0, 5)) == pytest.approx(logodds(0.12))


def test_hit_wins_within_one_scan():
    g = OccupancyGrid(1.0)
    # second ray passes through the voxel the first ray ends in
    g.integrate_rays([0.5, 0.5, 0.5], np.array([[0.5, 0.5, 3.5], [0.5, 0.5, 6.5]]))
    assert g.log_odds((0, 0, 3)) == pytest.approx(logodds(0.7))
    assert g.log_odds((0, 0, 4)) == pytest.approx(logodds(0.4))


def test_integrate_depth_marks_ground():
    intr = CameraIntrinsics.centered(64, 48, 32.0)
    pose = Pose.looking_down([0.2, 0.3, 4.0])
    g = OccupancyGrid(0.5)
    g.integrate_depth(render_depth(bare_plane(), pose, intr), pose, intr, subsample=2)
    occ = g.occupied_centers()
    assert len(occ) > 0 and np.all(occ[:, 2] == 0.25)
    assert g.is_collision_free([0.2, 0.3, 3.5], [0.2, 0.3, 1.5], 0.6)
    assert not g.is_collision_free([0.2, 0.3, 3.5], [0.2, 0.3, 0.0], 0.1)
    with pytest.raises(ValueError):
        g.integrate_depth(render_depth(bare_plane(), pose, intr), pose, intr, subsample=0)


def _grid_with_random_voxels(seed, n):
    rng = np.random.default_rng(seed)
    g = OccupancyGrid(0.5)
    g.mark_occupied(rng.uniform(-3, 3, size=(n, 3)))
    return g


@pytest.mark.parametrize("n", [30, 5000])  # both the scan and the k-d tree path
def test_collision_check_matches_brute_force(n):
    g = _grid_with_random_voxels(n, n)
    centres = g.occupied_centers()
    rng = np.random.default_rng(1)
    for _ in range(60):
        a, b = rng.uniform(-4, 4, 3), rng.uniform(-4, 4, 3)
        c = float(rng.uniform(0.0, 0.8))
        ab = b - a
        s = np.clip((centres - a) @ ab / (ab @ ab), 0, 1)
        dist = np.linalg.norm(centres - (a + s[:, None] * ab), axis=1)
        assert g.is_collision_free(a, b, c) == bool(np.all(dist > c))


def test_unknown_is_occupied_mode():
    g = OccupancyGrid(0.5, unknown_is_free=False)
    assert not g.is_collision_free([0.1, 0.1, 0.1], [2.0, 0.1, 0.1])
    g.integrate_rays([0.1, 0.1, 0.1], np.array([[4.1, 0.1, 0.1]]))
    assert not g.is_collision_free([0.1, 0.1, 0.1], [2.0, 0.1, 0.1])  # sensor voxel unseen
    assert g.is_collision_free([0.6, 0.1, 0.1], [2.0, 0.1, 0.1])


def test_fill_box_uses_centres():
    g = OccupancyGrid(0.5)
    g.fill_box((0.0, 0.0, 0.0), (1.0, 0.5, 0.5))
    assert sorted(g.voxels) == [(0, 0, 0), (1, 0, 0)]


def test_text_roundtrip(tmp_path):
    g = _grid_with_random_voxels(3, 50)
    g.integrate_rays([0, 0, 5.0], np.array([[1.0, 1.0, 0.0]]))
    path = tmp_path / "occ.txt"
    g.save(path)
    back = OccupancyGrid.load(path)
    assert back.voxels == g.voxels and back.resolution == g.resolution
    with pytest.raises(ValueError):
        OccupancyGrid.from_text("res 0.5\n")


def test_copy_is_independent():
    g = _grid_with_random_voxels(4, 10)
    h = g.copy()
    h.mark_occupied([[100.0, 100.0, 100.0]])
    assert len(h) == len(g) + 1
    assert g.is_collision_free([100, 100, 99], [100, 100, 99], 0.1)


def test_bad_arguments():
    with pytest.raises(ValueError):
        OccupancyGrid(0.0)
    with pytest.raises(ValueError):
        OccupancyGrid().is_collision_free([0, 0, 0], [1, 0, 0], -1.0)
    assert math.isclose(logodds(0.5), 0.0)
