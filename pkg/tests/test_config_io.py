import math
import warnings

import numpy as np
import pytest

from rubble_landing.config import (KEYS, PipelineConfig, apply_overrides, load_config, load_preset, parse_flat,
                                   to_flat)
from rubble_landing.core import CameraIntrinsics, Costmap, DepthMap, Pose
from rubble_landing.io import (costmap_to_u8, load_dataset, read_camera, read_depth, read_pfm, read_pgm,
                               read_poses, write_camera, write_depth, write_pfm, write_pgm, write_poses)


# -- config ---------------------------------------------------------------------

def test_simulation_preset_values():
    cfg = load_preset("simulation")
    assert cfg.weights.as_tuple() == (0.05, 0.4, 0.4, 0.15)
    assert cfg.detection.score_threshold == 0.72
    assert (cfg.clustering.cluster_dist, cfg.clustering.z_threshold) == (0.5, 0.01)
    assert cfg.detection.uav_radius == 0.26
    assert math.degrees(cfg.steepness.theta_th) == pytest.approx(15.0)
    assert cfg.grid.resolution == 0.5 and cfg.trajectory.v_nom == 0.5
    assert (cfg.camera.width, cfg.camera.height) == (640, 480)


def test_real_preset_values():
    cfg = load_preset("real")
    assert cfg.weights.as_tuple() == (0.15, 0.35, 0.4, 0.1)
    assert cfg.detection.score_threshold == 0.7
    assert (cfg.clustering.cluster_dist, cfg.clustering.z_threshold) == (0.5, 0.05)


def test_flat_roundtrip_covers_every_key():
    cfg = load_preset("real")
    text = to_flat(cfg)
    values = parse_flat(text)
    assert set(values) == set(KEYS)
    assert apply_overrides(PipelineConfig(), values) == cfg


def test_config_file_overrides_preset(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("preset = real\nscore_threshold = 0.65  # looser\ntrajectory_order = snap\n")
    cfg = load_config(p)
    assert cfg.preset == "real" and cfg.detection.score_threshold == 0.65
    assert cfg.trajectory.order == 4
    assert cfg.weights.as_tuple() == (0.15, 0.35, 0.4, 0.1)
    # an explicit preset argument wins over the file's
    assert load_config(p, "simulation").weights.c1 == 0.05


def test_config_errors(tmp_path):
    with pytest.raises(ValueError):
        apply_overrides(PipelineConfig(), {"no_such_key": "1"})
    with pytest.raises(ValueError):
        load_preset("moon")
    with pytest.raises(ValueError):
        apply_overrides(PipelineConfig(), {"unknown_is_free": "maybe"})
    with pytest.raises(ValueError):
        apply_overrides(PipelineConfig(), {"weight_depth_accuracy": "0.5"})  # no longer sums to 1


# -- files ----------------------------------------------------------------------

def test_pfm_roundtrip_keeps_nan_and_orientation(tmp_path):
    a = np.arange(12, dtype=np.float32).reshape(3, 4)
    a[1, 2] = np.nan
    write_pfm(tmp_path / "a.pfm", a)
    b = read_pfm(tmp_path / "a.pfm")
    assert np.array_equal(a, b, equal_nan=True)
    (tmp_path / "bad.pfm").write_bytes(b"P5\n1 1\n255\n\0")
    with pytest.raises(ValueError):
        read_pfm(tmp_path / "bad.pfm")


@pytest.mark.parametrize("suffix", [".pfm", ".raw"])
def test_depth_roundtrip(tmp_path, suffix):
    d = DepthMap(np.array([[1.5, 2.25], [np.nan, 19.0]]))
    write_depth(tmp_path / f"d{suffix}", d)
    back = read_depth(tmp_path / f"d{suffix}")
    assert np.array_equal(back.data, d.data, equal_nan=True)


def test_pose_and_camera_roundtrip(tmp_path):
    stamped = [(0.0, Pose.looking_down([1, 2, 3], 0.3, 0.1)), (0.5, Pose.identity())]
    write_poses(tmp_path / "p.csv", stamped)
    back = read_poses(tmp_path / "p.csv")
    for (t0, p0), (t1, p1) in zip(stamped, back):
        assert t0 == t1 and np.array_equal(p0.translation, p1.translation)
        assert np.allclose(p0.rotation, p1.rotation, atol=1e-15)
    intr = CameraIntrinsics.centered(640, 480, 320.0)
    write_camera(tmp_path / "camera.cfg", intr)
    assert read_camera(tmp_path / "camera.cfg") == intr


def test_costmap_images(tmp_path):
    cm = Costmap(np.array([[0.0, 0.5], [1.0, np.nan]]))
    img = costmap_to_u8(cm)
    assert img.tolist() == [[0, 128], [255, 0]]
    assert costmap_to_u8(Costmap(np.array([[2.0, 4.0]])), normalize=True).tolist() == [[0, 255]]
    write_pgm(tmp_path / "c.pgm", img)
    assert np.array_equal(read_pgm(tmp_path / "c.pgm"), img)
    with pytest.raises(OSError):
        read_pgm(tmp_path / "missing.pgm")


def _dataset(root, n_frames, n_poses):
    intr = CameraIntrinsics.centered(8, 6, 4.0)
    (root / "frames").mkdir(parents=True)
    for i in range(n_frames):
        write_depth(root / "frames" / f"{i:06d}.pfm", DepthMap(np.full((6, 8), 3.0 + i)))
    write_poses(root / "poses.csv", [(float(i), Pose.looking_down([i, 0, 3])) for i in range(n_poses)])
    write_camera(root / "camera.cfg", intr)
    return intr


def test_load_dataset(tmp_path):
    intr = _dataset(tmp_path, 3, 3)
    (tmp_path / "frames" / "000001.pfm").write_bytes(b"junk")
    got_intr, n, frames = load_dataset(tmp_path)
    assert got_intr == intr and n == 3
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        items = list(frames)
    assert [d is None for _, d, _ in items] == [False, True, False]
    assert len(caught) == 1 and "000001" in str(caught[0].message)
    assert items[2][1].data[0, 0] == 5.0


def test_load_dataset_count_mismatch(tmp_path):
    _dataset(tmp_path, 3, 2)
    with pytest.raises(ValueError):
        load_dataset(tmp_path)
