"""Depth, pose, camera and image file formats."""

from __future__ import annotations

import csv
import warnings
from pathlib import Path

import cv2
import numpy as np

from .core import CameraIntrinsics, Costmap, DepthMap, Pose


def write_pfm(path, data: np.ndarray) -> None:
    """Single-channel little-endian PFM; rows are stored bottom to top."""
    a = np.asarray(data, dtype="<f4")
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(a[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind not in (b"Pf", b"PF"):
            raise ValueError(f"{path}: not a PFM file")
        w, h = (int(v) for v in fh.readline().split())
        scale = float(fh.readline())
        channels = 3 if kind == b"PF" else 1
        dtype = "<f4" if scale < 0 else ">f4"
        a = np.frombuffer(fh.read(), dtype=dtype, count=w * h * channels)
    # colour files keep their first channel
    return a.reshape(h, w, channels)[::-1, :, 0].astype(np.float32)


def write_raw_depth(path, depth: DepthMap) -> None:
    """Text header ``width height d_min d_max`` then float32 little-endian rows."""
    h, w = depth.shape
    with open(path, "wb") as fh:
        fh.write(f"{w} {h} {depth.d_min!r} {depth.d_max!r}\n".encode("ascii"))
        fh.write(np.asarray(depth.data, dtype="<f4").tobytes())


def read_raw_depth(path) -> DepthMap:
    with open(path, "rb") as fh:
        w, h, d_min, d_max = fh.readline().split()
        w, h = int(w), int(h)
        a = np.frombuffer(fh.read(), dtype="<f4", count=w * h).reshape(h, w)
    return DepthMap(a.astype(np.float64), float(d_min), float(d_max))


def read_depth(path, d_min: float = 0.05, d_max: float = 20.0) -> DepthMap:
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        return DepthMap(read_pfm(path).astype(np.float64), d_min, d_max)
    return read_raw_depth(path)


def write_depth(path, depth: DepthMap) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        write_pfm(path, depth.data)
    else:
        write_raw_depth(path, depth)


POSE_HEADER = ["timestamp_s", "tx", "ty", "tz", "qw", "qx", "qy", "qz"]


def write_poses(path, stamped: list[tuple[float, Pose]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POSE_HEADER)
        for t, p in stamped:
            w.writerow([repr(float(t))] + [repr(float(v)) for v in (*p.translation, *p.rotation)])


def read_poses(path) -> list[tuple[float, Pose]]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError:
                continue  # header
            if len(vals) != 8:
                raise ValueError(f"{path}: pose rows need 8 columns, got {len(vals)}")
            q = np.asarray(vals[4:])
            out.append((vals[0], Pose(np.asarray(vals[1:4]), q / np.linalg.norm(q))))
    return out


def write_camera(path, intr: CameraIntrinsics) -> None:
    Path(path).write_text("".join(f"{k} = {getattr(intr, k)!r}\n"
                                  for k in ("fx", "fy", "cx", "cy", "width", "height")))


def read_camera(path) -> CameraIntrinsics:
    from .config import parse_flat

    v = parse_flat(Path(path).read_text())
    return CameraIntrinsics(float(v["fx"]), float(v["fy"]), float(v["cx"]), float(v["cy"]),
                            int(v["width"]), int(v["height"]))


def costmap_to_u8(cm: Costmap, normalize: bool = False) -> np.ndarray:
    """Scores in [0, 1] scaled to 0..255 (optionally min-max first); invalid pixels 0."""
    valid = cm.valid
    out = np.zeros(cm.shape, dtype=np.uint8)
    if not valid.any():
        return out
    v = cm.data[valid]
    if normalize:
        lo, hi = v.min(), v.max()
        v = np.ones_like(v) if hi <= lo else (v - lo) / (hi - lo)
    out[valid] = np.round(np.clip(v, 0.0, 1.0) * 255.0).astype(np.uint8)
    return out


def write_pgm(path, image: np.ndarray) -> None:
    if not cv2.imwrite(str(path), np.asarray(image, dtype=np.uint8)):
        raise OSError(f"could not write {path}")


def read_pgm(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise OSError(f"could not read {path}")
    return img


def load_dataset(root, d_min: float = 0.05, d_max: float = 20.0):
    """Frames under ``root/frames`` (sorted), ``poses.csv`` and ``camera.cfg``.

    Yields ``(index, DepthMap or None, Pose)``; unreadable frames give ``None``
    with a warning.  Raises if frame and pose counts differ.
    """
    root = Path(root)
    frames = sorted(p for p in (root / "frames").iterdir() if p.suffix.lower() in (".pfm", ".raw"))
    poses = read_poses(root / "poses.csv")
    if len(frames) != len(poses):
        raise ValueError(f"{root}: {len(frames)} frames but {len(poses)} poses")
    intr = read_camera(root / "camera.cfg")

    def gen():
        for i, (f, (_, pose)) in enumerate(zip(frames, poses)):
            try:
                d = read_depth(f, d_min, d_max)
                if d.shape != intr.shape:
                    raise ValueError(f"shape {d.shape} does not match camera {intr.shape}")
            except (OSError, ValueError) as exc:
                warnings.warn(f"skipping frame {f.name}: {exc}")
                d = None
            yield i, d, pose

    return intr, len(frames), gen()
