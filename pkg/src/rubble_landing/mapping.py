"""Sparse probabilistic occupancy grid built from posed depth frames.

Voxel ``(i, j, k)`` covers ``[i, i+1) x [j, j+1) x [k, k+1)`` times the
resolution.  Occupancy is kept as clamped log-odds; voxels never observed
are absent from the store.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .core import CameraIntrinsics, DepthMap, Pose


def logodds(p: float) -> float:
    return math.log(p / (1.0 - p))


@njit(cache=True)
def _traverse(a, b, res, out):
    """Amanatides-Woo walk from a to b; writes voxel indices, returns count."""
    cur = np.empty(3, dtype=np.int64)
    end = np.empty(3, dtype=np.int64)
    step = np.zeros(3, dtype=np.int64)
    t_max = np.full(3, np.inf)
    d = b - a
    for k in range(3):
        cur[k] = int(np.floor(a[k] / res))
        end[k] = int(np.floor(b[k] / res))
        if d[k] > 0:
            step[k] = 1
            t_max[k] = ((cur[k] + 1) * res - a[k]) / d[k]
        elif d[k] < 0:
            step[k] = -1
            t_max[k] = (cur[k] * res - a[k]) / d[k]
    n = 0
    limit = out.shape[0]
    while n < limit:
        out[n, 0] = cur[0]
        out[n, 1] = cur[1]
        out[n, 2] = cur[2]
        n += 1
        if cur[0] == end[0] and cur[1] == end[1] and cur[2] == end[2]:
            break
        # only axes still short of the end voxel may step, which keeps
        # rounding near a face from walking past the end
        k = -1
        for j in range(3):
            if cur[j] != end[j] and (k < 0 or t_max[j] < t_max[k]):
                k = j
        cur[k] += step[k]
        # recomputed rather than accumulated so a segment ending exactly on
        # a voxel face still reaches the end voxel
        t_max[k] = ((cur[k] + (step[k] > 0)) * res - a[k]) / d[k]
    return n


def traverse(a, b, resolution: float) -> np.ndarray:
    """Voxel indices visited by the segment ``a -> b`` in order, both ends included."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    bound = int(np.sum(np.abs(np.floor(b / resolution) - np.floor(a / resolution)))) + 2
    out = np.empty((bound, 3), dtype=np.int64)
    n = _traverse(a, b, float(resolution), out)
    return out[:n]


@njit(cache=True)
def _traverse_many(origin, ends, res, origin_voxel, hit_out, miss_out, miss_cap):
    buf = np.empty((miss_cap, 3), dtype=np.int64)
    n_miss = 0
    for r in range(ends.shape[0]):
        n = _traverse(origin, ends[r], res, buf)
        hit_out[r, 0] = buf[n - 1, 0]
        hit_out[r, 1] = buf[n - 1, 1]
        hit_out[r, 2] = buf[n - 1, 2]
        for i in range(n - 1):
            if buf[i, 0] == origin_voxel[0] and buf[i, 1] == origin_voxel[1] and buf[i, 2] == origin_voxel[2]:
                continue
            if n_miss < miss_out.shape[0]:
                miss_out[n_miss, 0] = buf[i, 0]
                miss_out[n_miss, 1] = buf[i, 1]
                miss_out[n_miss, 2] = buf[i, 2]
                n_miss += 1
    return n_miss


_BITS = 21
_OFF = 1 << (_BITS - 1)
_MASK = (1 << _BITS) - 1


def _pack(idx: np.ndarray) -> np.ndarray:
    """Voxel indices (|i| < 2**20) to sortable int64 keys."""
    v = np.asarray(idx, dtype=np.int64).reshape(-1, 3) + _OFF
    return (v[:, 0] << (2 * _BITS)) | (v[:, 1] << _BITS) | v[:, 2]


def _unpack(keys: np.ndarray) -> list[tuple[int, int, int]]:
    k = np.asarray(keys, dtype=np.int64)
    cols = np.stack([(k >> (2 * _BITS)) & _MASK, (k >> _BITS) & _MASK, k & _MASK], axis=1) - _OFF
    return [tuple(r) for r in cols.tolist()]


def _point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = ab @ ab
    ap = points - a
    if denom == 0:
        return np.linalg.norm(ap, axis=1)
    s = np.clip(ap @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(ap - s[:, None] * ab, axis=1)


class OccupancyGrid:
    def __init__(self, resolution: float = 0.5, p_hit: float = 0.7, p_miss: float = 0.4,
                 p_min: float = 0.12, p_max: float = 0.97, unknown_is_free: bool = True):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self.hit = logodds(p_hit)
        self.miss = logodds(p_miss)
        self.clamp_min = logodds(p_min)
        self.clamp_max = logodds(p_max)
        self.unknown_is_free = unknown_is_free
        self.voxels: dict[tuple[int, int, int], float] = {}
        self._cache = None

    def __len__(self) -> int:
        return len(self.voxels)

    def copy(self) -> "OccupancyGrid":
        g = OccupancyGrid.__new__(OccupancyGrid)
        g.__dict__.update(self.__dict__)
        g.voxels = dict(self.voxels)
        g._cache = None
        return g

    def voxel_index(self, point) -> tuple[int, int, int]:
        i = np.floor(np.asarray(point, dtype=np.float64) / self.resolution).astype(np.int64)
        return (int(i[0]), int(i[1]), int(i[2]))

    def voxel_center(self, index) -> np.ndarray:
        return (np.asarray(index, dtype=np.float64) + 0.5) * self.resolution

    def log_odds(self, index) -> float | None:
        return self.voxels.get(tuple(index))

    def probability(self, index) -> float | None:
        lo = self.voxels.get(tuple(index))
        return None if lo is None else 1.0 / (1.0 + math.exp(-lo))

    def _update(self, index, delta: float) -> None:
        v = self.voxels.get(index, 0.0) + delta
        self.voxels[index] = min(self.clamp_max, max(self.clamp_min, v))

    def update_voxels(self, hits: np.ndarray, misses: np.ndarray) -> None:
        """One measurement update; a voxel both hit and missed counts as hit."""
        hit_keys = np.unique(_pack(hits))
        miss_keys = np.setdiff1d(np.unique(_pack(misses)), hit_keys, assume_unique=True)
        for key in _unpack(miss_keys):
            self._update(key, self.miss)
        for key in _unpack(hit_keys):
            self._update(key, self.hit)
        self._cache = None

    def integrate_rays(self, origin, endpoints: np.ndarray) -> None:
        """Miss every voxel between ``origin`` and each endpoint, hit the endpoint voxel.

        The voxel containing the sensor itself is left untouched.
        """
        ends = np.ascontiguousarray(endpoints, dtype=np.float64).reshape(-1, 3)
        if len(ends) == 0:
            return
        o = np.asarray(origin, dtype=np.float64)
        res = self.resolution
        spans = np.abs(np.floor(ends / res) - np.floor(o / res)).sum(axis=1)
        cap = int(spans.max()) + 2
        hits = np.empty((len(ends), 3), dtype=np.int64)
        misses = np.empty((int(spans.sum()) + 2 * len(ends), 3), dtype=np.int64)
        origin_voxel = np.floor(o / res).astype(np.int64)
        n = _traverse_many(o, ends, res, origin_voxel, hits, misses, cap)
        self.update_voxels(hits, misses[:n])

    def integrate_depth(self, depth: DepthMap, pose: Pose, intr: CameraIntrinsics, subsample: int = 4) -> None:
        if subsample < 1:
            raise ValueError("subsample stride must be >= 1")
        pts = depth.world_points(intr, pose)[::subsample, ::subsample].reshape(-1, 3)
        pts = pts[np.all(np.isfinite(pts), axis=1)]
        self.integrate_rays(pose.translation, pts)

    def mark_occupied(self, points) -> None:
        """Set the voxels containing ``points`` to the maximum log-odds."""
        for p in np.asarray(points, dtype=np.float64).reshape(-1, 3):
            self.voxels[self.voxel_index(p)] = self.clamp_max
        self._cache = None

    def fill_box(self, lo, hi) -> None:
        """Mark every voxel whose centre lies inside the axis-aligned box as occupied."""
        res = self.resolution
        rng = [np.arange(math.ceil(l / res - 0.5), math.floor(h / res - 0.5) + 1)
               for l, h in zip(lo, hi)]
        for i in rng[0]:
            for j in rng[1]:
                for k in rng[2]:
                    self.voxels[(int(i), int(j), int(k))] = self.clamp_max
        self._cache = None

    def occupied_centers(self) -> np.ndarray:
        if self._cache is None:
            idx = np.array([k for k, v in self.voxels.items() if v > 0], dtype=np.float64).reshape(-1, 3)
            centers = (idx + 0.5) * self.resolution
            tree = cKDTree(centers) if len(centers) > 4096 else None
            self._cache = (centers, tree)
        return self._cache[0]

    def is_collision_free(self, a, b, clearance: float = 0.0) -> bool:
        """True iff no occupied voxel centre lies within ``clearance`` of segment ab."""
        if clearance < 0:
            raise ValueError("clearance must be non-negative")
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if not self.unknown_is_free:
            for v in traverse(a, b, self.resolution):
                if tuple(int(x) for x in v) not in self.voxels:
                    return False
        centers = self.occupied_centers()
        if len(centers) == 0:
            return True
        tree = self._cache[1]
        if tree is None:
            cand = centers
        else:
            length = float(np.linalg.norm(b - a))
            spacing = max(self.resolution, clearance, 1e-9)
            n = max(int(math.ceil(length / spacing)), 1)
            samples = a + np.linspace(0.0, 1.0, n + 1)[:, None] * (b - a)
            # every centre within clearance of the segment is within
            # clearance + spacing/2 of some sample
            hits = tree.query_ball_point(samples, clearance + spacing / 2 + 1e-9)
            ids = sorted({i for lst in hits for i in lst})
            if not ids:
                return True
            cand = centers[ids]
        return bool(np.all(_point_segment_distance(cand, a, b) > clearance))

    def to_text(self) -> str:
        lines = [f"resolution {self.resolution!r}"]
        for key in sorted(self.voxels):
            lines.append(f"{key[0]} {key[1]} {key[2]} {self.voxels[key]!r}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str, **kwargs) -> "OccupancyGrid":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if head[0] != "resolution":
            raise ValueError("occupancy file must start with a resolution header")
        grid = cls(float(head[1]), **kwargs)
        for ln in lines[1:]:
            i, j, k, v = ln.split()
            grid.voxels[(int(i), int(j), int(k))] = float(v)
        return grid

    @classmethod
    def load(cls, path, **kwargs) -> "OccupancyGrid":
        return cls.from_text(Path(path).read_text(), **kwargs)
