"""Synthetic depth rendering of analytic rubble scenes and ground-truth safe masks.

Scenes are built from primitives that admit closed-form ray intersection:
an infinite plane, axis-aligned boxes, spheres, and ramps (bounded inclined
rectangles).  Because every surface is analytic, the set of pixels where a
UAV could actually land is known exactly and serves as the oracle for the
detection pipeline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .core import CameraIntrinsics, DepthMap, Pose, uav_radius_pixels


@dataclass(frozen=True)
class Plane:
    """Infinite plane ``normal . x = offset``."""

    normal: tuple = (0.0, 0.0, 1.0)
    offset: float = 0.0
    kind = "plane"

    def unit_normal(self) -> np.ndarray:
        n = np.asarray(self.normal, dtype=np.float64)
        return n / np.linalg.norm(n)

    def intersect(self, origin, dirs):
        n = self.unit_normal()
        off = self.offset / np.linalg.norm(np.asarray(self.normal, dtype=np.float64))
        denom = dirs @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (off - origin @ n) / denom
        t[~np.isfinite(t)] = np.inf
        normals = np.broadcast_to(n, dirs.shape).copy()
        return t, normals

    def to_dict(self):
        return {"type": "plane", "normal": list(map(float, self.normal)), "offset": float(self.offset)}


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by centre and full edge lengths."""

    center: tuple
    size: tuple
    kind = "box"

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center, float) - np.asarray(self.size, float) / 2

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center, float) + np.asarray(self.size, float) / 2

    @property
    def top(self) -> float:
        return float(self.hi[2])

    def intersect(self, origin, dirs):
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (self.lo - origin) / dirs
            t2 = (self.hi - origin) / dirs
        tnear = np.minimum(t1, t2)
        tfar = np.maximum(t1, t2)
        tnear = np.where(np.isnan(tnear), -np.inf, tnear)
        tfar = np.where(np.isnan(tfar), np.inf, tfar)
        axis = np.argmax(tnear, axis=1)
        t_in = tnear[np.arange(len(dirs)), axis]
        t_out = tfar.min(axis=1)
        hit = (t_in <= t_out) & (t_in > 0)
        t = np.where(hit, t_in, np.inf)
        normals = np.zeros_like(dirs)
        rows = np.arange(len(dirs))
        normals[rows, axis] = -np.sign(dirs[rows, axis])
        return t, normals

    def footprint_distance(self, xy: np.ndarray, above=None) -> np.ndarray:
        lo, hi = self.lo[:2], self.hi[:2]
        d = np.maximum(np.maximum(lo - xy, xy - hi), 0.0)
        return np.linalg.norm(d, axis=-1)

    def face_clearance(self, points: np.ndarray, normals: np.ndarray) -> np.ndarray:
        lo, hi = self.lo, self.hi
        inner = np.minimum.reduce([points[:, 0] - lo[0], hi[0] - points[:, 0],
                                   points[:, 1] - lo[1], hi[1] - points[:, 1]])
        return np.where(normals[:, 2] > 0.5, inner, 0.0)

    def to_dict(self):
        return {"type": "box", "center": list(map(float, self.center)), "size": list(map(float, self.size))}


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    kind = "sphere"

    @property
    def top(self) -> float:
        return float(self.center[2]) + self.radius

    def intersect(self, origin, dirs):
        c = np.asarray(self.center, float)
        oc = origin - c
        a = np.einsum("ij,ij->i", dirs, dirs)
        b = 2.0 * dirs @ oc
        cc = oc @ oc - self.radius ** 2
        disc = b * b - 4 * a * cc
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        # stable root pair
        q = -0.5 * (b + np.copysign(sq, b))
        with np.errstate(divide="ignore", invalid="ignore"):
            r0 = q / a
            r1 = cc / q
        lo = np.minimum(r0, r1)
        hi = np.maximum(r0, r1)
        t = np.where(lo > 0, lo, np.where(hi > 0, hi, np.inf))
        t = np.where(hit, t, np.inf)
        pts = origin + t[:, None] * dirs
        with np.errstate(invalid="ignore"):
            normals = (pts - c) / self.radius
        return t, normals

    def footprint_distance(self, xy: np.ndarray, above=None) -> np.ndarray:
        """Horizontal distance to the part of the sphere higher than ``above``."""
        r = np.full(len(xy), float(self.radius))
        if above is not None:
            dz = np.maximum(np.asarray(above, float) - self.center[2], 0.0)
            r = np.sqrt(np.maximum(self.radius ** 2 - dz ** 2, 0.0))
        return np.maximum(np.linalg.norm(xy - np.asarray(self.center[:2], float), axis=-1) - r, 0.0)

    def face_clearance(self, points, normals, theta_th: float) -> np.ndarray:
        rho = np.linalg.norm(points[:, :2] - np.asarray(self.center[:2], float), axis=-1)
        return self.radius * math.sin(theta_th) - rho

    def to_dict(self):
        return {"type": "sphere", "center": list(map(float, self.center)), "radius": float(self.radius)}


@dataclass(frozen=True)
class Ramp:
    """Inclined rectangle ``size = (width, length)`` centred at ``center``.

    The rectangle is tilted by ``tilt`` radians about the world x axis and
    then yawed about z, so its normal is ``Rz(yaw) Rx(tilt) ez``.  With
    ``floor`` set the ramp is a solid block: vertical walls drop from the
    rectangle's edges down to ``z = floor``.  Without it the ramp is a thin
    floating slab.
    """

    center: tuple
    size: tuple
    tilt: float
    yaw: float = 0.0
    floor: float | None = None
    kind = "ramp"

    def frame(self) -> np.ndarray:
        """Columns: in-plane width axis, in-plane slope axis, normal."""
        return Rotation.from_euler("xz", [self.tilt, self.yaw]).as_matrix()

    def corners(self) -> np.ndarray:
        r = self.frame()
        hu, hv = self.size[0] / 2, self.size[1] / 2
        c = np.asarray(self.center, float)
        return np.array([c + su * hu * r[:, 0] + sv * hv * r[:, 1]
                         for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1))])

    @property
    def top(self) -> float:
        return float(self.corners()[:, 2].max())

    def _local(self, pts):
        r = self.frame()
        rel = pts - np.asarray(self.center, float)
        return rel @ r[:, 0], rel @ r[:, 1]

    def _halfspaces(self):
        """Outward normals and offsets ``n . x <= d`` of the solid block."""
        r = self.frame()
        c = np.asarray(self.center, float)
        u = r[:, 0]
        w = np.array([-math.sin(self.yaw), math.cos(self.yaw), 0.0])
        hu, hv = self.size[0] / 2, self.size[1] / 2
        hw = hv * math.cos(self.tilt)
        planes = [(r[:, 2], r[:, 2] @ c), (np.array([0.0, 0.0, -1.0]), -self.floor)]
        for axis, half in ((u, hu), (w, hw)):
            planes.append((axis, axis @ c + half))
            planes.append((-axis, -(axis @ c) + half))
        return planes

    def intersect(self, origin, dirs):
        if self.floor is not None:
            return _convex_intersect(self._halfspaces(), origin, dirs)
        r = self.frame()
        n = r[:, 2]
        c = np.asarray(self.center, float)
        denom = dirs @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((c - origin) @ n) / denom
        pts = origin + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs
        u, v = self._local(pts)
        inside = (np.abs(u) <= self.size[0] / 2) & (np.abs(v) <= self.size[1] / 2)
        t = np.where(inside & np.isfinite(t) & (t > 0), t, np.inf)
        normals = np.broadcast_to(n, dirs.shape).copy()
        return t, normals

    def footprint_distance(self, xy: np.ndarray, above=None) -> np.ndarray:
        """Horizontal distance to the part of the ramp higher than ``above``.

        Height varies only along the slope axis, so that part is a
        sub-rectangle ``v >= v_lo`` whose projection stays a rectangle.
        """
        hu, hv = self.size[0] / 2, self.size[1] / 2
        if above is None:
            v_lo = np.full(len(xy), -hv)
        else:
            dz = np.broadcast_to(np.asarray(above, float) - self.center[2], (len(xy),))
            s = math.sin(self.tilt)
            if abs(s) < 1e-12:
                v_lo = np.where(dz < 0, -hv, np.inf)
            else:
                # a negative tilt puts the high side at -v; mirror it
                v_lo = np.clip(dz / abs(s), -hv, None)
                v_lo[v_lo > hv] = np.inf
        c = math.cos(self.tilt)
        yaw = self.yaw
        rel = xy - np.asarray(self.center[:2], float)
        along_u = rel @ np.array([math.cos(yaw), math.sin(yaw)])
        along_v = rel @ np.array([-math.sin(yaw), math.cos(yaw)])
        if math.sin(self.tilt) < 0:
            along_v = -along_v
        du = np.maximum(np.abs(along_u) - hu, 0.0)
        with np.errstate(invalid="ignore"):
            dv = np.maximum(np.maximum(v_lo * c - along_v, along_v - hv * c), 0.0)
        out = np.hypot(du, dv)
        out[~np.isfinite(v_lo)] = np.inf
        return out

    def face_clearance(self, points, normals) -> np.ndarray:
        u, v = self._local(points)
        inner = np.minimum(self.size[0] / 2 - np.abs(u), self.size[1] / 2 - np.abs(v))
        on_top = np.abs(normals @ self.frame()[:, 2]) > 1 - 1e-9
        return np.where(on_top, inner, 0.0)

    def to_dict(self):
        d = {"type": "ramp", "center": list(map(float, self.center)), "size": list(map(float, self.size)),
             "tilt_deg": math.degrees(self.tilt), "yaw_deg": math.degrees(self.yaw)}
        if self.floor is not None:
            d["floor"] = float(self.floor)
        return d


def _convex_intersect(planes, origin, dirs):
    """Ray entry into the intersection of half-spaces ``n . x <= d``."""
    t_in = np.full(len(dirs), -np.inf)
    t_out = np.full(len(dirs), np.inf)
    normals = np.zeros_like(dirs)
    outside = np.zeros(len(dirs), dtype=bool)
    for n, d in planes:
        denom = dirs @ n
        num = d - origin @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
        entering = denom < 0
        later = entering & (t > t_in)
        t_in[later] = t[later]
        normals[later] = n
        leaving = denom > 0
        t_out = np.where(leaving, np.minimum(t_out, t), t_out)
        outside |= (denom == 0) & (num < 0)
    hit = ~outside & (t_in <= t_out) & (t_in > 0)
    return np.where(hit, t_in, np.inf), normals


Primitive = Plane | Box | Sphere | Ramp


@dataclass(frozen=True)
class Scene:
    primitives: tuple = field(default_factory=tuple)

    def __post_init__(self):
        prims = tuple(self.primitives)
        if not any(isinstance(p, Plane) for p in prims):
            raise ValueError("a scene needs at least one ground plane")
        object.__setattr__(self, "primitives", prims)

    def to_dict(self) -> dict:
        return {"primitives": [p.to_dict() for p in self.primitives]}

    @classmethod
    def from_dict(cls, data: dict) -> "Scene":
        return cls(tuple(primitive_from_dict(p) for p in data["primitives"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Scene":
        return cls.from_dict(json.loads(Path(path).read_text()))


def primitive_from_dict(d: dict) -> Primitive:
    kind = d["type"]
    if kind == "plane":
        return Plane(tuple(d.get("normal", (0, 0, 1))), float(d.get("offset", 0.0)))
    if kind == "box":
        return Box(tuple(d["center"]), tuple(d["size"]))
    if kind == "sphere":
        return Sphere(tuple(d["center"]), float(d["radius"]))
    if kind == "ramp":
        tilt = math.radians(d["tilt_deg"]) if "tilt_deg" in d else float(d["tilt"])
        yaw = math.radians(d["yaw_deg"]) if "yaw_deg" in d else float(d.get("yaw", 0.0))
        floor = d.get("floor")
        return Ramp(tuple(d["center"]), tuple(d["size"]), tilt, yaw, None if floor is None else float(floor))
    raise ValueError(f"unknown primitive type {kind!r}")


@dataclass(frozen=True)
class NoiseModel:
    """Axial noise with standard deviation ``coeff * depth**2`` plus random dropout."""

    coeff: float = 0.001
    dropout: float = 0.0

    def __post_init__(self):
        if self.coeff < 0:
            raise ValueError("noise coefficient must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


NO_NOISE = NoiseModel(0.0, 0.0)


@dataclass
class RayHits:
    """Per-pixel nearest intersection, flattened row-major."""

    depth: np.ndarray      # z-depth, inf on miss
    index: np.ndarray      # primitive index, -1 on miss
    points: np.ndarray     # world hit points
    normals: np.ndarray    # world normals facing the camera
    shape: tuple


def cast_rays(scene: Scene, pose: Pose, intr: CameraIntrinsics) -> RayHits:
    sx, sy = intr.pixel_grid()
    cam_dirs = np.stack([sx.ravel(), sy.ravel(), np.ones(sx.size)], axis=1)
    dirs = cam_dirs @ pose.matrix.T
    origin = pose.translation
    best_t = np.full(len(dirs), np.inf)
    best_i = np.full(len(dirs), -1)
    best_n = np.zeros_like(dirs)
    for i, prim in enumerate(scene.primitives):
        t, n = prim.intersect(origin, dirs)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_i[closer] = i
        best_n[closer] = n[closer]
    facing = np.einsum("ij,ij->i", best_n, dirs) > 0
    best_n[facing] *= -1
    pts = origin + np.where(np.isfinite(best_t), best_t, 0.0)[:, None] * dirs
    # unit z component in camera frame makes the ray parameter the z-depth
    return RayHits(best_t, best_i, pts, best_n, intr.shape)


def render_depth(scene: Scene, pose: Pose, intr: CameraIntrinsics, noise: NoiseModel = NO_NOISE,
                 seed: int = 0, d_min: float = 0.05, d_max: float = 20.0) -> DepthMap:
    hits = cast_rays(scene, pose, intr)
    d = hits.depth.copy()
    rng = np.random.default_rng(seed)
    if noise.coeff > 0:
        d = d + rng.standard_normal(d.shape) * noise.coeff * np.square(np.where(np.isfinite(d), d, 0.0))
    if noise.dropout > 0:
        d[rng.random(d.shape) < noise.dropout] = np.nan
    return DepthMap(d.reshape(intr.shape), d_min, d_max)


def safe_mask(scene: Scene, pose: Pose, intr: CameraIntrinsics, uav_radius: float = 0.26,
              theta_th: float = math.radians(15.0), d_min: float = 0.05, d_max: float = 20.0) -> np.ndarray:
    """Analytic ground-truth landing mask for a noise-free render.

    A pixel is safe when its (unoccluded) surface point has slope at most
    ``theta_th``; the horizontal disk of ``uav_radius`` around it stays on
    the same face (for spheres: inside the cap with acceptable slope); no
    other primitive reaching above the disk's lowest point has its footprint
    within ``uav_radius``; and the projected disk fits inside the image.
    """
    hits = cast_rays(scene, pose, intr)
    n = hits.depth.size
    valid = np.isfinite(hits.depth) & (hits.depth >= d_min) & (hits.depth <= d_max)
    slope = np.arccos(np.clip(hits.normals[:, 2], -1.0, 1.0))
    ok = valid & (slope <= theta_th + 1e-12)

    clearance = np.full(n, np.inf)
    for i, prim in enumerate(scene.primitives):
        sel = hits.index == i
        if not sel.any() or isinstance(prim, Plane):
            continue
        if isinstance(prim, Sphere):
            clearance[sel] = prim.face_clearance(hits.points[sel], hits.normals[sel], theta_th)
        else:
            clearance[sel] = prim.face_clearance(hits.points[sel], hits.normals[sel])
    ok &= clearance >= uav_radius

    xy = hits.points[:, :2]
    # lowest point of the landing disk tilted with the surface; anything
    # whose top stays below it cannot touch the disk
    ref = hits.points[:, 2] - uav_radius * np.sin(np.minimum(slope, theta_th))
    for i, prim in enumerate(scene.primitives):
        if isinstance(prim, Plane):
            continue
        other = hits.index != i
        rises = prim.top > ref
        near = prim.footprint_distance(xy, ref) < uav_radius
        ok &= ~(other & rises & near)

    h, w = intr.shape
    ys, xs = np.divmod(np.arange(n), w)
    border = np.minimum.reduce([xs, ys, w - 1 - xs, h - 1 - ys]).astype(np.float64)
    depth = np.where(valid, hits.depth, 1.0)
    ok &= border >= uav_radius_pixels(uav_radius, depth, intr)
    return ok.reshape(h, w)


# -- scene presets -----------------------------------------------------------

def bare_plane() -> Scene:
    return Scene((Plane(),))


def tilted_plane(angle: float) -> Scene:
    """Ground plane through the origin, inclined by ``angle`` about world x."""
    return Scene((Plane((0.0, -math.sin(angle), math.cos(angle)), 0.0),))


def ledge_scene(half_width: float, height: float) -> Scene:
    """Square raised ledge centred on the origin, standing on the ground plane."""
    return Scene((Plane(), Box((0.0, 0.0, height / 2), (2 * half_width, 2 * half_width, height))))


def random_scene(seed: int, n_objects: tuple[int, int] = (3, 8), extent: float = 6.0) -> Scene:
    """Ground plane plus a random mix of boxes, solid ramps and sphere mounds.

    Objects never overhang the ground: ramps are solid blocks whose low edge
    stands at least 0.3 m high, spheres are sunk by 0-80 % of their radius.
    """
    rng = np.random.default_rng(seed)
    prims: list = [Plane()]
    for _ in range(int(rng.integers(n_objects[0], n_objects[1] + 1))):
        kind = rng.choice(["box", "ramp", "sphere"], p=[0.5, 0.25, 0.25])
        cx, cy = rng.uniform(-extent, extent, size=2)
        if kind == "box":
            sx, sy = rng.uniform(0.6, 3.0, size=2)
            sz = rng.uniform(0.4, 2.0)
            prims.append(Box((cx, cy, sz / 2), (sx, sy, sz)))
        elif kind == "ramp":
            w, l = rng.uniform(1.5, 4.0, size=2)
            tilt = math.radians(rng.uniform(0.0, 40.0))
            base = rng.uniform(0.3, 1.0)
            cz = base + 0.5 * l * math.sin(tilt)
            prims.append(Ramp((cx, cy, cz), (w, l), tilt, rng.uniform(0, 2 * math.pi), floor=0.0))
        else:
            r = rng.uniform(0.5, 2.0)
            prims.append(Sphere((cx, cy, -rng.uniform(0.0, 0.8) * r), r))
    return Scene(tuple(prims))
