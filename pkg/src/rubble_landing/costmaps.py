"""Per-pixel hazard costmaps and their fusion into the decision map."""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .core import CameraIntrinsics, Costmap, DepthMap, Pose
from .edt import distance_transform
from .errors import EmptyDepthError, ShapeMismatchError

_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class CostmapWeights:
    """Weights of depth confidence, flatness, steepness and energy."""

    c1: float = 0.05
    c2: float = 0.4
    c3: float = 0.4
    c4: float = 0.15

    def __post_init__(self):
        ws = self.as_tuple()
        if any(not 0.0 <= c <= 1.0 for c in ws):
            raise ValueError(f"weights must lie in [0, 1]: {ws}")
        if abs(sum(ws) - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1, got {sum(ws)!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.c1, self.c2, self.c3, self.c4)


@dataclass(frozen=True)
class SteepnessParams:
    theta_th: float = math.radians(15.0)
    window: int = 5

    def __post_init__(self):
        if not 0.0 < self.theta_th < math.pi / 2:
            raise ValueError("theta_th must lie in (0, pi/2)")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("smoothing window must be an odd integer >= 3")


@dataclass(frozen=True)
class EdgeParams:
    """Canny settings for the depth map rescaled to 8 bit.

    The depth is blurred with ``sigma`` (pixels), then the frame's valid
    range is mapped to 0..255, but never a range narrower than
    ``min_span`` metres, so sensor noise on a flat frame is not stretched
    into false edges.
    """

    low: float = 30.0
    high: float = 90.0
    sigma: float = 1.0
    min_span: float = 1.0

    def __post_init__(self):
        if not 0 <= self.low < self.high <= 255:
            raise ValueError("need 0 <= low < high <= 255")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.min_span < 0:
            raise ValueError("min_span must be non-negative")


def depth_confidence(depth: DepthMap) -> Costmap:
    valid = depth.valid
    if not valid.any():
        raise EmptyDepthError("depth map has no valid pixel")
    d2 = np.square(depth.data)
    lo, hi = np.nanmin(d2), np.nanmax(d2)
    return Costmap(1.0 - (d2 - lo) / hi, "depth_confidence")


def depth_to_u8(depth: DepthMap, min_span: float = 0.0, sigma: float = 0.0) -> np.ndarray:
    """Blur, then rescale ``[min, min + max(range, min_span)]`` to 0..255; invalid pixels map to 255."""
    d = depth.data
    valid = depth.valid
    out = np.full(d.shape, 255, dtype=np.uint8)
    if not valid.any():
        return out
    lo, hi = np.nanmin(d), np.nanmax(d)
    span = max(hi - lo, min_span)
    if span <= 0:
        out[valid] = 0
        return out
    f = np.where(valid, d, lo).astype(np.float32)
    if sigma > 0:
        f = cv2.GaussianBlur(f, (0, 0), sigma)
    scaled = np.clip(np.rint((f - lo) * (255.0 / span)), 0, 255)
    out[valid] = scaled[valid].astype(np.uint8)
    return out


def depth_edges(depth: DepthMap, params: EdgeParams = EdgeParams()) -> np.ndarray:
    """Binary map of depth discontinuities, invalid pixels and the image border."""
    img = depth_to_u8(depth, params.min_span, params.sigma)
    edges = cv2.Canny(img, params.low, params.high, L2gradient=True) > 0
    edges |= ~depth.valid
    edges[0, :] = edges[-1, :] = True
    edges[:, 0] = edges[:, -1] = True
    return edges


def flatness(depth: DepthMap, params: EdgeParams = EdgeParams()) -> Costmap:
    """Distance in pixels to the nearest edge pixel; zero on edges and invalid pixels."""
    dist = distance_transform(depth_edges(depth, params))
    return Costmap(dist, "flatness")


def _window_mean(img: np.ndarray, window: int) -> np.ndarray:
    return cv2.blur(img, (window, window), borderType=cv2.BORDER_REPLICATE)


def surface_normals(depth: DepthMap, intr: CameraIntrinsics, pose: Pose, window: int = 5) -> np.ndarray:
    """World-frame unit normals (H, W, 3) from window-averaged 3-D point gradients.

    Gradients are central differences of the world point image, averaged
    over a ``window`` x ``window`` neighbourhood.  A pixel is NaN whenever
    its support (window plus the difference stencil) touches an invalid
    depth or leaves the image.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    pts = depth.world_points(intr, pose)
    valid = depth.valid
    filled = np.where(valid[..., None], pts, 0.0)

    gx = np.zeros_like(filled)
    gy = np.zeros_like(filled)
    gx[:, 1:-1] = filled[:, 2:] - filled[:, :-2]
    gy[1:-1, :] = filled[2:, :] - filled[:-2, :]
    gx = _window_mean(gx.astype(np.float64), window)
    gy = _window_mean(gy.astype(np.float64), window)
    n = np.cross(gx, gy)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = n / norm
    n = np.where(n[..., 2:3] < 0, -n, n)

    support = window + 2
    bad = _window_mean((~valid).astype(np.float64), support) > 0
    half = support // 2
    bad[:half, :] = bad[-half:, :] = True
    bad[:, :half] = bad[:, -half:] = True
    bad |= norm[..., 0] == 0
    n[bad] = np.nan
    return n


def slope_angles(normals: np.ndarray) -> np.ndarray:
    """Angle (radians) between each normal and world +z."""
    return np.arccos(np.clip(normals[..., 2], -1.0, 1.0))


def steepness_score(theta, theta_th: float):
    return np.exp(-np.square(theta) / (2.0 * theta_th * theta_th))


def steepness(depth: DepthMap, intr: CameraIntrinsics, pose: Pose,
              params: SteepnessParams = SteepnessParams()) -> Costmap:
    theta = slope_angles(surface_normals(depth, intr, pose, params.window))
    return Costmap(steepness_score(theta, params.theta_th), "steepness")


def energy(depth: DepthMap, intr: CameraIntrinsics) -> Costmap:
    """Straight-line distance (m) from the camera centre to each pixel's 3-D point."""
    pts = depth.camera_points(intr)
    return Costmap(np.linalg.norm(pts, axis=-1), "energy")


def minmax_normalize(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Min-max scale over ``valid``; a constant map becomes all ones."""
    out = np.full(values.shape, np.nan)
    if not valid.any():
        return out
    v = values[valid]
    lo, hi = v.min(), v.max()
    out[valid] = 1.0 if hi <= lo else (v - lo) / (hi - lo)
    return out


def combine(jde: Costmap, jfl: Costmap, jn: Costmap, jec: Costmap,
            weights: CostmapWeights = CostmapWeights()) -> Costmap:
    """Weighted decision map; the energy map is normalised then inverted."""
    maps = (jde, jfl, jn, jec)
    if len({m.shape for m in maps}) != 1:
        raise ShapeMismatchError("costmaps differ in shape: " + ", ".join(str(m.shape) for m in maps))
    valid = jde.valid & jfl.valid & jn.valid & jec.valid
    c1, c2, c3, c4 = weights.as_tuple()
    de = minmax_normalize(jde.data, valid)
    fl = minmax_normalize(jfl.data, valid)
    ec = 1.0 - minmax_normalize(jec.data, valid)
    j = c1 * de + c2 * fl + c3 * jn.data + c4 * ec
    j[~valid] = np.nan
    # rounding can push a convex combination of unit scores a hair past 1
    np.clip(j, 0.0, 1.0, out=j)
    return Costmap(j, "decision")
