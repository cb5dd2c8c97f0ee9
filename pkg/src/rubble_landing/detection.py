"""Dense per-frame landing-site candidates from the decision map."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import cv2
import numpy as np

from .core import CameraIntrinsics, Costmap, DepthMap, Pose, pixel_to_world, uav_radius_pixels
from .edt import distance_transform
from .errors import ShapeMismatchError

# steepness score of a slope exactly at the tolerated maximum, exp(-1/2)
SLOPE_LIMIT_SCORE = math.exp(-0.5)


@dataclass(frozen=True)
class DetectionParams:
    score_threshold: float = 0.72
    uav_radius: float = 0.26
    nms_radius: float | None = None
    footprint_margin_px: float = 1.0
    # reach of the normal estimator (gradient stencil plus smoothing half-width)
    slope_blur_px: float = 3.0

    def __post_init__(self):
        if not 0.0 < self.score_threshold < 1.0:
            raise ValueError("score threshold must lie in (0, 1)")
        if self.uav_radius <= 0:
            raise ValueError("UAV radius must be positive")
        if self.nms_radius is not None and self.nms_radius < 0:
            raise ValueError("suppression radius must be non-negative")


@dataclass(frozen=True)
class CandidateSite:
    pixel: tuple[int, int]
    depth: float
    world: np.ndarray
    score: float
    flatness_radius_px: float

    def to_record(self, frame: int) -> dict:
        x, y, z = (float(v) for v in self.world)
        return {"frame": frame, "px": int(self.pixel[0]), "py": int(self.pixel[1]),
                "depth_m": float(self.depth), "x": x, "y": y, "z": z, "score": float(self.score)}


def slope_clearance(steepness: Costmap, flatness_raw: Costmap | None = None,
                    blur_px: float = 0.0) -> np.ndarray:
    """Pixel distance to the nearest too-steep, invalid or border pixel.

    With ``flatness_raw`` given, steep or unestimated pixels within
    ``blur_px`` of a depth edge or invalid pixel are ignored: they are
    artifacts of that discontinuity, which the flatness test already covers.
    """
    steep = ~(steepness.data >= SLOPE_LIMIT_SCORE)
    if flatness_raw is not None:
        steep &= flatness_raw.data > blur_px
    steep[0, :] = steep[-1, :] = True
    steep[:, 0] = steep[:, -1] = True
    return distance_transform(steep)


def local_maxima(values: np.ndarray, radius: float) -> np.ndarray:
    """Pixels equal to the maximum of ``values`` within a disk of ``radius``."""
    r = int(math.floor(radius))
    filled = np.where(np.isfinite(values), values, -np.inf)
    if r < 1:
        return np.isfinite(values)
    kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (2 * r + 1, 2 * r + 1))
    peak = cv2.dilate(filled, kernel, borderType=cv2.BORDER_CONSTANT, borderValue=-np.inf)
    return np.isfinite(values) & (filled >= peak)


def detect_dense_sites(decision: Costmap, flatness_raw: Costmap, depth: DepthMap,
                       intr: CameraIntrinsics, pose: Pose, params: DetectionParams = DetectionParams(),
                       steepness: Costmap | None = None) -> list[CandidateSite]:
    """Threshold, footprint-filter and thin the decision map.

    A pixel becomes a site when its decision score reaches the threshold,
    its flatness radius covers the projected UAV radius plus
    ``footprint_margin_px``, and it is a local maximum of the decision map
    within the suppression radius.  If the steepness map is supplied, the
    footprint must also be free of pixels steeper than the tolerated slope,
    except those within ``slope_blur_px`` of a depth edge.
    Sites are ordered by decreasing score, ties in row-major order.
    """
    shapes = {decision.shape, flatness_raw.shape, depth.shape, intr.shape}
    if steepness is not None:
        shapes.add(steepness.shape)
    if len(shapes) != 1:
        raise ShapeMismatchError(f"inputs disagree in shape: {sorted(shapes)}")

    valid = decision.valid & depth.valid
    if not valid.any():
        return []
    d = np.where(valid, depth.data, 1.0)
    need = uav_radius_pixels(params.uav_radius, d, intr) + params.footprint_margin_px

    keep = valid & (decision.data >= params.score_threshold)
    keep &= flatness_raw.data >= need
    if steepness is not None and keep.any():
        keep &= slope_clearance(steepness, flatness_raw, params.slope_blur_px) >= need
    if not keep.any():
        return []

    nms = params.nms_radius
    if nms is None:
        nms = uav_radius_pixels(params.uav_radius, float(np.median(depth.data[valid])), intr)
    keep &= local_maxima(np.where(valid, decision.data, np.nan), nms)

    rows, cols = np.nonzero(keep)
    scores = decision.data[rows, cols]
    order = np.lexsort((cols, rows, -scores))
    sites = []
    for i in order:
        y, x = int(rows[i]), int(cols[i])
        z = float(depth.data[y, x])
        world = pixel_to_world((x, y), z, intr, pose, depth.d_min, depth.d_max)
        sites.append(CandidateSite((x, y), z, world, float(scores[i]), float(flatness_raw.data[y, x])))
    return sites


def write_sites_jsonl(path, frames: list[tuple[int, list[CandidateSite]]]) -> None:
    with open(path, "w") as fh:
        for frame, sites in frames:
            for s in sites:
                fh.write(json.dumps(s.to_record(frame), sort_keys=True) + "\n")
