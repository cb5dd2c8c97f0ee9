"""Camera model, poses, depth maps, score maps and pixel/world projections.

Conventions used throughout the package:

* Pixels are addressed as ``(x, y)`` = (column, row); pixel centres sit on
  integer coordinates.  Arrays are indexed ``[row, col]``.
* The camera frame is x-right, y-down, z-forward (optical axis).  Depth is
  z-depth: the distance along the optical axis, not the ray length.
* Poses map camera coordinates into the world frame, whose z axis points up.
* Invalid depth pixels are stored as NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidDepthError, OutOfBoundsError

_QUAT_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")

    @classmethod
    def centered(cls, width: int, height: int, fx: float, fy: float | None = None) -> "CameraIntrinsics":
        """Pinhole camera with the principal point at the image centre."""
        return cls(fx, fx if fy is None else fy, (width - 1) / 2.0, (height - 1) / 2.0, width, height)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def contains(self, x: float, y: float) -> bool:
        return 0 <= x <= self.width - 1 and 0 <= y <= self.height - 1

    def pixel_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Normalised ray slopes ``((x-cx)/fx, (y-cy)/fy)`` for every pixel."""
        xs = (np.arange(self.width, dtype=np.float64) - self.cx) / self.fx
        ys = (np.arange(self.height, dtype=np.float64) - self.cy) / self.fy
        return np.broadcast_to(xs[None, :], self.shape), np.broadcast_to(ys[:, None], self.shape)


def _normalize_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(4)
    return q / np.linalg.norm(q)


@dataclass(frozen=True)
class Pose:
    """Rigid transform camera -> world; ``rotation`` is a unit quaternion (w, x, y, z)."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        q = np.array(self.rotation, dtype=np.float64).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > _QUAT_TOL:
            raise ValueError("rotation quaternion must have unit norm")
        t.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", q)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_matrix(cls, rotation: np.ndarray, translation=(0.0, 0.0, 0.0)) -> "Pose":
        x, y, z, w = Rotation.from_matrix(np.asarray(rotation, dtype=np.float64)).as_quat()
        return cls(translation, _normalize_quat([w, x, y, z]))

    @classmethod
    def looking_down(cls, position, yaw: float = 0.0, pitch: float = 0.0, roll: float = 0.0) -> "Pose":
        """Camera at ``position`` with its optical axis along world -z.

        The nadir orientation is premultiplied by ``Rx(pitch) Ry(roll) Rz(yaw)``
        (world axes, radians).
        """
        down = np.diag([1.0, -1.0, -1.0])
        tilt = Rotation.from_euler("zyx", [yaw, roll, pitch]).as_matrix()
        return cls.from_matrix(tilt @ down, position)

    @property
    def matrix(self) -> np.ndarray:
        w, x, y, z = self.rotation
        return Rotation.from_quat([x, y, z, w]).as_matrix()

    def compose(self, other: "Pose") -> "Pose":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        r = self.matrix @ other.matrix
        return Pose.from_matrix(r, self.matrix @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        rt = self.matrix.T
        return Pose.from_matrix(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points (..., 3) from the camera frame to the world frame."""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.matrix.T + self.translation


@dataclass(frozen=True)
class DepthMap:
    """Row-major z-depth raster in metres.

    Values outside ``[d_min, d_max]`` (and NaN/inf) are stored as NaN, the
    invalid marker.  The array is read-only after construction.
    """

    data: np.ndarray
    d_min: float = 0.05
    d_max: float = 20.0

    def __post_init__(self):
        if not self.d_min < self.d_max:
            raise ValueError("d_min must be smaller than d_max")
        d = np.array(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("depth data must be 2-D")
        with np.errstate(invalid="ignore"):
            bad = ~np.isfinite(d) | (d < self.d_min) | (d > self.d_max)
        d[bad] = np.nan
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.data)

    def camera_points(self, intr: CameraIntrinsics) -> np.ndarray:
        """Back-project every pixel into the camera frame, (H, W, 3); NaN where invalid."""
        _check_shape(self, intr)
        sx, sy = intr.pixel_grid()
        d = self.data
        return np.stack([sx * d, sy * d, d], axis=-1)

    def world_points(self, intr: CameraIntrinsics, pose: Pose) -> np.ndarray:
        return pose.apply(self.camera_points(intr))


@dataclass(frozen=True)
class Costmap:
    """Per-pixel score grid; NaN marks pixels without a valid score."""

    data: np.ndarray
    name: str = ""

    def __post_init__(self):
        d = np.array(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("costmap data must be 2-D")
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.data)

    def masked(self, valid: np.ndarray) -> "Costmap":
        out = np.where(valid, self.data, np.nan)
        return Costmap(out, self.name)


DecisionMap = Costmap


def _check_shape(depth: DepthMap, intr: CameraIntrinsics) -> None:
    if depth.shape != intr.shape:
        raise ValueError(f"depth map {depth.shape} does not match camera {intr.shape}")


def pixel_to_world(p, depth: float, intr: CameraIntrinsics, pose: Pose,
                   d_min: float = 0.05, d_max: float = 20.0) -> np.ndarray:
    x, y = float(p[0]), float(p[1])
    if not np.isfinite(depth) or not d_min <= depth <= d_max:
        raise InvalidDepthError(f"depth {depth} outside [{d_min}, {d_max}]")
    if not intr.contains(x, y):
        raise OutOfBoundsError(f"pixel ({x}, {y}) outside {intr.width}x{intr.height} image")
    cam = np.array([(x - intr.cx) * depth / intr.fx, (y - intr.cy) * depth / intr.fy, depth])
    return pose.apply(cam)


def world_to_pixel(point, intr: CameraIntrinsics, pose: Pose) -> tuple[np.ndarray, float]:
    """Project a world point; returns ``((x, y), z_depth)``."""
    cam = pose.inverse().apply(np.asarray(point, dtype=np.float64))
    if cam[2] <= 0:
        raise InvalidDepthError("point behind the camera")
    x = intr.fx * cam[0] / cam[2] + intr.cx
    y = intr.fy * cam[1] / cam[2] + intr.cy
    return np.array([x, y]), float(cam[2])


def uav_radius_pixels(r_uav: float, depth, intr: CameraIntrinsics):
    """Projected UAV radius in pixels; uses the larger focal length.

    ``depth`` may be an array, in which case the result is elementwise.
    """
    if r_uav <= 0:
        raise ValueError("UAV radius must be positive")
    d = np.asarray(depth, dtype=np.float64)
    if np.any(~(d > 0)):
        raise InvalidDepthError("depth must be positive")
    r = max(intr.fx, intr.fy) * r_uav / d
    return float(r) if r.ndim == 0 else r
