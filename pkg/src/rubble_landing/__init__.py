"""Safe landing-site detection on depth maps and landing trajectory planning for UAVs."""

from .core import CameraIntrinsics, Costmap, DecisionMap, DepthMap, Pose, pixel_to_world, uav_radius_pixels
from .costmaps import (CostmapWeights, EdgeParams, SteepnessParams, combine, depth_confidence, energy,
                       flatness, steepness, surface_normals)
from .detection import CandidateSite, DetectionParams, detect_dense_sites
from .errors import (EmptyDepthError, GoalOccupiedError, InvalidDepthError, LandingError, NoPathError,
                     NoSitesError, OutOfBoundsError, ShapeMismatchError)
from .mapping import OccupancyGrid
from .planner import PathParams, plan_path, prune_line_of_sight
from .registry import ClusterParams, SiteCluster, SiteRegistry, select_site
from .trajectory import PolynomialTrajectory, min_jerk_trajectory

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics", "Costmap", "DecisionMap", "DepthMap", "Pose", "pixel_to_world", "uav_radius_pixels",
    "CostmapWeights", "EdgeParams", "SteepnessParams", "combine", "depth_confidence", "energy",
    "flatness", "steepness", "surface_normals",
    "CandidateSite", "DetectionParams", "detect_dense_sites",
    "EmptyDepthError", "GoalOccupiedError", "InvalidDepthError", "LandingError", "NoPathError",
    "NoSitesError", "OutOfBoundsError", "ShapeMismatchError",
    "OccupancyGrid", "PathParams", "plan_path", "prune_line_of_sight",
    "ClusterParams", "SiteCluster", "SiteRegistry", "select_site",
    "PolynomialTrajectory", "min_jerk_trajectory",
]
