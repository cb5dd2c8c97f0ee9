"""Plan a landing around an obstacle standing between the UAV and the site.

A ground slab and a tall pillar are written into an occupancy grid, a single
site is placed behind the pillar, and the planner routes to a point above the
site before the final vertical descent. The script prints the pruned path,
the trajectory summary and the smallest distance from the pillar.

    python3 demos/landing_plan.py
"""
import numpy as np

from rubble_landing.config import load_preset
from rubble_landing.core import Pose
from rubble_landing.mapping import OccupancyGrid
from rubble_landing.pipeline import plan_landing
from rubble_landing.registry import SiteRegistry

cfg = load_preset("simulation")

grid = OccupancyGrid(cfg.grid.resolution)
grid.fill_box((-6, -6, -0.5), (6, 6, 0.0))
grid.fill_box((1.0, -1.0, 0.0), (2.0, 1.0, 4.0))

reg = SiteRegistry(cfg.clustering)
reg.insert_candidates(np.array([[4.0, 0.0, 0.0]]))
clusters = reg.cluster()

plan = plan_landing(clusters, grid, Pose.looking_down([-2.0, 0.0, 3.0]), cfg)
print("waypoints after pruning and repair:")
for w in plan.waypoints:
    print("  ({:6.2f}, {:6.2f}, {:5.2f})".format(*w))

traj = plan.trajectory
end = traj.sample(traj.total_duration)
print(f"duration {traj.total_duration:.2f} s, peak speed {traj.peak_speed():.2f} m/s, "
      f"jerk cost {traj.jerk_cost():.4f}")
print("final position", np.round(end.position, 6), "final speed", float(np.linalg.norm(end.velocity)))

ts = np.arange(0.0, traj.total_duration, 0.01)
pos = np.array([traj.sample(t).position for t in ts])
centres = grid.occupied_centers()
pillar = centres[centres[:, 2] > 0]
gap = np.min(np.linalg.norm(pos[:, None, :] - pillar[None, :, :], axis=2))
print(f"closest approach to the pillar voxel centres: {gap:.2f} m (clearance {cfg.path.clearance} m)")
