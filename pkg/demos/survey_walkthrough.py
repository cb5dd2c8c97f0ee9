"""Fly a short survey over a random rubble scene and report what was found.

Each frame goes through the four costmaps, the fused decision map and dense
detection; clusters are printed at the end together with how many of the
dense detections fall inside the renderer's ground-truth safe mask.

    python3 demos/survey_walkthrough.py [seed] [frames]
"""
import sys

import numpy as np

from rubble_landing.config import load_preset
from rubble_landing.pipeline import LandingPipeline, render_survey
from rubble_landing.scenegen import random_scene, safe_mask

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
n_frames = int(sys.argv[2]) if len(sys.argv) > 2 else 12

cfg = load_preset("simulation")
scene = random_scene(seed)
print(f"scene {seed}: {len(scene.primitives) - 1} obstacles on the ground plane")

intr, _, stream = render_survey(scene, cfg, n_frames, seed=seed)
pipe = LandingPipeline(cfg, intr)
inside = total = 0
for i, depth, pose in stream:
    res = pipe.process_frame(depth, pose)
    mask = safe_mask(scene, pose, intr, cfg.detection.uav_radius)
    ok = sum(bool(mask[s.pixel[1], s.pixel[0]]) for s in res.sites)
    inside += ok
    total += len(res.sites)
    print(f"frame {i:2d}  altitude {pose.translation[2]:5.2f} m  sites {len(res.sites):3d}  in safe mask {ok:3d}")

clusters = pipe.finish()
print(f"\n{total} dense detections, {inside} inside the safe mask")
print(f"{len(pipe.registry)} registry sites grouped into {len(clusters)} clusters")
for k, c in enumerate(sorted(clusters, key=lambda c: -c.m)[:5]):
    x, y, z = c.centroid
    print(f"  cluster {k}: ({x:6.2f}, {y:6.2f}, {z:5.2f})  members {c.m}")
print(f"{len(pipe.grid)} voxels in the occupancy map\n")
print(pipe.stats.table())
