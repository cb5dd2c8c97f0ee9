"""Command-line entry point: ``rubble-landing {run,gen,plan,bench,export-maps}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import PRESETS, load_config
from .core import Pose
from .errors import LandingError
from .io import load_dataset, write_camera, write_depth, write_poses
from .mapping import OccupancyGrid
from .pipeline import (LandingPipeline, bench, camera_from_config, export_maps, plan_landing,
                       render_survey, run_pipeline)
from .registry import SiteRegistry
from .scenegen import Scene, random_scene

log = logging.getLogger("rubble_landing")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--preset", choices=PRESETS, help="parameter preset (default: from config or simulation)")
    p.add_argument("--out-dir", type=Path, default=Path("out"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, help="limit / number of frames")
    p.add_argument("--parallel-costmaps", action="store_true",
                   help="compute the four costmaps of a frame concurrently")


def _pose_arg(text: str) -> Pose:
    v = [float(x) for x in text.split(",")]
    if len(v) == 3:
        return Pose.looking_down(v)
    if len(v) == 7:
        q = np.asarray(v[3:])
        return Pose(np.asarray(v[:3]), q / np.linalg.norm(q))
    raise argparse.ArgumentTypeError("pose is x,y,z or x,y,z,qw,qx,qy,qz")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rubble-landing",
                                 description="Landing-site detection and landing planning on depth maps.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="process a dataset directory or a scene file")
    _common(p)
    p.add_argument("input", type=Path, help="dataset directory (frames/, poses.csv, camera.cfg) or scene JSON")
    p.add_argument("--save-maps", action="store_true", help="also write per-frame costmap PGMs")

    p = sub.add_parser("gen", help="render a synthetic dataset from a scene file")
    _common(p)
    p.add_argument("scene", help="scene JSON, or 'random' for a seeded random rubble scene")
    p.add_argument("--format", choices=("pfm", "raw"), default="pfm")

    p = sub.add_parser("plan", help="plan a landing trajectory from a run's outputs")
    _common(p)
    p.add_argument("--registry", type=Path, required=True, help="registry.json from `run`")
    p.add_argument("--grid", type=Path, help="occupancy.txt from `run` (default: empty grid)")
    p.add_argument("--pose", type=_pose_arg, required=True, help="UAV pose x,y,z[,qw,qx,qy,qz]")
    p.add_argument("--mode", choices=("operator", "nearest", "lowest_energy"))
    p.add_argument("--index", type=int, help="cluster index for operator mode")
    p.add_argument("--station", type=_pose_arg, help="reference pose for nearest mode")

    p = sub.add_parser("bench", help="per-stage timing and memory report")
    _common(p)
    p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("export-maps", help="write costmap PGMs for each frame")
    _common(p)
    p.add_argument("input", type=Path, help="dataset directory or scene JSON")
    return ap


def _load_scene(spec: str, seed: int) -> Scene:
    return random_scene(seed) if spec == "random" else Scene.load(spec)


def cmd_run(args, cfg) -> int:
    res = run_pipeline(args.input, cfg, args.out_dir, args.frames, args.seed,
                       args.parallel_costmaps, args.save_maps)
    print(res.stats.table(), end="")
    print(f"{len(res.registry)} sites in {len(res.registry.clusters)} clusters; "
          f"{res.skipped} frames skipped; outputs in {args.out_dir}")
    return 0


def cmd_gen(args, cfg) -> int:
    scene = _load_scene(args.scene, args.seed)
    n = 20 if args.frames is None else args.frames
    intr, stamped, stream = render_survey(scene, cfg, n, args.seed)
    out = args.out_dir
    (out / "frames").mkdir(parents=True, exist_ok=True)
    for i, depth, _ in stream:
        write_depth(out / "frames" / f"{i:06d}.{args.format}", depth)
    write_poses(out / "poses.csv", stamped)
    write_camera(out / "camera.cfg", intr)
    scene.save(out / "scene.json")
    print(f"wrote {n} frames to {out}")
    return 0


def cmd_plan(args, cfg) -> int:
    reg = SiteRegistry.from_snapshot(json.loads(args.registry.read_text()), cfg.clustering)
    clusters = reg.clusters or reg.cluster()
    grid = (OccupancyGrid.load(args.grid, unknown_is_free=cfg.grid.unknown_is_free) if args.grid
            else OccupancyGrid(cfg.grid.resolution, unknown_is_free=cfg.grid.unknown_is_free))
    plan = plan_landing(clusters, grid, args.pose, cfg, args.mode, args.index, args.station, args.out_dir)
    site = plan.site.centroid
    print(f"site ({site[0]:.2f}, {site[1]:.2f}, {site[2]:.2f}); {len(plan.waypoints)} waypoints; "
          f"{plan.trajectory.total_duration:.1f} s; outputs in {args.out_dir}")
    return 0


def cmd_bench(args, cfg) -> int:
    n = 100 if args.frames is None else args.frames
    report = bench(cfg, n, args.seed, args.parallel_costmaps)
    if args.json:
        print(json.dumps({k: v for k, v in report.items() if k != "table"}, indent=1, sort_keys=True))
    else:
        print(report["table"], end="")
        print(f"frames {n}; mean {report['mean_frame_ms']:.1f} ms/frame; "
              f"peak heap {report['peak_heap_mb']:.1f} MB; "
              f"peak RSS increase {report['peak_rss_increase_mb']:.1f} MB")
    return 0


def cmd_export_maps(args, cfg) -> int:
    if args.input.is_file():
        intr, _, stream = render_survey(Scene.load(args.input), cfg, args.frames or 20, args.seed)
    else:
        intr, _, stream = load_dataset(args.input, cfg.d_min, cfg.d_max)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    pipe = LandingPipeline(cfg, intr, parallel=args.parallel_costmaps, build_map=False)
    count = 0
    for i, depth, pose in stream:
        if args.frames is not None and i >= args.frames:
            break
        if depth is None:
            continue
        export_maps(pipe.process_frame(depth, pose, keep_maps=True).maps, out, i)
        count += 1
    print(f"wrote maps for {count} frames to {out}")
    return 0


COMMANDS = {"run": cmd_run, "gen": cmd_gen, "plan": cmd_plan, "bench": cmd_bench,
            "export-maps": cmd_export_maps}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.preset)
        return COMMANDS[args.command](args, cfg)
    except LandingError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
