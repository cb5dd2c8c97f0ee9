"""Frame-by-frame landing-site pipeline, benchmark harness and landing planner."""

from __future__ import annotations

import json
import logging
import math
import resource
import time
import tracemalloc
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .core import CameraIntrinsics, Costmap, DepthMap, Pose
from .costmaps import combine, depth_confidence, energy, flatness, steepness
from .detection import CandidateSite, detect_dense_sites, write_sites_jsonl
from .errors import NoPathError
from .io import costmap_to_u8, load_dataset, write_pgm, write_raw_depth
from .mapping import OccupancyGrid
from .planner import PathParams, first_collision, plan_path, prune_line_of_sight
from .registry import SiteCluster, SiteRegistry, select_site
from .scenegen import Scene, random_scene, render_depth
from .trajectory import PolynomialTrajectory, min_jerk_trajectory

log = logging.getLogger(__name__)

STAGES = ("depth accuracy", "flatness", "steepness", "energy", "final costmap",
          "dense detection", "clustering")
REPORT_ROWS = STAGES + ("total",)


class StageStats:
    """Per-stage wall time (s) and peak incremental heap (bytes) samples."""

    def __init__(self):
        self.time: dict[str, list[float]] = {k: [] for k in REPORT_ROWS}
        self.memory: dict[str, list[float]] = {k: [] for k in REPORT_ROWS}

    def summary(self) -> dict:
        out = {}
        for k in REPORT_ROWS:
            t = np.asarray(self.time[k]) * 1e3
            m = np.asarray(self.memory[k]) / 2**20
            out[k] = {
                "count": int(t.size),
                "time_ms_mean": float(t.mean()) if t.size else 0.0,
                "time_ms_std": float(t.std()) if t.size else 0.0,
                "memory_mb_mean": float(m.mean()) if m.size else 0.0,
                "memory_mb_std": float(m.std()) if m.size else 0.0,
            }
        return out

    def table(self) -> str:
        s = self.summary()
        lines = [f"{'Stage':<16}{'Time (ms)':>20}{'Memory (MB)':>20}"]
        for k in REPORT_ROWS:
            r = s[k]
            t = f"{r['time_ms_mean']:.1f} ± {r['time_ms_std']:.1f}"
            m = f"{r['memory_mb_mean']:.1f} ± {r['memory_mb_std']:.1f}" if self.memory[k] else "-"
            lines.append(f"{k:<16}{t:>20}{m:>20}")
        return "\n".join(lines) + "\n"


class _Meter:
    """Times a block and, if tracemalloc is on, its peak heap growth.

    Meters nest: an inner meter resets the tracer's peak, so it hands the
    peak it saw up to the enclosing meter on exit.
    """

    _open: list["_Meter"] = []

    def __init__(self, track_memory: bool):
        self.track = track_memory and tracemalloc.is_tracing()
        self.bytes = 0

    def __enter__(self):
        if self.track:
            self.base = tracemalloc.get_traced_memory()[0]
            self.child_peak = self.base
            tracemalloc.reset_peak()
            _Meter._open.append(self)
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
        if self.track:
            _Meter._open.pop()
            peak = max(tracemalloc.get_traced_memory()[1], self.child_peak)
            self.bytes = peak - self.base
            if _Meter._open:
                parent = _Meter._open[-1]
                parent.child_peak = max(parent.child_peak, peak)
        return False


@dataclass
class FrameResult:
    index: int
    sites: list[CandidateSite]
    timings: dict[str, float]
    maps: dict[str, Costmap] | None = None


@dataclass
class LandingPipeline:
    config: PipelineConfig
    intr: CameraIntrinsics
    parallel: bool = False
    build_map: bool = True
    track_memory: bool = False
    registry: SiteRegistry = field(init=False)
    grid: OccupancyGrid = field(init=False)
    stats: StageStats = field(init=False)
    frames_seen: int = field(init=False, default=0)

    def __post_init__(self):
        self.registry = SiteRegistry(self.config.clustering)
        self.grid = OccupancyGrid(self.config.grid.resolution,
                                  unknown_is_free=self.config.grid.unknown_is_free)
        self.stats = StageStats()
        self._pool = ThreadPoolExecutor(max_workers=4) if self.parallel else None
        self._detection = replace(self.config.detection,
                                  slope_blur_px=float(self.config.steepness.window // 2 + 1))
        self._clustered_at = -1

    def _record(self, stage, meter, timings):
        self.stats.time[stage].append(meter.seconds)
        if meter.track:
            self.stats.memory[stage].append(meter.bytes)
        timings[stage] = meter.seconds

    def _costmaps(self, depth: DepthMap, pose: Pose, timings: dict) -> dict[str, Costmap]:
        cfg = self.config
        jobs = {
            "depth accuracy": lambda: depth_confidence(depth),
            "flatness": lambda: flatness(depth, cfg.edges),
            "steepness": lambda: steepness(depth, self.intr, pose, cfg.steepness),
            "energy": lambda: energy(depth, self.intr),
        }

        def run(stage):
            with _Meter(self.track_memory and self._pool is None) as m:
                out = jobs[stage]()
            return out, m

        if self._pool is None:
            results = {k: run(k) for k in jobs}
        else:
            futures = {k: self._pool.submit(run, k) for k in jobs}
            results = {k: f.result() for k, f in futures.items()}
        maps = {}
        for k, (cm, meter) in results.items():
            self._record(k, meter, timings)
            maps[k] = cm
        return maps

    def process_frame(self, depth: DepthMap, pose: Pose, keep_maps: bool = False) -> FrameResult:
        cfg = self.config
        idx = self.frames_seen
        timings: dict[str, float] = {}
        with _Meter(self.track_memory) as total:
            maps = self._costmaps(depth, pose, timings)
            with _Meter(self.track_memory) as m:
                decision = combine(maps["depth accuracy"], maps["flatness"], maps["steepness"],
                                   maps["energy"], cfg.weights)
            self._record("final costmap", m, timings)
            with _Meter(self.track_memory) as m:
                sites = detect_dense_sites(decision, maps["flatness"], depth, self.intr, pose,
                                           self._detection, steepness=maps["steepness"])
                self.registry.insert_candidates(sites, idx)
            self._record("dense detection", m, timings)
            if (idx + 1) % cfg.cluster_every == 0:
                with _Meter(self.track_memory) as m:
                    self.registry.cluster()
                self._record("clustering", m, timings)
                self._clustered_at = len(self.registry)
        self._record("total", total, timings)
        if self.build_map:
            self.grid.integrate_depth(depth, pose, self.intr, cfg.grid.subsample)
        self.frames_seen += 1
        if keep_maps:
            maps["decision"] = decision
        return FrameResult(idx, sites, timings, maps if keep_maps else None)

    def finish(self) -> list[SiteCluster]:
        """Final clustering pass; its time is charged to the last frame's total."""
        if self._clustered_at != len(self.registry):
            with _Meter(self.track_memory) as m:
                clusters = self.registry.cluster()
            if self.frames_seen:
                self.stats.time["clustering"].append(m.seconds)
                if m.track:
                    self.stats.memory["clustering"].append(m.bytes)
                self.stats.time["total"][-1] += m.seconds
            self._clustered_at = len(self.registry)
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None
        return self.registry.clusters


# -- synthetic surveys -------------------------------------------------------

def survey_poses(n: int, seed: int = 0, altitude: float = 8.0, extent: float = 4.0,
                 speed: float = 0.5) -> list[tuple[float, Pose]]:
    """Straight nadir pass along x with small attitude jitter, timestamped at ``speed``."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(-extent / 2, extent / 2, n) if n > 1 else np.zeros(n)
    out = []
    for x in xs:
        pose = Pose.looking_down([x, rng.uniform(-0.2, 0.2), altitude + rng.uniform(-0.1, 0.1)],
                                 yaw=rng.uniform(-0.05, 0.05), pitch=rng.uniform(-0.03, 0.03),
                                 roll=rng.uniform(-0.03, 0.03))
        out.append(((x - xs[0]) / speed if n else 0.0, pose))
    return out


def camera_from_config(cfg: PipelineConfig) -> CameraIntrinsics:
    c = cfg.camera
    return CameraIntrinsics.centered(c.width, c.height, c.fx, c.fy)


def render_survey(scene: Scene, cfg: PipelineConfig, n: int, seed: int = 0):
    intr = camera_from_config(cfg)
    stamped = survey_poses(n, seed)

    def gen():
        for i, (_, pose) in enumerate(stamped):
            yield i, render_depth(scene, pose, intr, cfg.noise, seed + i, cfg.d_min, cfg.d_max), pose

    return intr, stamped, gen()


# -- end-to-end run ----------------------------------------------------------

@dataclass
class RunResult:
    registry: SiteRegistry
    grid: OccupancyGrid
    stats: StageStats
    sites: list[tuple[int, list[CandidateSite]]]
    skipped: int = 0


def run_pipeline(source, cfg: PipelineConfig, out_dir=None, frames: int | None = None,
                 seed: int = 0, parallel: bool = False, save_maps: bool = False) -> RunResult:
    """Process a dataset directory or a scene (file or object) rendered along a survey."""
    if isinstance(source, Scene) or (Path(source).is_file()):
        scene = source if isinstance(source, Scene) else Scene.load(source)
        n = 20 if frames is None else frames
        intr, _, stream = render_survey(scene, cfg, n, seed)
    else:
        intr, n_avail, stream = load_dataset(source, cfg.d_min, cfg.d_max)
        n = n_avail if frames is None else min(frames, n_avail)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if save_maps:
            (out / "maps").mkdir(exist_ok=True)
    pipe = LandingPipeline(cfg, intr, parallel=parallel)
    per_frame = []
    skipped = 0
    for i, depth, pose in stream:
        if i >= n:
            break
        if depth is None:
            skipped += 1
            continue
        res = pipe.process_frame(depth, pose, keep_maps=save_maps)
        per_frame.append((i, res.sites))
        if save_maps and out is not None:
            export_maps(res.maps, out / "maps", i)
    pipe.finish()
    result = RunResult(pipe.registry, pipe.grid, pipe.stats, per_frame, skipped)
    if out is not None:
        write_run_outputs(result, out)
    return result


def write_run_outputs(result: RunResult, out: Path) -> None:
    (out / "registry.json").write_text(result.registry.to_json())
    write_sites_jsonl(out / "sites.jsonl", result.sites)
    result.grid.save(out / "occupancy.txt")
    (out / "timing.txt").write_text(result.stats.table())
    (out / "timing.json").write_text(json.dumps(result.stats.summary(), indent=1, sort_keys=True) + "\n")


def export_maps(maps: dict[str, Costmap], out: Path, index: int) -> None:
    names = {"depth accuracy": "depth_accuracy", "flatness": "flatness", "steepness": "steepness",
             "energy": "energy", "decision": "decision"}
    for key, name in names.items():
        cm = maps[key]
        # raw-unit maps are min-max scaled; energy is inverted like in the fusion
        if key == "energy":
            cm = Costmap(-cm.data, cm.name)
        normalize = key in ("depth accuracy", "flatness", "energy")
        write_pgm(out / f"frame_{index:06d}_{name}.pgm", costmap_to_u8(cm, normalize))
    d = maps["decision"]
    write_raw_depth(out / f"frame_{index:06d}_decision.raw", DepthMap(d.data, 0.0, 1.0))


# -- benchmark ---------------------------------------------------------------

def bench_frames(cfg: PipelineConfig, n: int, seed: int = 0) -> tuple[CameraIntrinsics, list]:
    """``n`` noisy frames over random rubble scenes, a new scene every ten frames."""
    intr = camera_from_config(cfg)
    frames = []
    for i in range(n):
        scene = random_scene(seed + i // 10)
        rng = np.random.default_rng(10_000 * seed + i)
        pose = Pose.looking_down([*rng.uniform(-1.5, 1.5, 2), rng.uniform(6.0, 10.0)],
                                 yaw=rng.uniform(0, 2 * math.pi), pitch=rng.uniform(-0.1, 0.1),
                                 roll=rng.uniform(-0.1, 0.1))
        d = render_depth(scene, pose, intr, cfg.noise, seed + i, cfg.d_min, cfg.d_max)
        frames.append((d, pose))
    return intr, frames


def _peak_rss_bytes() -> int:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024


def bench(cfg: PipelineConfig, n_frames: int = 100, seed: int = 0, parallel: bool = False) -> dict:
    """Timing pass, then a separate heap-tracking pass over the same frames.

    Occupancy integration is excluded: the report covers the detection
    pipeline only.  ``peak_rss_increase_mb`` is the growth of the process
    high-water mark during the timing pass.
    """
    intr, frames = bench_frames(cfg, n_frames, seed)
    if frames:
        warm = LandingPipeline(cfg, intr, parallel=parallel, build_map=False)
        warm.process_frame(*frames[0])
        warm.finish()

    rss0 = _peak_rss_bytes()
    timing = LandingPipeline(cfg, intr, parallel=parallel, build_map=False)
    for d, p in frames:
        timing.process_frame(d, p)
    timing.finish()
    rss_increase = max(_peak_rss_bytes() - rss0, 0)

    tracemalloc.start()
    try:
        mem = LandingPipeline(cfg, intr, parallel=False, build_map=False, track_memory=True)
        for d, p in frames:
            mem.process_frame(d, p)
        mem.finish()
    finally:
        tracemalloc.stop()

    stats = StageStats()
    stats.time = timing.stats.time
    stats.memory = mem.stats.memory
    summary = stats.summary()
    peak_heap = max(mem.stats.memory["total"], default=0)
    return {
        "frames": n_frames,
        "stages": summary,
        "table": stats.table(),
        "mean_frame_ms": summary["total"]["time_ms_mean"],
        "peak_heap_mb": peak_heap / 2**20,
        "peak_rss_increase_mb": rss_increase / 2**20,
        "sites": len(timing.registry),
        "clusters": len(timing.registry.clusters),
    }


# -- landing -----------------------------------------------------------------

@dataclass
class LandingPlan:
    site: SiteCluster
    path: list[np.ndarray]
    waypoints: list[np.ndarray]
    trajectory: PolynomialTrajectory

    def to_dict(self) -> dict:
        return {
            "site": [float(v) for v in self.site.centroid],
            "site_members": self.site.m,
            "path": [[float(v) for v in p] for p in self.path],
            "waypoints": [[float(v) for v in p] for p in self.waypoints],
            "duration_s": self.trajectory.total_duration,
            "jerk_cost": self.trajectory.jerk_cost(),
        }


def fit_landing_trajectory(waypoints, grid: OccupancyGrid, cfg: PipelineConfig,
                           max_repairs: int = 20) -> tuple[list[np.ndarray], PolynomialTrajectory]:
    """Fit the smooth trajectory, inserting segment midpoints until dense samples clear.

    The final segment is the vertical descent onto the site; it is checked
    with the smaller descent clearance and only down to one voxel above the site.
    """
    tp = cfg.trajectory
    wps = [np.asarray(w, dtype=np.float64) for w in waypoints]
    site_z = float(wps[-1][2])
    for _ in range(max_repairs + 1):
        traj = min_jerk_trajectory(wps, tp.v_nom, tp.order, tp.min_segment_duration)
        if len(traj.durations) == 0:
            return wps, traj
        bad = first_collision(traj, grid, cfg.path.clearance, tp.check_dt,
                              final_clearance=tp.descent_clearance,
                              floor_z=site_z + grid.resolution)
        if bad is None:
            return wps, traj
        wps.insert(bad + 1, 0.5 * (wps[bad] + wps[bad + 1]))
    raise NoPathError("smoothed trajectory still collides after repairs")


def plan_landing(clusters: list[SiteCluster], grid: OccupancyGrid, uav: Pose, cfg: PipelineConfig,
                 mode: str | None = None, index: int | None = None, reference: Pose | None = None,
                 out_dir=None) -> LandingPlan:
    """Select a cluster, plan to a point above it, prune, smooth and export.

    ``reference`` is the pose distances are measured from in ``nearest``
    mode (e.g. a ground station); it defaults to the UAV pose.
    """
    mode = mode or cfg.selection_mode
    ref = reference if (reference is not None and mode == "nearest") else uav
    site = select_site(clusters, mode, index=index, pose=ref)
    goal = np.asarray(site.centroid, dtype=np.float64)
    approach = goal + np.array([0.0, 0.0, cfg.trajectory.approach_height])
    start = np.asarray(uav.translation, dtype=np.float64)

    pp = cfg.path
    lo = np.minimum(start, approach) - pp.margin
    hi = np.maximum(start, approach) + pp.margin
    # nothing below the approach height is useful
    lo[2] = min(start[2], approach[2])
    params = PathParams(pp.step, pp.goal_bias, pp.max_iters, pp.rewire_radius, pp.clearance,
                        pp.rng_seed, bounds=(tuple(lo), tuple(hi)))
    path = plan_path(grid, start, approach, params)
    pruned = prune_line_of_sight(path, grid, pp.clearance)
    waypoints, traj = fit_landing_trajectory(pruned + [goal], grid, cfg)
    plan = LandingPlan(site, path + [goal], waypoints, traj)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        traj.to_csv(out / "trajectory.csv", cfg.trajectory.sample_rate_hz)
        traj.to_json(out / "trajectory_coeffs.json")
        (out / "plan.json").write_text(json.dumps(plan.to_dict(), indent=1, sort_keys=True) + "\n")
    tp = cfg.trajectory
    if tp.v_max is not None and traj.peak_speed() > tp.v_max:
        log.warning("trajectory peak speed %.2f m/s exceeds v_max %.2f", traj.peak_speed(), tp.v_max)
    return plan
