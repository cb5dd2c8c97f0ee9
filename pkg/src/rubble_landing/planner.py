"""RRT* path search over the occupancy grid and line-of-sight waypoint pruning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GoalOccupiedError, NoPathError
from .mapping import OccupancyGrid


@dataclass(frozen=True)
class PathParams:
    step: float = 1.0
    goal_bias: float = 0.1
    max_iters: int = 2000
    rewire_radius: float = 3.0
    clearance: float = 0.6
    rng_seed: int = 0
    bounds: tuple | None = None  # ((xmin, ymin, zmin), (xmax, ymax, zmax))
    margin: float = 3.0

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if not 0.0 <= self.goal_bias < 1.0:
            raise ValueError("goal bias must lie in [0, 1)")
        if self.max_iters <= 0:
            raise ValueError("max_iters must be positive")
        if self.rewire_radius <= 0 or self.clearance < 0:
            raise ValueError("rewire radius must be positive and clearance non-negative")


def path_length(path) -> float:
    p = np.asarray(path, dtype=np.float64)
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum()) if len(p) > 1 else 0.0


def _sampling_box(start, goal, params: PathParams):
    if params.bounds is not None:
        lo, hi = (np.asarray(b, dtype=np.float64) for b in params.bounds)
    else:
        lo = np.minimum(start, goal) - params.margin
        hi = np.maximum(start, goal) + params.margin
    return lo, hi


def _informed_sample(rng, start, goal, c_best, lo, hi, frame):
    """Uniform sample from the prolate ellipsoid of paths shorter than ``c_best``,
    clipped to the sampling box by rejection (box sample on repeated failure)."""
    c_min = float(np.linalg.norm(goal - start))
    centre = (start + goal) / 2
    r1 = c_best / 2
    r2 = math.sqrt(max(c_best * c_best - c_min * c_min, 0.0)) / 2
    radii = np.array([r1, r2, r2])
    for _ in range(20):
        v = rng.normal(size=3)
        v *= rng.random() ** (1 / 3) / np.linalg.norm(v)
        x = centre + frame @ (radii * v)
        if np.all(x >= lo) and np.all(x <= hi):
            return x
    return rng.uniform(lo, hi)


def _focal_frame(start, goal):
    a = goal - start
    n = np.linalg.norm(a)
    if n < 1e-12:
        return np.eye(3)
    a = a / n
    # any orthonormal completion works: the ellipsoid is symmetric about a
    m = np.outer(a, [1.0, 0.0, 0.0])
    u, _, vt = np.linalg.svd(m)
    return u @ np.diag([1.0, 1.0, np.linalg.det(u) * np.linalg.det(vt)]) @ vt


def plan_path(grid: OccupancyGrid, start, goal, params: PathParams = PathParams()) -> list[np.ndarray]:
    """RRT* from ``start`` to ``goal``; returns the vertex list of the best path.

    Every returned segment satisfies ``grid.is_collision_free`` at
    ``params.clearance``.  Once a path exists, samples are drawn from the
    ellipsoid of points that could still shorten it.  The search stops
    early once the path is within 0.1 % of the straight-line lower bound.
    """
    start = np.asarray(start, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    clear = params.clearance
    if not grid.is_collision_free(goal, goal, clear):
        raise GoalOccupiedError(f"goal {goal.tolist()} is within {clear} m of an occupied voxel")
    if not grid.is_collision_free(start, start, clear):
        raise NoPathError(f"start {start.tolist()} is in collision")

    rng = np.random.default_rng(params.rng_seed)
    lo, hi = _sampling_box(start, goal, params)
    cap = params.max_iters + 1
    nodes = np.empty((cap, 3))
    parent = np.full(cap, -1, dtype=np.int64)
    cost = np.empty(cap)
    nodes[0], cost[0], n = start, 0.0, 1
    lower_bound = float(np.linalg.norm(goal - start))
    best_cost, best_node = math.inf, -1
    frame = _focal_frame(start, goal)

    def free(a, b):
        return grid.is_collision_free(a, b, clear)

    for _ in range(params.max_iters):
        if rng.random() < params.goal_bias:
            target = goal
        elif best_node >= 0:
            target = _informed_sample(rng, start, goal, best_cost, lo, hi, frame)
        else:
            target = rng.uniform(lo, hi)
        d = np.linalg.norm(nodes[:n] - target, axis=1)
        near_i = int(np.argmin(d))
        if d[near_i] < 1e-12:
            continue
        new = nodes[near_i] + (target - nodes[near_i]) * min(1.0, params.step / d[near_i])
        if not free(nodes[near_i], new):
            continue

        dn = np.linalg.norm(nodes[:n] - new, axis=1)
        neighbours = np.flatnonzero(dn <= params.rewire_radius)
        # cheapest collision-free parent among neighbours
        via = cost[neighbours] + dn[neighbours]
        order = neighbours[np.argsort(via, kind="stable")]
        p_best, c_best = near_i, cost[near_i] + dn[near_i]
        for j in order:
            cj = cost[j] + dn[j]
            if cj >= c_best:
                break
            if free(nodes[j], new):
                p_best, c_best = int(j), cj
                break
        k = n
        nodes[k], parent[k], cost[k] = new, p_best, c_best
        n += 1

        for j in neighbours:
            if j == p_best:
                continue
            cj = c_best + dn[j]
            if cj + 1e-12 < cost[j] and free(new, nodes[j]):
                delta = cost[j] - cj
                parent[j] = k
                _lower_subtree(parent, cost, n, int(j), delta)

        if best_node >= 0:
            best_cost = cost[best_node] + float(np.linalg.norm(goal - nodes[best_node]))
        dg = float(np.linalg.norm(goal - new))
        if dg <= params.rewire_radius and c_best + dg < best_cost and free(new, goal):
            best_cost, best_node = c_best + dg, k
        if best_node >= 0 and best_cost <= lower_bound * 1.001 + 1e-9:
            break

    if best_node < 0:
        raise NoPathError(f"no path found within {params.max_iters} iterations")
    path = [goal.copy()]
    i = best_node
    while i >= 0:
        path.append(nodes[i].copy())
        i = int(parent[i])
    path.reverse()
    if np.linalg.norm(path[-2] - path[-1]) < 1e-12:
        path.pop(-2)
    return path


def _lower_subtree(parent, cost, n, root, delta):
    """Propagate a cost decrease of ``delta`` to ``root`` and all its descendants."""
    cost[root] -= delta
    stack = [root]
    while stack:
        r = stack.pop()
        children = np.flatnonzero(parent[:n] == r)
        cost[children] -= delta
        stack.extend(int(c) for c in children)


def prune_line_of_sight(path, grid: OccupancyGrid, clearance: float) -> list[np.ndarray]:
    """Greedy pruning: from each kept vertex jump to the farthest visible vertex."""
    pts = [np.asarray(p, dtype=np.float64) for p in path]
    if len(pts) <= 2:
        return pts
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not grid.is_collision_free(pts[i], pts[j], clearance):
            j -= 1
        out.append(pts[j])
        i = j
    return out


def first_collision(traj, grid: OccupancyGrid, clearance: float, dt: float = 0.05,
                    final_clearance: float | None = None, floor_z: float | None = None) -> int | None:
    """Index of the first segment whose densely sampled polyline violates clearance.

    The last segment may use ``final_clearance`` and is only checked above
    ``floor_z``, which lets a landing descent end on the occupied surface.
    """
    ts, pos = traj.sample_many(dt)
    knots = traj.knot_times
    last = len(traj.durations) - 1
    for t0, t1, a, b in zip(ts[:-1], ts[1:], pos[:-1], pos[1:]):
        seg = int(np.clip(np.searchsorted(knots, 0.5 * (t0 + t1), side="right") - 1, 0, last))
        c = clearance
        if seg == last and final_clearance is not None:
            c = final_clearance
            if floor_z is not None:
                if a[2] < floor_z and b[2] < floor_z:
                    continue
                if a[2] < floor_z or b[2] < floor_z:
                    s = (floor_z - a[2]) / (b[2] - a[2])
                    cut = a + s * (b - a)
                    a, b = (cut, b) if a[2] < floor_z else (a, cut)
        if not grid.is_collision_free(a, b, c):
            return seg
    return None
