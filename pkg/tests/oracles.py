"""Slow, obviously-correct reference computations used only by the tests.

Nothing here imports the package's algorithms; each function recomputes its
answer from first principles (brute force, closed forms or dense sampling).
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np


def brute_edt_squared(features: np.ndarray) -> np.ndarray:
    """Squared distance from every pixel to the nearest True pixel, by exhaustive search."""
    h, w = features.shape
    fy, fx = np.nonzero(features)
    if len(fy) == 0:
        return np.full((h, w), np.inf)
    ys, xs = np.mgrid[0:h, 0:w]
    out = np.empty((h, w), dtype=np.int64)
    for y in range(h):
        d2 = (ys[y, :, None] - fy[None, :]) ** 2 + (xs[y, :, None] - fx[None, :]) ** 2
        out[y] = d2.min(axis=1)
    return out


def brute_components(points: np.ndarray, xy_dist: float, z_dist: float) -> set[frozenset[int]]:
    """Connected components of the graph linking points close in xy and in z (all pairs)."""
    n = len(points)
    adj = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy, dz = points[i] - points[j]
            if math.sqrt(dx * dx + dy * dy) <= xy_dist and abs(dz) <= z_dist:
                adj[i].append(j)
                adj[j].append(i)
    seen = [False] * n
    comps = set()
    for s in range(n):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comps.add(frozenset(comp))
    return comps


def quintic_rest_to_rest(tau):
    """Minimum-jerk blend between two rests on normalised time."""
    tau = np.asarray(tau, dtype=np.float64)
    return 10 * tau ** 3 - 15 * tau ** 4 + 6 * tau ** 5


def min_jerk_kkt(waypoints: np.ndarray, durations: np.ndarray, order: int = 3):
    """Minimum-derivative piecewise polynomial by a dense equality-constrained QP.

    Unknowns are monomial coefficients in local (unscaled) time per segment.
    Constraints: waypoint positions, rest at both ends, and continuity of
    derivatives 1..2r-2 at interior knots.  Returns coefficients (seg, 3, 2r).
    """
    w = np.asarray(waypoints, dtype=np.float64)
    T = np.asarray(durations, dtype=np.float64)
    m, n = len(T), 2 * order
    nv = m * n

    def row(seg, t, k):
        r = np.zeros(nv)
        for j in range(k, n):
            r[seg * n + j] = math.perm(j, k) * t ** (j - k)
        return r

    # cost Hessian: integral of squared order-th derivative
    H = np.zeros((nv, nv))
    for s in range(m):
        for i in range(order, n):
            for j in range(order, n):
                p = i + j - 2 * order + 1
                H[s * n + i, s * n + j] = math.perm(i, order) * math.perm(j, order) * T[s] ** p / p
    out = np.zeros((m, 3, n))
    for axis in range(3):
        A, b = [], []
        for s in range(m):
            A.append(row(s, 0.0, 0)); b.append(w[s, axis])
            A.append(row(s, T[s], 0)); b.append(w[s + 1, axis])
        for k in range(1, order):
            A.append(row(0, 0.0, k)); b.append(0.0)
            A.append(row(m - 1, T[-1], k)); b.append(0.0)
        for s in range(m - 1):
            for k in range(1, n - 1):
                A.append(row(s, T[s], k) - row(s + 1, 0.0, k)); b.append(0.0)
        A = np.array(A)
        K = np.block([[2 * H, A.T], [A, np.zeros((len(A), len(A)))]])
        rhs = np.concatenate([np.zeros(nv), b])
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        out[:, axis, :] = sol[:nv].reshape(m, n)
    return out


def eval_local_poly(coeffs: np.ndarray, durations: np.ndarray, t: float) -> np.ndarray:
    """Position of a local-time monomial trajectory (as returned by :func:`min_jerk_kkt`)."""
    knots = np.concatenate([[0.0], np.cumsum(durations)])
    s = min(int(np.searchsorted(knots, t, side="right")) - 1, len(durations) - 1)
    s = max(s, 0)
    tl = t - knots[s]
    return np.array([sum(c[j] * tl ** j for j in range(len(c))) for c in coeffs[s]])


def min_distance_to_points(samples: np.ndarray, points: np.ndarray) -> float:
    if len(points) == 0:
        return math.inf
    best = math.inf
    for chunk in np.array_split(samples, max(1, len(samples) // 256)):
        d = np.linalg.norm(chunk[:, None, :] - points[None, :, :], axis=2)
        best = min(best, float(d.min()))
    return best


def segment_distance_sampled(point, a, b, n: int = 20001) -> float:
    """Point-to-segment distance by dense sampling (upper bound converging to the truth)."""
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = np.asarray(a) + t * (np.asarray(b) - np.asarray(a))
    return float(np.linalg.norm(pts - np.asarray(point), axis=1).min())


def segment_hits_box(a, b, lo, hi) -> bool:
    """Slab test: does the closed segment ab intersect the axis-aligned box [lo, hi]?"""
    a, b = np.asarray(a, float), np.asarray(b, float)
    d = b - a
    t0, t1 = 0.0, 1.0
    for k in range(3):
        if abs(d[k]) < 1e-15:
            if a[k] < lo[k] or a[k] > hi[k]:
                return False
            continue
        u0 = (lo[k] - a[k]) / d[k]
        u1 = (hi[k] - a[k]) / d[k]
        if u0 > u1:
            u0, u1 = u1, u0
        t0, t1 = max(t0, u0), min(t1, u1)
        if t0 > t1:
            return False
    return True


def ray_sphere_depth(origin, direction, centre, radius) -> float:
    """Nearest positive ray parameter hitting a sphere, or inf."""
    o = np.asarray(origin, float) - np.asarray(centre, float)
    d = np.asarray(direction, float)
    a = d @ d
    b = 2 * o @ d
    c = o @ o - radius * radius
    disc = b * b - 4 * a * c
    if disc < 0:
        return math.inf
    for t in sorted(((-b - math.sqrt(disc)) / (2 * a), (-b + math.sqrt(disc)) / (2 * a))):
        if t > 0:
            return t
    return math.inf


def astar_lattice(occupied: np.ndarray, lo, hi, spacing: float, clearance: float, start, goal):
    """A* over a 26-connected lattice of points at ``spacing`` inside [lo, hi].

    A lattice point is free when every occupied point lies farther than
    ``clearance``; an edge is usable when both ends and its midpoint are
    free.  Start and goal attach to their nearest free lattice points.
    Returns the path as a list of points, or None.
    """
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    dims = np.floor((hi - lo) / spacing).astype(int) + 1
    occ = np.asarray(occupied, float).reshape(-1, 3)

    def pos(ix):
        return lo + np.asarray(ix) * spacing

    def free_point(p):
        return len(occ) == 0 or np.min(np.linalg.norm(occ - p, axis=1)) > clearance

    cache: dict = {}

    def free(ix):
        if ix not in cache:
            cache[ix] = all(0 <= ix[k] < dims[k] for k in range(3)) and free_point(pos(ix))
        return cache[ix]

    def nearest(p):
        ix = tuple(int(round(v)) for v in (np.asarray(p) - lo) / spacing)
        return ix if free(ix) else None

    s, g = nearest(start), nearest(goal)
    if s is None or g is None:
        return None
    moves = [m for m in itertools.product((-1, 0, 1), repeat=3) if m != (0, 0, 0)]
    best = {s: 0.0}
    came = {}
    frontier = [(0.0, s)]
    while frontier:
        _, u = heapq.heappop(frontier)
        if u == g:
            path = [u]
            while u in came:
                u = came[u]
                path.append(u)
            return [pos(ix) for ix in reversed(path)]
        for m in moves:
            v = (u[0] + m[0], u[1] + m[1], u[2] + m[2])
            if not free(v) or not free_point((pos(u) + pos(v)) / 2):
                continue
            c = best[u] + spacing * math.sqrt(m[0] ** 2 + m[1] ** 2 + m[2] ** 2)
            if c < best.get(v, math.inf):
                best[v] = c
                came[v] = u
                h = float(np.linalg.norm(pos(v) - pos(g)))
                heapq.heappush(frontier, (c + h, v))
    return None


def inscribed_radius_px(half_width: float, depth: float, focal: float) -> float:
    """Projected radius of the circle inscribed in a square ledge seen head-on."""
    return half_width * focal / depth
