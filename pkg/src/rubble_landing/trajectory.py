"""Piecewise-polynomial minimum-derivative trajectories through waypoints.

Each segment and axis is a polynomial of degree ``2r - 1`` in normalised
time ``tau = (t - t0) / T``, determined by position and the first ``r - 1``
derivatives at both ends (Hermite form).  Minimising the integral of the
squared ``r``-th derivative (``r = 3`` jerk, ``r = 4`` snap) over the free
interior derivatives is an unconstrained quadratic problem whose Hessian is
banded, one block per knot.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.linalg import solveh_banded

JERK, SNAP = 3, 4


@lru_cache(maxsize=None)
def _hermite_inverse(r: int) -> np.ndarray:
    """Matrix mapping scaled end derivatives to monomial coefficients on [0, 1]."""
    deg = 2 * r
    a = np.zeros((deg, deg))
    for k in range(r):
        for j in range(k, deg):
            c = math.perm(j, k)
            if j == k:
                a[k, j] = c  # value at tau = 0
            a[r + k, j] = c  # value at tau = 1
    return np.linalg.inv(a)


@lru_cache(maxsize=None)
def _derivative_gram(r: int, q: int) -> np.ndarray:
    """Gram matrix of q-th derivatives of monomials tau^j on [0, 1]."""
    deg = 2 * r
    g = np.zeros((deg, deg))
    for i in range(q, deg):
        for j in range(q, deg):
            g[i, j] = math.perm(i, q) * math.perm(j, q) / (i + j - 2 * q + 1)
    return g


def _segment_cost_matrix(r: int, q: int, T: float) -> np.ndarray:
    """Cost of one segment as a quadratic form in unscaled end derivatives."""
    h = _hermite_inverse(r)
    scale = np.array([T ** k for k in range(r)] * 2)
    m = h.T @ _derivative_gram(r, q) @ h
    return (scale[:, None] * m * scale[None, :]) * T ** (1 - 2 * q)


class TrajectorySample(NamedTuple):
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    jerk: np.ndarray
    clamped: bool


@dataclass
class PolynomialTrajectory:
    """Per-axis polynomials; ``coeffs[i, axis]`` holds ascending tau-coefficients."""

    waypoints: np.ndarray
    durations: np.ndarray
    coeffs: np.ndarray  # (segments, 3, 2r)
    order: int = JERK

    @property
    def degree(self) -> int:
        return 2 * self.order - 1

    @property
    def total_duration(self) -> float:
        return float(self.durations.sum())

    @property
    def knot_times(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    def _derivative(self, seg: int, tau: float, k: int) -> np.ndarray:
        c = self.coeffs[seg]
        out = np.zeros(3)
        for j in range(k, c.shape[1]):
            out += c[:, j] * math.perm(j, k) * tau ** (j - k)
        return out / self.durations[seg] ** k

    def sample(self, t: float) -> TrajectorySample:
        total = self.total_duration
        clamped = not 0.0 <= t <= total
        t = min(max(t, 0.0), total)
        if len(self.durations) == 0:
            z = np.zeros(3)
            return TrajectorySample(self.waypoints[0].copy(), z, z.copy(), z.copy(), clamped)
        knots = self.knot_times
        seg = int(np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(self.durations) - 1))
        tau = (t - knots[seg]) / self.durations[seg]
        return TrajectorySample(*(self._derivative(seg, tau, k) for k in range(4)), clamped)

    def sample_many(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Times ``0, dt, 2dt, ...`` plus the final time, and positions there."""
        total = self.total_duration
        ts = np.arange(0.0, total, dt) if total > 0 else np.zeros(1)
        ts = np.append(ts, total) if total > 0 else ts
        return ts, np.array([self.sample(t).position for t in ts])

    def derivative_cost(self, q: int = JERK) -> float:
        """Exact integral of the squared ``q``-th derivative over the trajectory."""
        g = _derivative_gram(self.order, q)
        total = 0.0
        for c, T in zip(self.coeffs, self.durations):
            total += float(np.einsum("ai,ij,aj->", c, g, c)) * T ** (1 - 2 * q)
        return total

    def jerk_cost(self) -> float:
        return self.derivative_cost(JERK)

    def peak_speed(self, dt: float = 0.01) -> float:
        ts, _ = self.sample_many(dt)
        return max(float(np.linalg.norm(self.sample(t).velocity)) for t in ts)

    def to_csv(self, path, rate_hz: float = 20.0) -> None:
        ts, _ = self.sample_many(1.0 / rate_hz)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az"])
            for t in ts:
                s = self.sample(t)
                w.writerow([f"{t:.6f}"] + [f"{v:.9g}" for v in (*s.position, *s.velocity, *s.acceleration)])

    def to_dict(self) -> dict:
        knots = self.knot_times
        return {
            "order": self.order,
            "degree": self.degree,
            "basis": "ascending powers of normalised time (t - t0) / duration",
            "waypoints": self.waypoints.tolist(),
            "segments": [
                {"t0": float(knots[i]), "duration": float(T),
                 "coeffs": {ax: self.coeffs[i, k].tolist() for k, ax in enumerate("xyz")}}
                for i, T in enumerate(self.durations)
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def allocate_durations(waypoints: np.ndarray, v_nom: float, min_duration: float = 0.5) -> np.ndarray:
    lengths = np.linalg.norm(np.diff(waypoints, axis=0), axis=1)
    return np.maximum(lengths / v_nom, min_duration)


def dedupe_waypoints(waypoints, tol: float = 1e-9) -> np.ndarray:
    w = np.asarray(waypoints, dtype=np.float64).reshape(-1, 3)
    keep = [0] + [i for i in range(1, len(w)) if np.linalg.norm(w[i] - w[i - 1]) > tol]
    return w[keep]


def hermite_trajectory(waypoints, derivs, durations, order: int = JERK) -> PolynomialTrajectory:
    """Trajectory from knot positions and knot derivatives ``derivs[knot, k-1, axis]``."""
    w = np.asarray(waypoints, dtype=np.float64)
    d = np.asarray(derivs, dtype=np.float64)
    T = np.asarray(durations, dtype=np.float64)
    h = _hermite_inverse(order)
    coeffs = np.empty((len(T), 3, 2 * order))
    for i, Ti in enumerate(T):
        # derivatives scaled to normalised time
        b = np.vstack([np.vstack([w[knot]] + [d[knot, k - 1] * Ti ** k for k in range(1, order)])
                       for knot in (i, i + 1)])
        coeffs[i] = (h @ b).T
    return PolynomialTrajectory(w.copy(), T.copy(), coeffs, order)


def optimal_derivatives(waypoints: np.ndarray, durations: np.ndarray, order: int = JERK) -> np.ndarray:
    """Interior knot derivatives minimising the order-``r`` cost; ends at rest."""
    n_knots = len(waypoints)
    r = order
    nd = r - 1
    derivs = np.zeros((n_knots, nd, 3))
    n_free = (n_knots - 2) * nd
    if n_free == 0:
        return derivs
    # global variable vector per axis: [p0, d0_1..d0_{r-1}, p1, ...]; only
    # the interior derivative entries are free
    bw = 2 * r - 1
    hess = np.zeros((bw + 1, n_free))  # upper banded storage
    rhs = np.zeros((n_free, 3))

    def free_index(knot, k):  # k in 1..r-1
        if knot == 0 or knot == n_knots - 1:
            return -1
        return (knot - 1) * nd + (k - 1)

    for i, T in enumerate(durations):
        c = _segment_cost_matrix(r, r, float(T))
        local = []  # (free index or -1, fixed value vector)
        for knot in (i, i + 1):
            local.append((-1, waypoints[knot]))
            for k in range(1, r):
                local.append((free_index(knot, k), None))
        for a, (fa, _) in enumerate(local):
            if fa < 0:
                continue
            for b, (fb, vb) in enumerate(local):
                if fb >= 0:
                    if fb >= fa:
                        hess[bw + fa - fb, fb] += c[a, b]
                elif vb is not None:
                    rhs[fa] -= c[a, b] * vb
                # fixed zero end derivatives contribute nothing
    sol = solveh_banded(hess, rhs)
    for knot in range(1, n_knots - 1):
        for k in range(1, r):
            derivs[knot, k - 1] = sol[free_index(knot, k)]
    return derivs


def min_jerk_trajectory(waypoints, v_nom: float = 0.5, order: int = JERK,
                        min_duration: float = 0.5, durations=None) -> PolynomialTrajectory:
    """Minimum-jerk (or minimum-snap with ``order=4``) trajectory, rest to rest.

    Consecutive duplicate waypoints are dropped; a single distinct point
    yields a constant, zero-duration trajectory.
    """
    if v_nom <= 0:
        raise ValueError("nominal speed must be positive")
    if order not in (JERK, SNAP):
        raise ValueError("order must be 3 (jerk) or 4 (snap)")
    w = dedupe_waypoints(waypoints)
    if len(w) == 1:
        return PolynomialTrajectory(w, np.zeros(0), np.zeros((0, 3, 2 * order)), order)
    T = allocate_durations(w, v_nom, min_duration) if durations is None else np.asarray(durations, float)
    if len(T) != len(w) - 1 or np.any(T <= 0):
        raise ValueError("need one positive duration per segment")
    return hermite_trajectory(w, optimal_derivatives(w, T, order), T, order)
