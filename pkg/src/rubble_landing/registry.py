"""Global landing-site list: k-d tree deduplication and single-linkage clustering."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import Pose
from .errors import NoSitesError
from .kdtree import KDTree


@dataclass(frozen=True)
class ClusterParams:
    dedup_radius: float = 0.5
    cluster_dist: float = 0.5
    z_threshold: float = 0.01

    def __post_init__(self):
        if min(self.dedup_radius, self.cluster_dist, self.z_threshold) <= 0:
            raise ValueError("cluster parameters must be positive")


@dataclass
class GlobalSite:
    position: np.ndarray
    score: float
    frame_id: int


@dataclass
class SiteCluster:
    """Cluster of global sites; the centroid includes any applied drift offset."""

    members: list[int]
    position_sum: np.ndarray
    score: float
    drift: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def centroid(self) -> np.ndarray:
        return (self.position_sum + self.drift) / self.m


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller root wins so labels do not depend on traversal order
            lo, hi = min(ra, rb), max(ra, rb)
            self.parent[hi] = lo


def mergeable(a, b, params: ClusterParams) -> bool:
    return (math.hypot(a[0] - b[0], a[1] - b[1]) <= params.cluster_dist
            and abs(a[2] - b[2]) <= params.z_threshold)


class SiteRegistry:
    """Single-writer store of unique world-frame landing sites."""

    def __init__(self, params: ClusterParams = ClusterParams()):
        self.params = params
        self.sites: list[GlobalSite] = []
        self.tree = KDTree(3)
        self.clusters: list[SiteCluster] = []

    def __len__(self) -> int:
        return len(self.sites)

    def insert_candidates(self, sites: Iterable, frame_id: int = 0) -> int:
        """Add sites that have no stored neighbour within the dedup radius.

        Accepts :class:`~rubble_landing.detection.CandidateSite` objects or
        bare 3-vectors (score 0).  Returns the number of sites added.
        """
        added = 0
        for s in sites:
            pos = np.asarray(getattr(s, "world", s), dtype=np.float64)
            if self.tree.has_neighbor(pos, self.params.dedup_radius):
                continue
            self.tree.insert(pos)
            self.sites.append(GlobalSite(pos, float(getattr(s, "score", 0.0)), frame_id))
            added += 1
        return added

    def positions(self) -> np.ndarray:
        return self.tree.as_array()

    def cluster(self) -> list[SiteCluster]:
        """Connected components of the mergeability relation (single linkage)."""
        n = len(self.sites)
        if n == 0:
            self.clusters = []
            return []
        p = self.params
        reach = math.hypot(p.cluster_dist, p.z_threshold)
        uf = _UnionFind(n)
        pts = self.tree.points
        for i in range(n):
            for j in self.tree.query_radius(pts[i], reach):
                if j > i and mergeable(pts[i], pts[j], p):
                    uf.union(i, j)
        groups: dict[int, list[int]] = {}
        for i in range(n):
            groups.setdefault(uf.find(i), []).append(i)
        arr = self.positions()
        self.clusters = [
            SiteCluster(members, arr[members].sum(axis=0), max(self.sites[k].score for k in members))
            for _, members in sorted(groups.items())
        ]
        return self.clusters

    def apply_drift(self, drift) -> list[np.ndarray]:
        """Add one drift offset to every cluster's coordinate sum; returns new centroids."""
        d = np.asarray(drift, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(d)):
            raise ValueError("drift must be finite")
        for c in self.clusters:
            c.drift = c.drift + d
        return [c.centroid for c in self.clusters]

    def snapshot(self) -> dict:
        return {
            "sites": [{"position": [float(v) for v in s.position], "score": s.score, "frame": s.frame_id}
                      for s in self.sites],
            "clusters": [{"centroid": [float(v) for v in c.centroid], "members": c.m, "score": c.score,
                          "member_ids": list(c.members)} for c in self.clusters],
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_snapshot(cls, data: dict, params: ClusterParams = ClusterParams()) -> "SiteRegistry":
        reg = cls(params)
        for s in data.get("sites", []):
            pos = np.asarray(s["position"], dtype=np.float64)
            reg.tree.insert(pos)
            reg.sites.append(GlobalSite(pos, float(s.get("score", 0.0)), int(s.get("frame", 0))))
        arr = reg.positions()
        for c in data.get("clusters", []):
            members = list(c["member_ids"])
            psum = arr[members].sum(axis=0)
            drift = np.asarray(c["centroid"], dtype=np.float64) * len(members) - psum
            reg.clusters.append(SiteCluster(members, psum, float(c.get("score", 0.0)), drift))
        return reg


def select_site(clusters: list[SiteCluster], mode: str = "lowest_energy", *,
                index: int | None = None, pose: Pose | None = None) -> SiteCluster:
    """Pick a landing cluster.

    ``operator`` returns ``clusters[index]``.  ``nearest`` returns the
    cluster closest to ``pose`` (e.g. the ground station), ``lowest_energy``
    the one closest to ``pose`` taken as the UAV; both rank by straight-line
    distance, the same proxy the energy costmap uses.
    """
    if not clusters:
        raise NoSitesError("no landing clusters available")
    if mode == "operator":
        if index is None or not 0 <= index < len(clusters):
            raise IndexError(f"operator index {index} out of range for {len(clusters)} clusters")
        return clusters[index]
    if mode not in ("nearest", "lowest_energy"):
        raise ValueError(f"unknown selection mode {mode!r}")
    if pose is None:
        raise ValueError(f"mode {mode!r} needs a pose")
    ref = pose.translation
    dists = [float(np.linalg.norm(c.centroid - ref)) for c in clusters]
    return clusters[int(np.argmin(dists))]
