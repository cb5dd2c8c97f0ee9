"""Incremental 3-D k-d tree with radius queries.

Points are inserted by descending to a leaf.  The tree is rebuilt as a
median-split balanced tree whenever its size doubles since the last build,
which keeps query depth logarithmic without rebalancing on every insert.
"""

from __future__ import annotations

import numpy as np


class _Node:
    __slots__ = ("point", "index", "axis", "left", "right")

    def __init__(self, point, index, axis):
        self.point = point
        self.index = index
        self.axis = axis
        self.left = None
        self.right = None


class KDTree:
    def __init__(self, dim: int = 3):
        self.dim = dim
        self.root = None
        self.points: list[tuple[float, ...]] = []
        self._built_size = 0

    def __len__(self) -> int:
        return len(self.points)

    def insert(self, point) -> int:
        """Add a point and return its index."""
        p = tuple(float(v) for v in point)
        idx = len(self.points)
        self.points.append(p)
        if len(self.points) >= max(2 * self._built_size, 8):
            self.rebuild()
            return idx
        if self.root is None:
            self.root = _Node(p, idx, 0)
            return idx
        node = self.root
        while True:
            side = "left" if p[node.axis] < node.point[node.axis] else "right"
            child = getattr(node, side)
            if child is None:
                setattr(node, side, _Node(p, idx, (node.axis + 1) % self.dim))
                return idx
            node = child

    def rebuild(self) -> None:
        self._built_size = len(self.points)
        self.root = self._build(list(range(len(self.points))), 0)

    def _build(self, indices, depth):
        if not indices:
            return None
        axis = depth % self.dim
        indices.sort(key=lambda i: (self.points[i][axis], i))
        mid = len(indices) // 2
        # equal keys must go right, matching the insertion rule
        while mid > 0 and self.points[indices[mid - 1]][axis] == self.points[indices[mid]][axis]:
            mid -= 1
        i = indices[mid]
        node = _Node(self.points[i], i, axis)
        node.left = self._build(indices[:mid], depth + 1)
        node.right = self._build(indices[mid + 1:], depth + 1)
        return node

    def query_radius(self, center, radius: float) -> list[int]:
        """Indices of all points within ``radius`` (inclusive) of ``center``."""
        c = tuple(float(v) for v in center)
        r2 = radius * radius
        out: list[int] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node is None:
                continue
            p = node.point
            d2 = sum((a - b) ** 2 for a, b in zip(p, c))
            if d2 <= r2:
                out.append(node.index)
            delta = c[node.axis] - p[node.axis]
            if delta < 0:
                stack.append(node.left)
                if delta * delta <= r2:
                    stack.append(node.right)
            else:
                stack.append(node.right)
                if delta * delta <= r2:
                    stack.append(node.left)
        return sorted(out)

    def has_neighbor(self, center, radius: float) -> bool:
        c = tuple(float(v) for v in center)
        r2 = radius * radius
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node is None:
                continue
            p = node.point
            if sum((a - b) ** 2 for a, b in zip(p, c)) <= r2:
                return True
            delta = c[node.axis] - p[node.axis]
            near, far = (node.left, node.right) if delta < 0 else (node.right, node.left)
            if delta * delta <= r2:
                stack.append(far)
            stack.append(near)
        return False

    def depth(self) -> int:
        def walk(node):
            return 0 if node is None else 1 + max(walk(node.left), walk(node.right))
        return walk(self.root)

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=np.float64).reshape(-1, self.dim)
