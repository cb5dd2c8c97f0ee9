"""Exact Euclidean distance transform (separable lower-envelope algorithm).

Two 1-D passes, columns then rows, each computing the lower envelope of
parabolas rooted at the sampled squared distances.  Results are exact:
for integer pixel grids the squared distances are integers.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_FAR = 1e20


@njit(cache=True)
def _envelope_1d(f, out, v, z):
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        fq = f[q] + q * q
        s = (fq - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        while s <= z[k]:
            k -= 1
            s = (fq - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d = q - v[k]
        out[q] = d * d + f[v[k]]


@njit(cache=True)
def _edt_sq(features):
    h, w = features.shape
    n = max(h, w)
    v = np.zeros(n, dtype=np.int64)
    z = np.zeros(n + 1, dtype=np.float64)
    f = np.empty(n, dtype=np.float64)
    buf = np.empty(n, dtype=np.float64)
    cols = np.empty((h, w), dtype=np.float64)
    for c in range(w):
        for r in range(h):
            f[r] = 0.0 if features[r, c] else _FAR
        _envelope_1d(f[:h], buf[:h], v, z)
        for r in range(h):
            cols[r, c] = buf[r]
    out = np.empty((h, w), dtype=np.float64)
    for r in range(h):
        _envelope_1d(cols[r], out[r], v, z)
    return out


def edt_squared(features: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance from every pixel to the nearest ``True`` pixel.

    Pixels of an image without any feature get ``inf``.
    """
    feats = np.ascontiguousarray(features, dtype=np.bool_)
    if feats.ndim != 2:
        raise ValueError("expected a 2-D binary map")
    if feats.size == 0:
        return np.zeros(feats.shape)
    out = _edt_sq(feats)
    out[out >= _FAR / 2] = np.inf
    return out


def distance_transform(features: np.ndarray) -> np.ndarray:
    return np.sqrt(edt_squared(features))
