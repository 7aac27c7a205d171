"""Neighbour queries over a point cloud.

All answers match a brute-force scan, including the tie rule (equal
distances are ordered by the smaller index).  Distances are always recomputed
with :func:`pair_distances` so that every caller sees bit-identical values.
"""

import numpy as np
from scipy.spatial import cKDTree

from .geom import as_cloud


def pair_distances(x, i, j):
    diff = x[i] - x[j]
    return np.sqrt(np.einsum("...k,...k->...", diff, diff))


class NeighborIndex:
    """Immutable neighbour index over an ``(n, D)`` cloud."""

    def __init__(self, points):
        self.points = as_cloud(points)
        self.points.setflags(write=False)
        self.tree = cKDTree(self.points)
        self._knn_cache = {}

    @property
    def n(self):
        return self.points.shape[0]

    def _check_k(self, k):
        if k < 1:
            raise ValueError("K must be positive")
        if k >= self.n:
            raise ValueError(f"K={k} needs at least K+1={k + 1} points, cloud has {self.n}")

    def knn_all(self, k):
        """K nearest neighbours of every point (self excluded).

        Returns
        -------
        idx : (n, k) int array
        dist : (n, k) float array, ascending along rows
        """
        self._check_k(k)
        if k in self._knn_cache:
            return self._knn_cache[k]
        x = self.points
        n = self.n
        m = min(k + 2, n)
        _, cand = self.tree.query(x, k=m)
        cand = np.asarray(cand, dtype=np.int64).reshape(n, m)
        rows = np.arange(n)[:, None]
        cand = np.take_along_axis(cand, np.argsort(cand, axis=1), axis=1)
        dist = pair_distances(x, rows, cand)
        is_self = cand == rows
        dist[is_self] = -1.0
        order = np.argsort(dist, axis=1, kind="stable")
        cand = np.take_along_axis(cand, order, axis=1)
        dist = np.take_along_axis(dist, order, axis=1)
        idx = cand[:, 1:k + 1].copy()
        out = dist[:, 1:k + 1].copy()
        # rows where self was not returned (many duplicates) or where a tie at
        # the cutoff may hide equal-distance points behind it
        slow = ~is_self.any(axis=1)
        if m < n:
            slow |= dist[:, k] >= dist[:, k + 1]
        for r in np.nonzero(slow)[0]:
            radius = dist[r, k] if is_self[r].any() else dist[r, -1]
            c = np.asarray(self.tree.query_ball_point(x[r], radius * (1 + 1e-12) + 1e-300),
                           dtype=np.int64)
            c = c[c != r]
            d = pair_distances(x, r, c)
            o = np.lexsort((c, d))[:k]
            idx[r], out[r] = c[o], d[o]
        self._knn_cache[k] = (idx, out)
        return idx, out

    def neighbors_within(self, radius):
        """CSR lists of all points within ``radius`` of each point, self included.

        Returns
        -------
        ptr : (n+1,) int array
        idx : int array
        """
        lists = self.tree.query_ball_point(self.points, radius * (1 + 1e-12))
        lengths = np.fromiter((len(hits) for hits in lists), dtype=np.int64, count=self.n)
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(lengths, out=ptr[1:])
        idx = np.fromiter((j for hits in lists for j in hits), dtype=np.int64, count=int(ptr[-1]))
        return ptr, idx


def knn(index, i, k):
    """Indices of the ``k`` nearest neighbours of point ``i``, nearest first."""
    if not 0 <= i < index.n:
        raise IndexError(f"point index {i} out of range")
    index._check_k(k)
    x = index.points
    d = pair_distances(x, i, np.arange(index.n))
    d[i] = np.inf
    order = np.lexsort((np.arange(index.n), d))
    return order[:k]


def edges_within(index, max_half_length):
    """All pairs whose half-length is at most ``max_half_length``.

    Returns
    -------
    pairs : (m, 2) int array with ``pairs[:, 0] < pairs[:, 1]``
    half_lengths : (m,) float array

    Sorted by half-length, then by ``(i, j)``.  Duplicate points show up as
    zero half-lengths.
    """
    if max_half_length < 0:
        raise ValueError("max_half_length must be nonnegative")
    x = index.points
    pairs = index.tree.query_pairs(2.0 * max_half_length * (1 + 1e-12) + 1e-300,
                                   output_type="ndarray")
    pairs = np.sort(pairs.reshape(-1, 2), axis=1).astype(np.int64)
    half = 0.5 * pair_distances(x, pairs[:, 0], pairs[:, 1])
    keep = half <= max_half_length
    pairs, half = pairs[keep], half[keep]
    order = np.lexsort((pairs[:, 1], pairs[:, 0], half))
    return pairs[order], half[order]


def horizon_ellK(index, k):
    """Half of the largest distance from a point to its k-th nearest neighbour."""
    _, dist = index.knn_all(k)
    return 0.5 * float(dist[:, -1].max())
