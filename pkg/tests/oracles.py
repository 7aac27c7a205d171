"""Slow, independent reference implementations used only by the tests.

Everything here is written from first principles (no calls into the package
beyond plain data) so that agreement with the package is meaningful.
"""

import itertools

import numpy as np
from scipy.spatial import ConvexHull, QhullError


def nearest_distance(points, cloud):
    return np.min(np.linalg.norm(points[:, None, :] - cloud[None, :, :], axis=2), axis=1)


def circumball(pts):
    """Centre and radius of the ball through all of ``pts`` (in their affine
    hull), or None when they are affinely dependent."""
    if len(pts) == 1:
        return pts[0], 0.0
    u = pts[1:] - pts[0]
    gram = u @ u.T
    if abs(np.linalg.det(gram)) < 1e-14 * max(1.0, np.abs(gram).max()) ** len(u):
        return None
    lam = np.linalg.solve(gram, 0.5 * np.einsum("ij,ij->i", u, u))
    c = pts[0] + lam @ u
    return c, float(np.linalg.norm(pts[0] - c))


def radius(pts, rel=1e-9):
    """Smallest enclosing radius as the least circumradius, over support sets of
    at most D + 1 points, whose ball holds every point."""
    best = np.inf
    for k in range(1, min(len(pts), pts.shape[1] + 1) + 1):
        for sub in itertools.combinations(range(len(pts)), k):
            ball = circumball(pts[list(sub)])
            if ball is None:
                continue
            c, r = ball
            if np.all(np.linalg.norm(pts - c, axis=1) <= r + rel * (1 + r)):
                best = min(best, r)
    return best


def segment_sup(a, b, cloud):
    """Exact max over [a, b] of the distance to ``cloud``.

    Along a line the nearest-site switches happen on perpendicular
    bisectors, so the maximum sits at an endpoint or a bisector crossing.
    """
    ab = b - a
    cands = [0.0, 1.0]
    for i, j in itertools.combinations(range(len(cloud)), 2):
        p, q = cloud[i], cloud[j]
        # |a + s ab - p|^2 = |a + s ab - q|^2 is linear in s
        denom = 2 * ab @ (q - p)
        if denom != 0:
            s = ((q @ q - p @ p) - 2 * a @ (q - p)) / denom
            if 0 <= s <= 1:
                cands.append(s)
    pts = a + np.array(cands)[:, None] * ab
    return float(nearest_distance(pts, cloud).max())


def _inside(poly, pts, tol=1e-12):
    """Points inside a counter-clockwise convex polygon (boundary included)."""
    ok = np.ones(len(pts), dtype=bool)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        e = b - a
        cross = e[0] * (pts[:, 1] - a[1]) - e[1] * (pts[:, 0] - a[0])
        ok &= cross >= -tol * (1 + np.linalg.norm(e))
    return ok


class PlanarDefectOracle:
    """Exact sup of d(., X) over Conv(sigma), for planar clouds X."""

    def __init__(self, cloud):
        self.x = np.asarray(cloud, dtype=float)
        assert self.x.shape[1] == 2
        n = len(self.x)
        self.seg = {}
        for i, j in itertools.combinations(range(n), 2):
            self.seg[i, j] = self.seg[j, i] = segment_sup(self.x[i], self.x[j], self.x)
        centres = []
        for tri in itertools.combinations(range(n), 3):
            ball = circumball(self.x[list(tri)])
            if ball is not None:
                centres.append(ball[0])
        self.centres = np.array(centres).reshape(-1, 2)
        self.centre_values = nearest_distance(self.centres, self.x) if len(centres) else \
            np.empty(0)

    def hull_sup(self, subset):
        subset = list(subset)
        if len(subset) == 1:
            return 0.0
        pts = self.x[subset]
        try:
            hull = ConvexHull(pts)
        except QhullError:
            # collinear: the hull is the segment between the extreme points
            d = pts - pts[0]
            axis = d[np.argmax(np.linalg.norm(d, axis=1))]
            proj = d @ axis
            return self.seg[subset[int(np.argmin(proj))], subset[int(np.argmax(proj))]]
        ring = [subset[v] for v in hull.vertices]  # counter-clockwise
        best = max(self.seg[a, b] for a, b in zip(ring, ring[1:] + ring[:1]))
        if len(self.centres):
            inside = _inside(self.x[ring], self.centres)
            if inside.any():
                best = max(best, float(self.centre_values[inside].max()))
        return best


def grid_bracket(vertices, cloud, pitch):
    """Lipschitz-certified bracket (lower, upper) on the sup over a triangle
    (or segment) of the distance to ``cloud``: the grid maximum is a lower
    bound and adding the grid's covering radius gives an upper bound."""
    v = np.asarray(vertices, dtype=float)
    diam = max(np.linalg.norm(a - b) for a in v for b in v)
    k = max(1, int(np.ceil(diam / pitch)))
    if len(v) == 2:
        w = np.linspace(0, 1, k + 1)[:, None]
        pts = v[0] + w * (v[1] - v[0])
    else:
        w = np.array([(a, b, k - a - b) for a in range(k + 1) for b in range(k + 1 - a)],
                     dtype=float) / k
        pts = w @ v
    lower = float(nearest_distance(pts, cloud).max())
    # every point of the hull is within diam / k of a grid point
    return lower, lower + diam / k


def full_profile(cloud):
    """(breakpoints, values) of the all-subset defect function of a planar cloud."""
    x = np.asarray(cloud, dtype=float)
    oracle = PlanarDefectOracle(x)
    radii, sups = [], []
    for k in range(2, len(x) + 1):
        for sub in itertools.combinations(range(len(x)), k):
            radii.append(radius(x[list(sub)]))
            sups.append(oracle.hull_sup(sub))
    order = np.argsort(radii, kind="stable")
    radii = np.array(radii)[order]
    running = np.maximum.accumulate(np.array(sups)[order])
    last = np.r_[radii[1:] > radii[:-1] * (1 + 1e-12), True]
    return radii[last], running[last]
