"""Convexity defect profiles.

The defect function of a finite set X is piecewise constant and only jumps at
radii of subsets of X.  A profile stores those jump locations (breakpoints)
together with the value just after each of them.
"""

import functools
import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from ._kernels import edge_defects
from .config import TOL
from .geom import as_cloud, min_enclosing_ball
from .spatial import NeighborIndex, edges_within, horizon_ellK, pair_distances


@dataclass(frozen=True)
class DefectProfile:
    breakpoints: np.ndarray
    values: np.ndarray
    horizon: float
    kind: str  # "graph" or "full"

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.shape != v.shape or b.ndim != 1:
            raise ValueError("breakpoints and values must be 1-d arrays of equal length")
        if np.any(np.diff(b) <= 0) or np.any(b <= 0):
            raise ValueError("breakpoints must be positive and strictly increasing")
        if len(b) and b[-1] > self.horizon:
            raise ValueError("breakpoints extend past the horizon")
        if self.kind not in ("graph", "full"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.breakpoints)

    def to_json(self):
        doc = {
            "kind": self.kind,
            "horizon": None if np.isinf(self.horizon) else float(self.horizon),
            "breakpoints": self.breakpoints.tolist(),
            "values": self.values.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        horizon = np.inf if doc["horizon"] is None else float(doc["horizon"])
        return cls(np.array(doc["breakpoints"], dtype=float),
                   np.array(doc["values"], dtype=float), horizon, doc["kind"])


def _profile_from_radii(radii, sups, horizon, kind):
    """Collapse per-simplex (radius, sup) pairs into a step profile."""
    radii = np.asarray(radii, dtype=float)
    sups = np.asarray(sups, dtype=float)
    keep = radii > 0
    radii, sups = radii[keep], sups[keep]
    if len(radii) == 0:
        return DefectProfile(np.empty(0), np.empty(0), horizon, kind)
    order = np.argsort(radii, kind="stable")
    radii, sups = radii[order], sups[order]
    running = np.maximum.accumulate(sups)
    last = np.r_[radii[1:] != radii[:-1], True]
    return DefectProfile(radii[last], running[last], horizon, kind)


# -- graph (edge-only) profile ----------------------------------------------------

def edge_sups(index, pairs, half, reach=None):
    """Exact sup of d(., X) over each listed segment.

    ``reach`` must bound ``3 * half`` from above; it defaults to the largest
    requested half-length.
    """
    x = index.points
    if len(half) == 0:
        return np.empty(0)
    if reach is None:
        reach = float(half.max())
    ptr, nbr = index.neighbors_within(3.0 * reach)
    return edge_defects(x, pairs[:, 0].copy(), pairs[:, 1].copy(), half, ptr, nbr)


class GraphDefect:
    """Graph defect profiles of one cloud at growing horizons.

    Per-edge sups do not depend on K, so each larger horizon only evaluates
    the edges it adds.
    """

    def __init__(self, cloud=None, index=None):
        if index is None:
            index = NeighborIndex(cloud)
        self.index = index
        self._reach = -1.0
        self._pairs = np.empty((0, 2), dtype=np.int64)
        self._half = np.empty(0)
        self._sups = np.empty(0)

    def _extend(self, ell):
        if ell <= self._reach:
            return
        pairs, half = edges_within(self.index, ell)
        # edges come sorted by half-length, so the known ones form a prefix
        known = int(np.searchsorted(half, self._reach, side="right")) if self._reach >= 0 else 0
        sups = edge_sups(self.index, pairs[known:], half[known:], ell)
        self._pairs, self._half = pairs, half
        self._sups = np.concatenate([self._sups[:known], sups])
        self._reach = ell

    def edges(self, ell):
        """``(pairs, half_lengths, sups)`` for every edge with half-length <= ``ell``."""
        self._extend(ell)
        m = int(np.searchsorted(self._half, ell, side="right"))
        return self._pairs[:m], self._half[:m], self._sups[:m]

    def profile(self, K):
        ell = horizon_ellK(self.index, K)
        _, half, sups = self.edges(ell)
        return _profile_from_radii(half, sups, ell, "graph")


def graph_defect_profile(cloud, index=None, K=16):
    """Edge-based defect profile up to the horizon ``ell_K``.

    Breakpoints are the half-lengths of all edges no longer than ``2 ell_K``.
    Each edge contributes the exact sup over the segment of the distance to
    the cloud; only points within twice the half-length of the midpoint can
    matter, and those all lie within three half-lengths of either endpoint.
    """
    return GraphDefect(cloud, index).profile(K)


# -- full (all-subset) profile -----------------------------------------------------

def _affine_frame(pts):
    center = pts.mean(axis=0)
    _, sv, vt = np.linalg.svd(pts - center, full_matrices=False)
    scale = max(sv[0], 1.0) if len(sv) else 1.0
    rank = int(np.sum(sv > 1e-10 * scale))
    return center, vt[:rank]


def _hull_cells(pts):
    """Split Conv(pts) into full-dimensional simplices of its affine hull."""
    center, frame = _affine_frame(pts)
    k = frame.shape[0]
    if k == 0:
        return np.empty((0, 1, pts.shape[1]))
    coords = (pts - center) @ frame.T
    if k == 1:
        lo, hi = np.argmin(coords[:, 0]), np.argmax(coords[:, 0])
        return pts[[[lo, hi]]]
    tri = Delaunay(coords)
    return pts[tri.simplices]


@functools.lru_cache(maxsize=None)
def _pairs(m):
    return np.triu_indices(m, 1)


def hull_sup_distance(pts, tree, tol=TOL.full_defect_abs, floor=0.0):
    """Certified sup over Conv(pts) of the distance to the points in ``tree``.

    Branch and bound over a triangulation of the hull, splitting cells along
    their longest edge.  A cell is discarded once its centroid value plus its
    circumradius bound (the distance function is 1-Lipschitz) cannot beat the
    best value found by more than ``tol``.

    Returns ``max(floor, lower bound)`` where the lower bound is within ``tol``
    of the true sup.  A ``floor`` known to be reached elsewhere lets the search
    drop cells early.
    """
    cells = _hull_cells(np.asarray(pts, dtype=float))
    best = float(floor)
    while len(cells):
        cen = cells.mean(axis=1)
        val = tree.query(cen)[0]
        best = max(best, float(val.max()))
        rad = np.linalg.norm(cells - cen[:, None, :], axis=2).max(axis=1)
        live = val + rad > best + tol
        cells = cells[live]
        if not len(cells):
            break
        a_idx, b_idx = _pairs(cells.shape[1])
        lengths = np.linalg.norm(cells[:, a_idx] - cells[:, b_idx], axis=2)
        pick = np.argmax(lengths, axis=1)
        rows = np.arange(len(cells))
        ia, ib = a_idx[pick], b_idx[pick]
        mid = 0.5 * (cells[rows, ia] + cells[rows, ib])
        left = cells.copy()
        right = cells.copy()
        left[rows, ib] = mid
        right[rows, ia] = mid
        cells = np.concatenate([left, right])
    return best


def full_defect_profile(cloud, tol=TOL.full_defect_abs):
    """Defect profile over every subset of the cloud (exponential; n <= 15).

    Two-point subsets are evaluated exactly; larger hulls by certified branch
    and bound, so the value at each breakpoint is accurate to ``tol``.
    """
    x = as_cloud(cloud)
    n = len(x)
    if n > TOL.full_defect_max_n:
        raise ValueError(f"full_defect_profile enumerates 2^n subsets; refusing n={n} > "
                         f"{TOL.full_defect_max_n}")
    subsets = [s for k in range(2, n + 1) for s in itertools.combinations(range(n), k)]
    # pair radii use the same formula as edge half-lengths so breakpoints agree bitwise
    radii = np.array([0.5 * float(pair_distances(x, s[0], s[1])) if len(s) == 2
                      else min_enclosing_ball(x[list(s)]).radius for s in subsets])
    order = np.argsort(radii, kind="stable")
    tree = cKDTree(x)
    # every point is a candidate for every edge
    ptr = np.arange(n + 1, dtype=np.int64) * n
    nbr = np.tile(np.arange(n, dtype=np.int64), n)
    sups = np.zeros(len(subsets))
    running = 0.0
    for k in order:
        s = subsets[k]
        # the sup over a hull never exceeds its radius
        if radii[k] <= running:
            sups[k] = running
        elif len(s) == 2:
            seg = edge_defects(x, np.array([s[0]]), np.array([s[1]]), radii[k:k + 1],
                               ptr, nbr)[0]
            sups[k] = max(running, seg)
        else:
            sups[k] = hull_sup_distance(x[list(s)], tree, tol, floor=running)
        running = sups[k]
    return _profile_from_radii(radii, sups, np.inf, "full")


# -- queries -----------------------------------------------------------------------------

def eval_defect(profile, t):
    """Value of the step function at scale ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t > profile.horizon:
        raise ValueError(f"t={t} lies past the profile horizon {profile.horizon}")
    m = np.searchsorted(profile.breakpoints, t, side="right")
    return 0.0 if m == 0 else float(profile.values[m - 1])


def t_lambda(profile, lam, full_output=False):
    """Smallest breakpoint t with ``h(t) <= lam * t``.

    When no breakpoint qualifies the horizon is returned and the result is
    flagged as saturated.

    Returns
    -------
    t : float
    saturated : bool
        Only when ``full_output`` is true.
    """
    if not 0 < lam <= 1:
        raise ValueError("lambda must lie in (0, 1]")
    if len(profile) == 0:
        raise ValueError("empty profile")
    ok = np.nonzero(profile.values <= lam * profile.breakpoints)[0]
    if len(ok):
        t, saturated = float(profile.breakpoints[ok[0]]), False
    else:
        t, saturated = float(profile.horizon), True
    return (t, saturated) if full_output else t


def t_lambda_grid(profile, lambdas):
    """Vectorised :func:`t_lambda` over ascending ``lambdas``; zero entries and
    non-qualifying ones take the horizon.

    Returns
    -------
    t : (L,) array
    saturated : (L,) bool array
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if len(profile) == 0:
        raise ValueError("empty profile")
    ratio = profile.values / profile.breakpoints
    prefix = np.minimum.accumulate(ratio)
    # prefix is nonincreasing; first index with prefix <= lam
    pos = np.searchsorted(-prefix, -lambdas, side="left")
    saturated = (pos >= len(prefix)) | (lambdas <= 0)
    t = np.where(saturated, profile.horizon,
                 profile.breakpoints[np.minimum(pos, len(prefix) - 1)])
    return t, saturated
