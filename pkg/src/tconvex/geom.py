"""Metric primitives: enclosing balls, hull distances, Hausdorff distances,
subspace angles.

Point clouds are plain ``(n, D)`` float arrays throughout the package.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree

from .config import TOL


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def contains(self, p, tol=TOL.meb_rel):
        slack = tol * (1.0 + self.radius)
        return float(np.linalg.norm(np.asarray(p) - self.center)) <= self.radius + slack


@dataclass(frozen=True)
class Subspace:
    """Affine subspace ``origin + span(basis)``; ``basis`` has orthonormal rows."""

    basis: np.ndarray
    origin: np.ndarray

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        origin = np.asarray(self.origin, dtype=float)
        if basis.shape[1] != origin.shape[0]:
            raise ValueError("basis and origin live in different ambient dimensions")
        gram = basis @ basis.T
        if not np.allclose(gram, np.eye(basis.shape[0]), atol=1e-12, rtol=0):
            raise ValueError("basis rows must be orthonormal")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def ambient_dim(self):
        return self.basis.shape[1]

    def projector(self):
        return self.basis.T @ self.basis

    @classmethod
    def from_vectors(cls, vectors, origin=None):
        """Orthonormalize the rows of ``vectors`` (QR) into a subspace."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        q, _ = np.linalg.qr(vectors.T)
        if origin is None:
            origin = np.zeros(vectors.shape[1])
        return cls(q.T.copy(), origin)


def as_cloud(points, name="points"):
    """Validate and return an ``(n, D)`` float array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array of shape (n, D)")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if arr.shape[1] == 0:
        raise ValueError(f"{name} has zero ambient dimension")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def _as_point_list(points):
    if isinstance(points, np.ndarray):
        if points.ndim != 2:
            raise ValueError("points must be a 2-d array")
        return as_cloud(points)
    pts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
    if not pts:
        raise ValueError("points is empty")
    if len({p.shape for p in pts}) != 1 or pts[0].ndim != 1:
        raise ValueError("points have mismatched dimensions")
    return as_cloud(np.vstack(pts))


# -- smallest enclosing ball -------------------------------------------------

def _circumball(support):
    """Smallest ball with every support point on its boundary, taken in the
    affine hull of the support."""
    p0 = support[0]
    if len(support) == 1:
        return p0.copy(), 0.0
    u = support[1:] - p0
    gram = u @ u.T
    rhs = 0.5 * np.einsum("ij,ij->i", u, u)
    try:
        lam = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        lam = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    center = p0 + lam @ u
    radius = float(np.max(np.linalg.norm(support - center, axis=1)))
    return center, radius


def _inside(p, center, radius, tol):
    return np.linalg.norm(p - center) <= radius + tol * (1.0 + radius)


def _mtf(pts, order, end, support, dim, tol):
    if support:
        center, radius = _circumball(pts[support])
    else:
        center, radius = pts[order[0]].copy(), -1.0
    if len(support) == dim + 1:
        return center, radius
    i = 0
    while i < end:
        k = order[i]
        if radius < 0 or not _inside(pts[k], center, radius, tol):
            center, radius = _mtf(pts, order, i, support + [k], dim, tol)
            order.insert(0, order.pop(i))
        i += 1
    return center, radius


def min_enclosing_ball(points, tol=TOL.meb_rel):
    """Smallest enclosing ball of a finite point set.

    Move-to-front variant of Welzl's algorithm without random shuffling, so
    the result depends only on the input order.

    Parameters
    ----------
    points : (m, D) array_like or sequence of points
    tol : float
        Relative containment slack, ``tol * (1 + radius)``.

    Returns
    -------
    Ball
    """
    pts = _as_point_list(points)
    if len(pts) == 1:
        return Ball(pts[0].copy(), 0.0)
    order = list(range(len(pts)))
    center, radius = _mtf(pts, order, len(pts), [], pts.shape[1], tol)
    # the support ball can leave points a hair outside; absorb them
    radius = max(radius, float(np.max(np.linalg.norm(pts - center, axis=1))))
    return Ball(center, radius)


def meb_radius(points):
    return min_enclosing_ball(points).radius


# -- distance to a convex hull ------------------------------------------------

def _project_simplex(v):
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def segment_distance(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    s = min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + s * ab)))


def nearest_in_hull(p, vertices, tol=TOL.hull_step, max_iter=TOL.hull_max_iter):
    """Barycentric weights of the point of ``Conv(vertices)`` nearest to ``p``.

    Accelerated projected gradient on the barycentric coordinates, stopped once
    no coordinate moves by more than ``tol``.
    """
    v = np.asarray(vertices, dtype=float)
    m = len(v)
    # centring leaves the weights unchanged and keeps the Gram matrix well scaled
    centre = v.mean(axis=0)
    v = v - centre
    p = np.asarray(p, dtype=float) - centre
    gram = v @ v.T
    lin = v @ p
    lam = np.full(m, 1.0 / m)
    top = np.linalg.eigvalsh(gram)[-1]
    if not top > 0:
        # all vertices coincide (to working precision)
        return lam
    step = 1.0 / top
    y = lam.copy()
    momentum = 1.0
    for _ in range(max_iter):
        new = _project_simplex(y - step * (gram @ y - lin))
        moved = np.max(np.abs(new - lam))
        nxt = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum**2))
        y = new + ((momentum - 1.0) / nxt) * (new - lam)
        # restart the momentum whenever the objective would go up
        if (new - lam) @ (gram @ new - lin) > 0:
            y, nxt = new.copy(), 1.0
        lam, momentum = new, nxt
        if moved < tol:
            break
    return lam


# face enumeration is used while it needs at most this many affine projections
MAX_FACES = 4096


def _face_distance(p, v, max_size):
    """Smallest distance to ``Conv(v)`` over faces of at most ``max_size`` vertices.

    The nearest point lies in the relative interior of the hull of some
    affinely independent vertex subset (Caratheodory), where it is the
    orthogonal projection onto that subset's affine hull with nonnegative
    weights.  Singletons always qualify, so the minimum is attained.
    """
    best = min(float(np.linalg.norm(p - q)) for q in v)
    for size in range(2, max_size + 1):
        for idx in combinations(range(len(v)), size):
            base = v[idx[0]]
            edges = (v[list(idx[1:])] - base).T
            coef, _, rank, _ = np.linalg.lstsq(edges, p - base, rcond=None)
            if rank < size - 1 or coef.min() < 0 or coef.sum() > 1:
                continue
            best = min(best, float(np.linalg.norm(p - base - edges @ coef)))
    return best


def dist_point_to_hull(p, simplex):
    """Euclidean distance from ``p`` to the convex hull of ``simplex``.

    Exact (up to rounding) by enumerating faces of at most ``D + 1`` vertices;
    very large vertex sets fall back to projected gradient on barycentric
    coordinates.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    v = _as_point_list(simplex)
    if v.shape[1] != p.shape[0]:
        raise ValueError("point and simplex dimensions differ")
    if len(v) == 1:
        return float(np.linalg.norm(p - v[0]))
    if len(v) == 2:
        return segment_distance(p, v[0], v[1])
    max_size = min(len(v), v.shape[1] + 1)
    if sum(math.comb(len(v), k) for k in range(2, max_size + 1)) <= MAX_FACES:
        return _face_distance(p, v, max_size)
    lam = nearest_in_hull(p, v)
    return float(np.linalg.norm(lam @ v - p))


# -- Hausdorff distances -------------------------------------------------------

def hausdorff(a, b, mode="symmetric"):
    """Hausdorff distance between finite sets.

    ``mode="asymmetric"`` returns ``sup_{x in a} d(x, b)``; ``"symmetric"``
    returns the max over both directions.
    """
    a = as_cloud(a, "a")
    b = as_cloud(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError("clouds have different ambient dimensions")
    forward = float(np.max(cKDTree(b).query(a)[0]))
    if mode == "asymmetric":
        return forward
    if mode != "symmetric":
        raise ValueError(f"unknown mode {mode!r}")
    return max(forward, float(np.max(cKDTree(a).query(b)[0])))


# -- subspaces -------------------------------------------------------------------

def subspace_angle(u, v):
    """Operator norm of the difference of the orthogonal projectors onto the
    linear parts of ``u`` and ``v``."""
    if u.ambient_dim != v.ambient_dim:
        raise ValueError("subspaces live in different ambient dimensions")
    if u.dim != v.dim:
        raise ValueError("subspaces have different dimensions")
    diff = u.projector() - v.projector()
    return float(min(1.0, np.linalg.norm(diff, 2)))
