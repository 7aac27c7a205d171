"""Reconstruction at a chosen scale, tangent estimates and risk evaluation."""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._kernels import count_extensions, extend_cliques, paired_simplex_dist, simplex_radii
from .config import TOL
from .geom import Subspace, as_cloud, dist_point_to_hull
from .manifolds import unit_ball_volume
from .spatial import NeighborIndex, edges_within

# rows per batch in risk evaluation, and candidate cliques per batch in reconstruct
_CHUNK = 100_000
_CANDIDATES = 2_000_000


@dataclass(frozen=True)
class SimplicialComplex:
    """Every simplex of at most ``d_cap + 1`` cloud points whose smallest
    enclosing ball has radius <= t.

    ``simplices[k]`` is an ``(m_k, k + 1)`` array of sorted vertex indices in
    lexicographic order, ``radii[k]`` the matching enclosing-ball radii.
    """

    t: float
    d_cap: int
    n_vertices: int
    simplices: tuple
    radii: tuple

    def counts(self):
        return [len(s) for s in self.simplices]

    def __len__(self):
        return sum(self.counts())

    def to_json(self):
        doc = {"t": float(self.t), "d_cap": int(self.d_cap),
               "simplices": {str(k): s.tolist() for k, s in enumerate(self.simplices)}}
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text, cloud=None):
        """Rebuild a complex; radii are recomputed when ``cloud`` is given and
        left as NaN otherwise."""
        doc = json.loads(text)
        d_cap = int(doc["d_cap"])
        simplices = tuple(np.array(doc["simplices"].get(str(k), []), dtype=np.int64)
                          .reshape(-1, k + 1) for k in range(d_cap + 1))
        if cloud is not None:
            x = as_cloud(cloud)
            radii = tuple(_radii(x, s) for s in simplices)
        else:
            radii = tuple(np.full(len(s), np.nan) for s in simplices)
        return cls(float(doc["t"]), d_cap, len(simplices[0]), simplices, radii)


def _radii(x, simp):
    if simp.shape[1] == 1:
        return np.zeros(len(simp))
    if simp.shape[1] == 2:
        d = x[simp[:, 0]] - x[simp[:, 1]]
        return 0.5 * np.sqrt(np.einsum("ij,ij->i", d, d))
    return simplex_radii(x, simp, TOL.meb_rel)


class ComplexTooLarge(RuntimeError):
    """Raised when a reconstruction would exceed its simplex budget."""


def reconstruct(cloud, t, d_cap, index=None, max_simplices=None):
    """Čech-type complex of the cloud at scale ``t``.

    Cliques of the graph joining points at distance <= 2t are grown one
    vertex at a time (larger index only, so each clique appears once) and kept
    when their smallest enclosing ball has radius <= t.  A simplex that passes
    has all its faces in the complex, since the radius is monotone under
    taking subsets, so growing only kept simplices loses nothing.

    ``max_simplices`` caps the number of simplices (kept or candidate) held
    at any one level; going past it raises :class:`ComplexTooLarge`.
    """
    x = as_cloud(cloud)
    n, D = x.shape
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not 1 <= d_cap <= D:
        raise ValueError(f"d_cap must lie in [1, {D}]")
    if index is None:
        index = NeighborIndex(x)
    vertices = np.arange(n, dtype=np.int64)[:, None]
    budget = np.inf if max_simplices is None else int(max_simplices)
    pairs, half = edges_within(index, t)
    if len(pairs) > budget:
        raise ComplexTooLarge(f"{len(pairs)} edges at t={t:g} exceed the budget of {budget}")
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs, half = pairs[order], half[order]
    simplices, radii = [vertices, pairs], [np.zeros(n), half]

    # sorted adjacency lists (both directions)
    both = np.concatenate([pairs, pairs[:, ::-1]])
    both = both[np.lexsort((both[:, 1], both[:, 0]))]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(ptr, both[:, 0] + 1, 1)
    ptr = np.cumsum(ptr)
    nbr = both[:, 1].copy()

    for k in range(2, d_cap + 1):
        prev = simplices[-1]
        kept, kept_r = [], []
        counts = np.cumsum(count_extensions(prev, ptr, nbr))
        total = int(counts[-1]) if len(counts) else 0
        if total > budget:
            raise ComplexTooLarge(f"{total} candidate {k}-simplices at t={t:g} exceed the "
                                  f"budget of {budget}")
        # batch boundaries so that each batch yields about _CANDIDATES rows
        cuts = np.searchsorted(counts, np.arange(_CANDIDATES, total, _CANDIDATES), side="right")
        bounds = np.unique(np.concatenate([[0], cuts, [len(prev)]]))
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            cand = extend_cliques(prev[lo:hi], ptr, nbr)
            if len(cand) == 0:
                continue
            r = simplex_radii(x, cand, TOL.meb_rel)
            ok = r <= t
            kept.append(cand[ok])
            kept_r.append(r[ok])
        if kept:
            simplices.append(np.concatenate(kept))
            radii.append(np.concatenate(kept_r))
        else:
            simplices.append(np.empty((0, k + 1), dtype=np.int64))
            radii.append(np.empty(0))
    return SimplicialComplex(float(t), int(d_cap), n, tuple(simplices), tuple(radii))


def oracle_scale(n, d, f_min):
    """Deterministic scale ``(7/4) (3 ln n / (alpha_d f_min n))^(1/d)`` that
    attains the minimax rate when the density lower bound is known."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return 1.75 * (3 * math.log(n) / (unit_ball_volume(d) * f_min * n)) ** (1.0 / d)


# -- tangent spaces -------------------------------------------------------------------------

def _top_directions(vectors, d, weights=None):
    if weights is not None:
        vectors = vectors * np.sqrt(weights)[:, None]
    _, _, vt = np.linalg.svd(vectors, full_matrices=False)
    return vt[:d]


def sup_residual(displacements, basis):
    """Largest distance from the displacement rows to span(basis)."""
    perp = displacements - (displacements @ basis.T) @ basis
    return float(np.max(np.linalg.norm(perp, axis=1))) if len(perp) else 0.0


def tangent_estimate(cloud, index, i, t, d, refine=False, iterations=20):
    """Estimate the d-dimensional tangent space at point ``i`` from its
    neighbours within distance ``t``.

    The default fit is local PCA of the displacements ``X_j - X_i``.  With
    ``refine`` the sup of the residuals is lowered by Lawson-style reweighting
    (weights multiplied by the residuals); the refined space is kept only if
    its sup residual is strictly smaller.
    """
    if index is None:
        index = NeighborIndex(cloud)
    x = index.points
    if not 0 <= i < len(x):
        raise IndexError(f"point index {i} out of range")
    D = x.shape[1]
    if not 1 <= d <= D:
        raise ValueError(f"d must lie in [1, {D}]")
    near = np.asarray(index.tree.query_ball_point(x[i], t * (1 + 1e-12)), dtype=np.int64)
    near = near[near != i]
    if len(near) < d + 1:
        raise ValueError(f"only {len(near)} neighbours within t={t:g} of point {i}; "
                         f"need at least {d + 1}")
    disp = x[near] - x[i]
    basis = _top_directions(disp, d)
    if refine:
        best = sup_residual(disp, basis)
        w = np.full(len(disp), 1.0 / len(disp))
        current = basis
        for _ in range(iterations):
            perp = disp - (disp @ current.T) @ current
            res = np.linalg.norm(perp, axis=1)
            if res.max() == 0:
                break
            w = w * res
            if w.sum() == 0:
                break
            w /= w.sum()
            current = _top_directions(disp, d, w)
            value = sup_residual(disp, current)
            if value < best:
                best, basis = value, current
    basis = np.linalg.qr(basis.T)[0].T
    return Subspace(basis.copy(), x[i].copy())


def tangent_estimates(cloud, t, d, points=None, refine=False, index=None):
    """:func:`tangent_estimate` at each index in ``points`` (default: all)."""
    if index is None:
        index = NeighborIndex(cloud)
    if points is None:
        points = range(index.n)
    return [tangent_estimate(None, index, int(i), t, d, refine=refine) for i in points]


# -- risk ------------------------------------------------------------------------------------

def _hull_cap(radius, offset, reach):
    """Bound on d(y, M) over Conv(sigma) when every vertex lies within
    ``offset`` of M: the hull of the projected vertices sits within
    ``reach (1 - sqrt(1 - r^2 / reach^2))`` of M (valid for r < reach)."""
    r = radius + offset
    cap = np.full(len(r), np.inf)
    ok = r < reach
    cap[ok] = offset[ok] + reach * (1 - np.sqrt(1 - (r[ok] / reach) ** 2))
    return cap


def _complex_to_manifold(x, complex_, model, tol):
    """Certified sup over the complex of the distance to the manifold.

    Branch and bound over simplices split along their longest edge.  Each
    cell is bounded by the 1-Lipschitz estimate ``d(c) + rad``, by the cap of
    its parent simplex (see :func:`_hull_cap`) and, when the model offers a
    signed distance s, by the C^{1,1} estimate
    ``max_v |s(c) + n . (v - c)| + rad^2 / (2 (reach - d_max))``.
    """
    vdist = model.distance(x)
    best = float(vdist.max())
    signed = model.signed_distance(x[:1]) is not None
    for k in range(complex_.d_cap, 0, -1):
        simp = complex_.simplices[k]
        if not len(simp):
            continue
        caps = _hull_cap(complex_.radii[k], vdist[simp].max(axis=1), model.reach)
        # largest simplices first so the floor rises early
        order = np.argsort(-caps, kind="stable")
        a_idx, b_idx = np.triu_indices(k + 1, 1)
        for lo in range(0, len(order), _CHUNK):
            sel = order[lo:lo + _CHUNK]
            sel = sel[caps[sel] > best + tol]
            # depth-first over batches of at most _CHUNK cells keeps memory bounded
            stack = [(x[simp[sel]], caps[sel])]
            while stack:
                cells, cap = stack.pop()
                if not len(cells):
                    continue
                if len(cells) > _CHUNK:
                    half = len(cells) // 2
                    stack.append((cells[half:], cap[half:]))
                    stack.append((cells[:half], cap[:half]))
                    continue
                cen = cells.mean(axis=1)
                rad = np.linalg.norm(cells - cen[:, None, :], axis=2).max(axis=1)
                if signed:
                    s, normal = model.signed_distance(cen)
                    dc = np.abs(s)
                else:
                    dc = model.distance(cen)
                best = max(best, float(dc.max()))
                ub = np.minimum(dc + rad, cap)
                if signed:
                    dmax = dc + rad
                    inside = dmax < model.reach
                    lin = np.abs(s[:, None] + np.einsum("nkj,nj->nk", cells - cen[:, None, :],
                                                        normal))
                    curv = np.where(inside,
                                    rad ** 2 / (2 * np.maximum(model.reach - dmax, 1e-300)),
                                    np.inf)
                    ub = np.minimum(ub, lin.max(axis=1) + curv)
                live = ub > best + tol
                cells, cap = cells[live], cap[live]
                if not len(cells):
                    continue
                lengths = np.linalg.norm(cells[:, a_idx] - cells[:, b_idx], axis=2)
                pick = np.argmax(lengths, axis=1)
                rows = np.arange(len(cells))
                ia, ib = a_idx[pick], b_idx[pick]
                mid = 0.5 * (cells[rows, ia] + cells[rows, ib])
                left, right = cells.copy(), cells.copy()
                left[rows, ib] = mid
                right[rows, ia] = mid
                stack.append((np.concatenate([left, right]), np.concatenate([cap, cap])))
    return best


_NEAREST_CELLS = 8


class _ComplexDistance:
    """Distance from query points to the union of a complex's hulls.

    Simplices are indexed by barycentre.  A hull point lies within
    ``spread`` (largest barycentre-to-vertex distance) of its simplex's
    barycentre, which bounds the search for exact distances.
    """

    def __init__(self, x, complex_):
        self.x = x
        self.tree = cKDTree(x)
        self.levels = []
        for k in range(1, complex_.d_cap + 1):
            simp = complex_.simplices[k]
            if not len(simp):
                continue
            verts = x[simp]
            bary = verts.mean(axis=1)
            spread = float(np.linalg.norm(verts - bary[:, None, :], axis=2).max())
            self.levels.append((simp, cKDTree(bary), spread))

    def _dist(self, q, simp, qi, si):
        if simp.shape[1] <= 3:
            return paired_simplex_dist(q, self.x, simp, qi.astype(np.int64), si.astype(np.int64))
        return np.array([dist_point_to_hull(q[a], self.x[simp[b]]) for a, b in zip(qi, si)])

    def upper(self, q):
        """Distance through the nearest vertex and the simplices with the
        nearest barycentres."""
        out = self.tree.query(q)[0]
        for simp, tree, _ in self.levels:
            k = min(_NEAREST_CELLS, len(simp))
            si = tree.query(q, k=k)[1].reshape(len(q), k)
            qi = np.repeat(np.arange(len(q)), k)
            d = self._dist(q, simp, qi, si.ravel()).reshape(len(q), k)
            out = np.minimum(out, d.min(axis=1))
        return out

    def exact(self, q, upper):
        """Exact distance, given an upper bound for each query."""
        out = upper.copy()
        for simp, tree, spread in self.levels:
            lists = tree.query_ball_point(q, upper + spread + 1e-12)
            qi = np.repeat(np.arange(len(q)), [len(hits) for hits in lists])
            if not len(qi):
                continue
            si = np.fromiter((v for hits in lists for v in hits), dtype=np.int64, count=len(qi))
            d = self._dist(q, simp, qi, si)
            np.minimum.at(out, qi, d)
        return out


def _manifold_to_complex(x, complex_, model, resolution, floor=0.0):
    """Largest distance from the reference net to the complex.

    Net points whose cheap upper bound cannot beat the running best by more
    than ``resolution`` are dropped; the rest get exact distances, worst
    bound first.  The result is within ``resolution`` of the net's exact
    maximum, hence within twice ``resolution`` of the true one-sided distance.

    With a positive ``floor`` only values above it are resolved; the result
    is then ``max(floor, distance)`` to the same accuracy.
    """
    dist = _ComplexDistance(x, complex_)
    best = float(floor)
    pending = []
    for chunk in model.net(resolution):
        ub = dist.upper(chunk)
        keep = ub > best + resolution
        if not keep.any():
            continue
        q, ub = chunk[keep], ub[keep]
        # settle the worst point of the chunk right away to raise the floor
        top = int(np.argmax(ub))
        best = max(best, float(dist.exact(q[top:top + 1], ub[top:top + 1])[0]))
        keep = ub > best + resolution
        pending.append((q[keep], ub[keep]))
    if not pending:
        return best
    q = np.vstack([p[0] for p in pending])
    ub = np.concatenate([p[1] for p in pending])
    order = np.argsort(-ub)
    q, ub = q[order], ub[order]
    step = 256
    for lo in range(0, len(q), step):
        if ub[lo] <= best + resolution:
            break
        sel = slice(lo, lo + step)
        live = ub[sel] > best + resolution
        if live.any():
            best = max(best, float(dist.exact(q[sel][live], ub[sel][live]).max()))
    return best


def reconstruction_risk(complex_, model, cloud, resolution=None, full_output=False):
    """Hausdorff distance between the union of the complex's hulls and the manifold.

    The complex side is certified to within ``resolution`` by branch and
    bound on the 1-Lipschitz distance to the manifold.  The manifold side goes
    through a reference net with covering radius ``resolution`` and drops net
    points that cannot raise the maximum by more than ``resolution``, so the
    returned value is within ``2 * resolution`` of the true distance.

    Returns
    -------
    risk : float
    parts : dict
        Only with ``full_output``: the two one-sided distances and the error bar.
    """
    if resolution is None:
        resolution = model.reach / 200.0
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    x = as_cloud(cloud)
    if len(x) != complex_.n_vertices:
        raise ValueError("cloud and complex have different vertex counts")
    forward = _complex_to_manifold(x, complex_, model, resolution)
    if full_output:
        backward = _manifold_to_complex(x, complex_, model, resolution)
    else:
        # only the larger side matters, so the forward value can prune the net
        backward = _manifold_to_complex(x, complex_, model, resolution, floor=forward)
    risk = max(forward, backward)
    if full_output:
        return risk, {"complex_to_manifold": forward, "manifold_to_complex": backward,
                      "error": 2 * resolution}
    return risk
