"""Reference manifolds with exact oracles.

Each model samples points, projects onto itself, reports tangent spaces and
its reach, and produces reference nets with a guaranteed covering radius.
The nets back the ground-truth diagnostics :func:`epsilon_rate` and
:func:`tstar_estimate`.

Randomness comes from counter-based Philox streams keyed by
``(seed, purpose, block)``, so point ``i`` of a sample depends only on the
seed and on ``i``.
"""

import functools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial import cKDTree

from .config import TOL
from .geom import Subspace, as_cloud

BLOCK = 4096

_STREAM_POINTS = 1
_STREAM_NOISE = 2
_STREAM_FRAME = 3
_STREAM_SITES = 4


def rng_stream(seed, purpose, block=0):
    """Independent generator for ``(seed, purpose, block)``."""
    key = np.random.SeedSequence([int(seed), purpose, block])
    return np.random.Generator(np.random.Philox(key))


def unit_ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _uniform_ball(rng, n, dim):
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.uniform(size=(n, 1)) ** (1.0 / dim)


def _grid(lo, hi, step, periodic=False):
    """Points covering ``[lo, hi]`` with gaps at most ``step``."""
    count = max(1, int(math.ceil((hi - lo) / step)))
    if periodic:
        return lo + (hi - lo) * np.arange(count) / count
    return np.linspace(lo, hi, count + 1)


class ProjectionError(ValueError):
    """The point is too far from the manifold for a unique nearest point."""


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"  # none | tubular | ambient
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "tubular", "ambient"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.gamma >= 0:
            raise ValueError("noise amplitude must be nonnegative")

    @classmethod
    def parse(cls, text):
        """``none``, ``tubular:G`` or ``ambient:G``."""
        if text == "none":
            return cls()
        kind, _, gamma = text.partition(":")
        if not gamma:
            raise ValueError(f"noise {text!r} needs an amplitude, e.g. {kind}:0.1")
        return cls(kind, float(gamma))

    def to_dict(self):
        return {"kind": self.kind, "gamma": self.gamma}


@dataclass(frozen=True)
class Sample:
    points: np.ndarray
    clean: np.ndarray  # noiseless positions on the manifold


class ManifoldModel:
    """Base class; subclasses fill in the geometry."""

    family = None
    dim = None
    ambient_dim = None
    reach = None

    # -- geometry hooks -------------------------------------------------------
    def _sample_clean(self, rng, n):
        raise NotImplementedError

    def _project(self, p):
        """Nearest points for rows of ``p`` (no reach check)."""
        raise NotImplementedError

    def _tangents(self, y):
        """``(n, d, D)`` orthonormal tangent bases at on-manifold rows ``y``."""
        raise NotImplementedError

    def net(self, resolution, chunk=1 << 18):
        """Yield chunks of a net of the manifold with covering radius <= ``resolution``."""
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    def signed_distance(self, points):
        """Signed distance and unit outward normal at the projection, for closed
        hypersurfaces; None where unavailable.

        Inside the reach tube the signed distance is C^{1,1} with Hessian norm at
        most ``1 / (reach - |s|)``, which the risk evaluation uses for pruning.
        """
        return None

    def density_bounds(self):
        """``(f_min, f_max)`` of the sampling law w.r.t. the volume measure."""
        raise NotImplementedError

    # -- shared API ---------------------------------------------------------------
    def distance(self, points):
        """Distance from each row to the manifold."""
        p = as_cloud(points)
        return np.linalg.norm(p - self._project(p), axis=1)

    def project(self, points):
        """Nearest manifold point(s); refuses points at or beyond the reach."""
        p = np.asarray(points, dtype=float)
        single = p.ndim == 1
        p = as_cloud(p[None, :] if single else p)
        q = self._project(p)
        self._check_unique(p, q)
        return q[0] if single else q

    def _check_unique(self, p, q):
        """Refuse points whose nearest point may not be unique.

        The default only trusts the reach tube; models that know their
        medial axis exactly override this.
        """
        far = np.linalg.norm(p - q, axis=1) >= self.reach
        if np.any(far):
            raise ProjectionError(f"{int(far.sum())} point(s) lie at or beyond the reach "
                                  f"{self.reach:g}; nearest point may not be unique")

    def tangent_at(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.ambient_dim,):
            raise ValueError(f"expected a point in R^{self.ambient_dim}")
        q = self._project(p[None, :])
        if np.linalg.norm(q[0] - p) > TOL.on_manifold:
            raise ValueError("point is not on the manifold")
        return Subspace(self._tangents(q)[0], q[0])

    def sample(self, n, noise=None, seed=0):
        """Draw ``n`` points, optionally perturbed.

        Tubular noise moves each point uniformly inside the ball of radius
        gamma of its normal space; ambient noise uniformly inside the full
        D-ball.
        """
        if n < 1:
            raise ValueError("n must be positive")
        noise = noise or NoiseSpec()
        if noise.kind == "tubular" and noise.gamma >= self.reach:
            raise ValueError(f"tubular noise amplitude {noise.gamma} must stay below the reach "
                             f"{self.reach:g}")
        clean = self._clean_points(n, seed)
        if noise.kind == "none" or noise.gamma == 0:
            return Sample(clean, clean)
        shifts = []
        for b in range(0, -(-n // BLOCK)):
            lo, hi = b * BLOCK, min(n, (b + 1) * BLOCK)
            # draws always cover a full block so that row i depends on (seed, i) only
            y = np.vstack([clean[lo:hi], np.repeat(clean[lo:lo + 1], BLOCK - (hi - lo), axis=0)])
            shifts.append(self._noise(rng_stream(seed, _STREAM_NOISE, b), y, noise)[:hi - lo])
        return Sample(clean + np.vstack(shifts), clean)

    def _clean_points(self, n, seed):
        blocks = []
        for b in range(0, -(-n // BLOCK)):
            m = min(BLOCK, n - b * BLOCK)
            blocks.append(self._sample_clean(rng_stream(seed, _STREAM_POINTS, b), BLOCK)[:m])
        return np.vstack(blocks)

    def _noise(self, rng, y, noise):
        D = self.ambient_dim
        if noise.kind == "ambient":
            return noise.gamma * _uniform_ball(rng, len(y), D)
        k = D - self.dim
        if k == 0:
            raise ValueError("tubular noise needs a positive codimension")
        # isotropic Gaussian in the normal space, then a uniform radius
        t = self._tangents(y)
        g = rng.standard_normal((len(y), D))
        g -= np.einsum("nij,ni->nj", t, np.einsum("nij,nj->ni", t, g))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        radius = noise.gamma * rng.uniform(size=(len(y), 1)) ** (1.0 / k)
        return g * radius

    def to_config(self, n=None, noise=None, seed=0):
        noise = noise or NoiseSpec()
        return {"family": self.family, "params": self.params(), "noise": noise.to_dict(),
                "seed": int(seed), "n": n}


# -- circle -----------------------------------------------------------------------------

class Circle(ManifoldModel):
    """Circle of radius ``radius`` in a plane of R^D.

    For D > 2 the plane is spanned by the orthonormalised columns of a seeded
    Gaussian D x 2 matrix.  With ``stratified`` the angles of an n-point
    sample are equally spaced, with a seeded common phase.
    """

    family = "circle"
    dim = 1

    def __init__(self, radius=1.0, ambient_dim=2, frame_seed=0, stratified=False):
        if radius <= 0:
            raise ValueError("radius must be positive")
        if ambient_dim < 2:
            raise ValueError("a circle needs ambient dimension >= 2")
        self.radius = float(radius)
        self.ambient_dim = int(ambient_dim)
        self.frame_seed = int(frame_seed)
        self.stratified = bool(stratified)
        if ambient_dim == 2:
            self.frame = np.eye(2)
        else:
            g = rng_stream(frame_seed, _STREAM_FRAME).standard_normal((ambient_dim, 2))
            self.frame = np.linalg.qr(g)[0].T.copy()
        self.reach = self.radius

    def params(self):
        return {"radius": self.radius, "ambient_dim": self.ambient_dim,
                "frame_seed": self.frame_seed, "stratified": self.stratified}

    def embed(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1) @ self.frame

    def _sample_clean(self, rng, n):
        return self.embed(rng.uniform(0, 2 * np.pi, n))

    def _clean_points(self, n, seed):
        if not self.stratified:
            return super()._clean_points(n, seed)
        phase = rng_stream(seed, _STREAM_POINTS).uniform()
        return self.embed(2 * np.pi * (np.arange(n) + phase) / n)

    def _project(self, p):
        c = p @ self.frame.T
        rho = np.linalg.norm(c, axis=1, keepdims=True)
        if np.any(rho == 0):
            raise ProjectionError("the centre of the circle has no unique nearest point")
        return self.radius * (c / rho) @ self.frame

    def _check_unique(self, p, q):
        pass  # only the centre is ambiguous, and _project refuses it

    def distance(self, points):
        p = as_cloud(points)
        c = p @ self.frame.T
        perp = p - c @ self.frame
        rho = np.linalg.norm(c, axis=1)
        return np.sqrt((rho - self.radius) ** 2 + np.einsum("ij,ij->i", perp, perp))

    def signed_distance(self, points):
        if self.ambient_dim != 2:
            return None
        p = as_cloud(points)
        rho = np.linalg.norm(p, axis=1)
        if np.any(rho == 0):
            raise ProjectionError("the centre of the circle has no unique nearest point")
        return rho - self.radius, p / rho[:, None]

    def _tangents(self, y):
        c = y @ self.frame.T / self.radius
        return (np.stack([-c[:, 1], c[:, 0]], axis=1) @ self.frame)[:, None, :]

    def net(self, resolution, chunk=1 << 18):
        # chord between neighbours <= arc = 2 * resolution
        theta = _grid(0, 2 * np.pi, 2 * resolution / self.radius, periodic=True)
        for lo in range(0, len(theta), chunk):
            yield self.embed(theta[lo:lo + chunk])

    def density_bounds(self):
        f = 1.0 / (2 * np.pi * self.radius)
        return f, f


# -- torus ------------------------------------------------------------------------------

class Torus(ManifoldModel):
    """Torus of revolution in R^3 with tube radius ``r`` and centre-line radius ``R``.

    Samples are uniform for the surface measure: an angle around the tube is
    kept with probability (R + r cos theta) / (R + r).
    """

    family = "torus"
    dim = 2
    ambient_dim = 3

    def __init__(self, r=1.0, R=4.0):
        if not 0 < r < R:
            raise ValueError("need 0 < r < R")
        self.r, self.R = float(r), float(R)
        self.reach = min(self.r, self.R - self.r)

    def params(self):
        return {"r": self.r, "R": self.R}

    def embed(self, theta, phi):
        w = self.R + self.r * np.cos(theta)
        return np.stack([w * np.cos(phi), w * np.sin(phi), self.r * np.sin(theta)], axis=-1)

    def _sample_clean(self, rng, n):
        theta = np.empty(0)
        while len(theta) < n:
            a = rng.uniform(0, 2 * np.pi, 2 * n)
            keep = rng.uniform(size=2 * n) * (self.R + self.r) < self.R + self.r * np.cos(a)
            theta = np.concatenate([theta, a[keep]])
        theta = theta[:n]
        phi = rng.uniform(0, 2 * np.pi, n)
        return self.embed(theta, phi)

    def _angles(self, p):
        rho = np.hypot(p[:, 0], p[:, 1])
        if np.any(rho == 0):
            raise ProjectionError("points on the axis of the torus have no unique nearest point")
        dr, z = rho - self.R, p[:, 2]
        if np.any((dr == 0) & (z == 0)):
            raise ProjectionError("points on the centre circle have no unique nearest point")
        return np.arctan2(z, dr), np.arctan2(p[:, 1], p[:, 0])

    def _project(self, p):
        return self.embed(*self._angles(p))

    def _check_unique(self, p, q):
        pass  # only the axis and the centre circle are ambiguous; _project refuses them

    def distance(self, points):
        p = as_cloud(points)
        rho = np.hypot(p[:, 0], p[:, 1])
        return np.abs(np.hypot(rho - self.R, p[:, 2]) - self.r)

    def signed_distance(self, points):
        p = as_cloud(points)
        theta, phi = self._angles(p)
        rho = np.hypot(p[:, 0], p[:, 1])
        s = np.hypot(rho - self.R, p[:, 2]) - self.r
        normal = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi),
                           np.sin(theta)], axis=1)
        return s, normal

    def _tangents(self, y):
        theta, phi = self._angles(y)
        e_phi = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=1)
        e_theta = np.stack([-np.sin(theta) * np.cos(phi), -np.sin(theta) * np.sin(phi),
                            np.cos(theta)], axis=1)
        return np.stack([e_theta, e_phi], axis=1)

    def net(self, resolution, chunk=1 << 18):
        # ds^2 <= r^2 dtheta^2 + (R + r)^2 dphi^2: half the cell diagonal is <= resolution
        step = math.sqrt(2) * resolution
        theta = _grid(0, 2 * np.pi, step / self.r, periodic=True)
        phi = _grid(0, 2 * np.pi, step / (self.R + self.r), periodic=True)
        rows = max(1, chunk // len(phi))
        for lo in range(0, len(theta), rows):
            tt, pp = np.meshgrid(theta[lo:lo + rows], phi, indexing="ij")
            yield self.embed(tt.ravel(), pp.ravel())

    def density_bounds(self):
        f = 1.0 / (4 * np.pi ** 2 * self.r * self.R)
        return f, f


# -- swiss roll -----------------------------------------------------------------------

def _spiral(u):
    return np.stack([u * np.cos(u), u * np.sin(u)], axis=-1)


def _spiral_speed(u):
    return np.sqrt(1.0 + u * u)


def _spiral_arclength(u):
    return 0.5 * (u * np.sqrt(1 + u * u) + np.arcsinh(u))


@functools.lru_cache(maxsize=16)
def _spiral_reach(u_min, u_max, samples=3001):
    """Reach of the planar spiral arc, via inf |y-x|^2 / (2 d(y - x, T_x)).

    A grid search locates the minimising pair, which a local optimisation
    then refines.
    """
    u = np.linspace(u_min, u_max, samples)
    c = _spiral(u)
    t = np.stack([np.cos(u) - u * np.sin(u), np.sin(u) + u * np.cos(u)], axis=1)
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    nrm = np.stack([-t[:, 1], t[:, 0]], axis=1)

    def ratio(a, b):
        ca, cb = _spiral(a), _spiral(b)
        ta = np.array([np.cos(a) - a * np.sin(a), np.sin(a) + a * np.cos(a)])
        ta /= np.linalg.norm(ta)
        d = cb - ca
        den = abs(d[0] * ta[1] - d[1] * ta[0])
        return float(d @ d / (2 * den)) if den > 0 else np.inf

    best, arg = np.inf, None
    for i in range(samples):
        d = c - c[i]
        den = np.abs(d @ nrm[i])
        ok = den > 1e-12
        if not ok.any():
            continue
        v = np.einsum("ij,ij->i", d[ok], d[ok]) / (2 * den[ok])
        k = int(np.argmin(v))
        if v[k] < best:
            best, arg = float(v[k]), (u[i], u[ok][k])
    # the local curvature radius is the limit of the ratio as the pair merges
    curv = float(np.min(_spiral_speed(u) ** 3 / (u * u + 2)))
    res = minimize(lambda z: ratio(np.clip(z[0], u_min, u_max), np.clip(z[1], u_min, u_max)),
                   np.array(arg), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000})
    return min(best, float(res.fun), curv)


class SwissRoll(ManifoldModel):
    """Swiss roll ``(u cos u, y, u sin u)``, uniform in ``(u, y)``.

    The surface is flat (a rolled rectangle), so arc length in ``u`` and ``y``
    gives an isometric chart.  Its reach is set by the gap between consecutive
    turns of the spiral, about 3.11 for the default range, which is smaller
    than the least curvature radius (about 4.62 at the inner end).  Note that
    sampling is uniform in the parameters, not in surface area.
    """

    family = "swissroll"
    dim = 2
    ambient_dim = 3

    def __init__(self, u_min=1.5 * np.pi, u_max=4.5 * np.pi, height=21.0):
        if not 0 < u_min < u_max:
            raise ValueError("need 0 < u_min < u_max")
        if height <= 0:
            raise ValueError("height must be positive")
        self.u_min, self.u_max, self.height = float(u_min), float(u_max), float(height)
        self.reach = _spiral_reach(self.u_min, self.u_max)

    def params(self):
        return {"u_min": self.u_min, "u_max": self.u_max, "height": self.height}

    def embed(self, u, y):
        c = _spiral(np.asarray(u, dtype=float))
        return np.stack([c[..., 0], np.asarray(y, dtype=float) + 0 * c[..., 0], c[..., 1]], axis=-1)

    def _sample_clean(self, rng, n):
        u = rng.uniform(self.u_min, self.u_max, n)
        y = rng.uniform(0, self.height, n)
        return self.embed(u, y)

    def _spiral_param(self, q, return_ties=False):
        """Spiral parameter of the nearest point to each planar row of ``q``."""
        alpha = np.mod(np.arctan2(q[:, 1], q[:, 0]), 2 * np.pi)
        k_lo = math.floor((self.u_min - 2 * np.pi) / (2 * np.pi))
        k_hi = math.ceil(self.u_max / (2 * np.pi)) + 1
        cands = [np.full(len(q), self.u_min), np.full(len(q), self.u_max)]
        cands += [alpha + 2 * np.pi * k for k in range(k_lo, k_hi + 1)]
        u = np.clip(np.stack(cands, axis=1), self.u_min, self.u_max)
        qq = q[:, None, :]
        for _ in range(60):
            c = _spiral(u)
            dc = np.stack([np.cos(u) - u * np.sin(u), np.sin(u) + u * np.cos(u)], axis=-1)
            ddc = np.stack([-2 * np.sin(u) - u * np.cos(u), 2 * np.cos(u) - u * np.sin(u)], axis=-1)
            diff = c - qq
            grad = np.einsum("...k,...k->...", diff, dc)
            hess = np.einsum("...k,...k->...", dc, dc) + np.einsum("...k,...k->...", diff, ddc)
            hess = np.where(hess > 0, hess, np.einsum("...k,...k->...", dc, dc))
            step = grad / hess
            # keep each candidate within its own turn
            step = np.clip(step, -0.5, 0.5)
            new = np.clip(u - step, self.u_min, self.u_max)
            if np.max(np.abs(new - u)) < 1e-14 * self.u_max:
                u = new
                break
            u = new
        dist = np.linalg.norm(_spiral(u) - qq, axis=2)
        best = np.argmin(dist, axis=1)
        rows = np.arange(len(q))
        u_best = u[rows, best]
        if return_ties:
            # a second, distinct local minimiser at the same distance means the
            # nearest point is not unique
            other = np.where(np.abs(u - u_best[:, None]) > 1e-6, dist, np.inf).min(axis=1)
            ties = other - dist[rows, best] <= 1e-10 * (1 + dist[rows, best])
            return u_best, ties
        return u_best

    def _project(self, p):
        u = self._spiral_param(p[:, [0, 2]])
        y = np.clip(p[:, 1], 0, self.height)
        return self.embed(u, y)

    def _check_unique(self, p, q):
        _, ties = self._spiral_param(p[:, [0, 2]], return_ties=True)
        if np.any(ties):
            raise ProjectionError(f"{int(ties.sum())} point(s) are equidistant from two parts "
                                  "of the swiss roll")

    def _tangents(self, y):
        u = self._spiral_param(y[:, [0, 2]])
        du = np.stack([np.cos(u) - u * np.sin(u), np.zeros_like(u), np.sin(u) + u * np.cos(u)],
                      axis=1)
        du /= np.linalg.norm(du, axis=1, keepdims=True)
        dy = np.broadcast_to(np.array([0.0, 1.0, 0.0]), du.shape)
        return np.stack([du, dy], axis=1)

    def _u_from_arclength(self, s):
        # Newton on the monotone arclength map
        u = np.clip(np.sqrt(2 * s), self.u_min, self.u_max)
        for _ in range(50):
            f = _spiral_arclength(u) - s
            u_new = np.clip(u - f / _spiral_speed(u), self.u_min, self.u_max)
            if np.max(np.abs(u_new - u)) < 1e-13:
                return u_new
            u = u_new
        return u

    def net(self, resolution, chunk=1 << 18):
        step = math.sqrt(2) * resolution
        s0, s1 = _spiral_arclength(self.u_min), _spiral_arclength(self.u_max)
        u = self._u_from_arclength(_grid(s0, s1, step))
        u[0], u[-1] = self.u_min, self.u_max
        y = _grid(0, self.height, step)
        rows = max(1, chunk // len(y))
        for lo in range(0, len(u), rows):
            uu, yy = np.meshgrid(u[lo:lo + rows], y, indexing="ij")
            yield self.embed(uu.ravel(), yy.ravel())

    def density_bounds(self):
        base = 1.0 / ((self.u_max - self.u_min) * self.height)
        return base / _spiral_speed(self.u_max), base / _spiral_speed(self.u_min)


# -- bumped sphere ----------------------------------------------------------------------

def _psi(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def _dpsi(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos]) / u[pos] ** 2
    return out


def bump_profile(x):
    """Smooth plateau: 1 on [-1, 1], 0 outside [-2, 2], monotone in between.

    ``phi(x) = psi(2 - |x|) / (psi(2 - |x|) + psi(|x| - 1))`` with
    ``psi(u) = exp(-1/u)`` for ``u > 0`` and 0 otherwise.
    """
    a = np.abs(np.asarray(x, dtype=float))
    pa, pb = _psi(2 - a), _psi(a - 1)
    return pa / (pa + pb)


def bump_profile_slope(x):
    """Derivative of :func:`bump_profile` with respect to ``|x|``."""
    a = np.abs(np.asarray(x, dtype=float))
    pa, pb = _psi(2 - a), _psi(a - 1)
    da, db = _dpsi(2 - a), _dpsi(a - 1)
    return -(da * pb + pa * db) / (pa + pb) ** 2


@functools.lru_cache(maxsize=1)
def bump_constants():
    """Sup norms of the profile and the derived constants.

    Returns
    -------
    dict with ``sup_phi``, ``sup_dphi``, ``sup_d2phi`` and
    ``c1 = sup_phi + 3 sup_dphi`` (bound on ``||Id - dPhi||`` per unit
    height/width ratio, valid for width <= radius on the ball of radius 3R),
    ``c2 = 4 sup_dphi + 3 sup_d2phi`` (same for the second derivative).
    """
    grid = np.linspace(1.0, 2.0, 200_001)
    slope = np.abs(bump_profile_slope(grid))
    k = int(np.argmax(slope))
    res = minimize_scalar(lambda x: -abs(float(bump_profile_slope(x))),
                          bounds=(grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]),
                          method="bounded", options={"xatol": 1e-12})
    sup_dphi = max(float(slope[k]), -float(res.fun))
    h = grid[1] - grid[0]
    curv = np.abs(np.gradient(bump_profile_slope(grid), h))
    sup_d2phi = float(curv.max())
    sup_phi = 1.0
    return {"sup_phi": sup_phi, "sup_dphi": sup_dphi, "sup_d2phi": sup_d2phi,
            "c1": sup_phi + 3 * sup_dphi, "c2": 4 * sup_dphi + 3 * sup_d2phi}


def separated_sites(radius, width, dim=2, seed=0, candidates=20_000):
    """Greedy farthest-point selection of ``4 width``-separated sphere points.

    Candidates are seeded uniform points on the sphere of dimension ``dim``;
    the selection stops once the farthest remaining candidate is closer than
    ``4 width``.  An odd count is made even by dropping the last site.
    """
    rng = rng_stream(seed, _STREAM_SITES)
    cand = rng.standard_normal((candidates, dim + 1))
    cand *= radius / np.linalg.norm(cand, axis=1, keepdims=True)
    chosen = [0]
    gap = np.linalg.norm(cand - cand[0], axis=1)
    while True:
        k = int(np.argmax(gap))
        if gap[k] < 4 * width:
            break
        chosen.append(k)
        gap = np.minimum(gap, np.linalg.norm(cand - cand[k], axis=1))
    if len(chosen) % 2:
        chosen.pop()
    return cand[chosen]


def _sphere_tangent_frames(u):
    """``(n, D, d)`` orthonormal tangent frames of the unit sphere at rows ``u``."""
    n, D = u.shape
    if D == 2:
        return np.stack([-u[:, 1], u[:, 0]], axis=1)[:, :, None]
    # Gram-Schmidt of the coordinate axis least aligned with u, then a cross product
    axis = np.zeros((n, 3))
    axis[np.arange(n), np.argmin(np.abs(u), axis=1)] = 1.0
    e1 = axis - np.einsum("ij,ij->i", axis, u)[:, None] * u
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(u, e1)
    return np.stack([e1, e2], axis=2)


class BumpedSphere(ManifoldModel):
    """Sphere of radius R with smooth radial bumps of height +-``height``.

    The surface is the image of the sphere under
    ``Phi(x) = x (1 + (height / R) sum_y s(y) phi(|x - y| / width))``
    where the sites y are ``4 width``-separated and ``s(y) = +-1``.
    Samples are pushed forward from the uniform law on the sphere, so they are
    not area-uniform on the bumped surface.  ``reach`` is a guaranteed lower
    bound, not the exact reach.
    """

    family = "bumped_sphere"

    def __init__(self, radius=1.0, width=0.2, height=0.01, dim=2, seed=0, sites=None,
                 signs=None):
        if dim not in (1, 2):
            raise ValueError("bumped spheres are available for dim 1 and 2")
        if not 0 < width <= radius:
            raise ValueError("need 0 < width <= radius")
        if height < 0:
            raise ValueError("height must be nonnegative")
        self.radius, self.width, self.height = float(radius), float(width), float(height)
        self.dim, self.ambient_dim, self.seed = int(dim), int(dim) + 1, int(seed)
        consts = bump_constants()
        ratio = self.height / self.width
        if consts["c1"] * ratio >= 1:
            raise ValueError(f"height/width = {ratio:g} too large; the bump map is only "
                             f"guaranteed injective below {1 / consts['c1']:g}")
        if sites is None:
            sites = separated_sites(self.radius, self.width, self.dim, self.seed)
        self.sites = np.asarray(sites, dtype=float).reshape(-1, self.ambient_dim)
        if len(self.sites) > 1:
            gaps = cKDTree(self.sites).query(self.sites, k=2)[0][:, 1]
            if gaps.min() < 4 * self.width * (1 - 1e-12):
                raise ValueError("bump sites must be 4*width-separated")
        if signs is None:
            signs = np.where(rng_stream(self.seed, _STREAM_SITES, 1).uniform(size=len(self.sites))
                             < 0.5, -1.0, 1.0)
        self.signs = np.asarray(signs, dtype=float)
        if self.signs.shape != (len(self.sites),) or not np.all(np.abs(self.signs) == 1):
            raise ValueError("signs must be +-1, one per site")
        self._site_tree = cKDTree(self.sites) if len(self.sites) else None
        c1, c2 = consts["c1"] * ratio, consts["c2"] * self.height / self.width ** 2
        self.reach = self.radius * min(1 - c1, (1 - c1) ** 2 / (1 + c1 + self.radius * c2))

    def params(self):
        return {"radius": self.radius, "width": self.width, "height": self.height,
                "dim": self.dim, "seed": self.seed, "sites": self.sites.tolist(),
                "signs": self.signs.tolist()}

    def _nearest_site(self, x):
        if self._site_tree is None:
            return np.full(len(x), -1), np.full(len(x), np.inf)
        dist, idx = self._site_tree.query(x)
        idx = np.where(dist < 2 * self.width, idx, -1)
        return idx, dist

    def bump_map(self, x):
        """The ambient map Phi applied to rows of ``x``; only the nearest site
        can contribute since the bumps have disjoint supports."""
        x = as_cloud(x)
        idx, dist = self._nearest_site(x)
        s = np.where(idx >= 0, self.signs[np.maximum(idx, 0)], 0.0)
        scale = 1 + (self.height / self.radius) * s * bump_profile(dist / self.width)
        return x * scale[:, None]

    def _radial(self, u):
        """Surface radius along unit directions ``u`` and its gradient in u."""
        x = self.radius * u
        idx, dist = self._nearest_site(x)
        active = idx >= 0
        s = np.where(active, self.signs[np.maximum(idx, 0)], 0.0)
        rho = self.radius + self.height * s * bump_profile(dist / self.width)
        grad = np.zeros_like(u)
        if np.any(active):
            diff = x[active] - self.sites[idx[active]]
            r = np.maximum(dist[active], 1e-300)[:, None]
            slope = bump_profile_slope(dist[active] / self.width)[:, None]
            grad[active] = (self.height * s[active, None] * slope / self.width
                            * self.radius * diff / r)
        return rho, grad

    def embed(self, u):
        u = np.asarray(u, dtype=float)
        return self._radial(u)[0][:, None] * u

    def _sample_clean(self, rng, n):
        g = rng.standard_normal((n, self.ambient_dim))
        return self.embed(g / np.linalg.norm(g, axis=1, keepdims=True))

    def _jacobian(self, u):
        """Columns span the tangent space of the surface at ``embed(u)``."""
        rho, grad = self._radial(u)
        frames = _sphere_tangent_frames(u)
        # d(rho u) = u (grad . e) + rho e along each sphere tangent e
        return (u[:, :, None] * np.einsum("nk,nkj->nj", grad, frames)[:, None, :]
                + rho[:, None, None] * frames), frames

    def _direction(self, p):
        """Unit direction whose surface point is nearest to ``p`` (Gauss-Newton)."""
        norm = np.linalg.norm(p, axis=1, keepdims=True)
        if np.any(norm == 0):
            raise ProjectionError("the centre of the sphere has no unique nearest point")
        u = p / norm
        for _ in range(100):
            q = self.embed(u)
            jac, frames = self._jacobian(u)
            jtj = np.einsum("nki,nkj->nij", jac, jac)
            jtr = np.einsum("nki,nk->ni", jac, p - q)
            a = np.linalg.solve(jtj, jtr[:, :, None])[:, :, 0]
            u = u + np.einsum("nkj,nj->nk", frames, a)
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            if np.max(np.abs(a)) < 1e-14:
                break
        return u

    def _project(self, p):
        return self.embed(self._direction(p))

    def signed_distance(self, points):
        p = as_cloud(points)
        u = self._direction(p)
        q = self.embed(u)
        jac, _ = self._jacobian(u)
        # the normal is the left null vector of the Jacobian
        full = np.linalg.svd(jac, full_matrices=True)[0]
        normal = full[:, :, -1]
        normal *= np.sign(np.einsum("ij,ij->i", normal, u))[:, None]
        return np.einsum("ij,ij->i", p - q, normal), normal

    def _tangents(self, y):
        jac, _ = self._jacobian(self._direction(y))
        q, _ = np.linalg.qr(jac)
        return np.transpose(q, (0, 2, 1))

    def net(self, resolution, chunk=1 << 18):
        # Phi stretches lengths by at most 1 + c1 height/width
        lip = 1 + bump_constants()["c1"] * self.height / self.width
        res = resolution / lip
        if self.dim == 1:
            theta = _grid(0, 2 * np.pi, 2 * res / self.radius, periodic=True)
            for lo in range(0, len(theta), chunk):
                t = theta[lo:lo + chunk]
                yield self.embed(np.stack([np.cos(t), np.sin(t)], axis=1))
            return
        step = math.sqrt(2) * res / self.radius
        theta = _grid(0, np.pi, step)
        phi = _grid(0, 2 * np.pi, step, periodic=True)
        rows = max(1, chunk // len(phi))
        for lo in range(0, len(theta), rows):
            tt, pp = np.meshgrid(theta[lo:lo + rows], phi, indexing="ij")
            tt, pp = tt.ravel(), pp.ravel()
            u = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=1)
            yield self.embed(u)

    def density_bounds(self):
        base = 1.0 / (unit_ball_volume(self.dim + 1) * (self.dim + 1) * self.radius ** self.dim)
        stretch = 1 + bump_constants()["c1"] * self.height / self.width
        return base / stretch ** self.dim, base * stretch ** self.dim


FAMILIES = {
    "circle": Circle,
    "torus": Torus,
    "swissroll": SwissRoll,
    "bumped_sphere": BumpedSphere,
}


def make_model(family, **params):
    family = family.replace("-", "_")
    if family not in FAMILIES:
        raise ValueError(f"unknown manifold family {family!r}; choose from {sorted(FAMILIES)}")
    return FAMILIES[family](**params)


def load_config(doc):
    """Parse a model config (dict or JSON text).

    Returns
    -------
    model, noise, seed, n
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    model = make_model(doc["family"], **doc.get("params", {}))
    noise_doc = doc.get("noise") or {"kind": "none", "gamma": 0.0}
    noise = NoiseSpec(noise_doc.get("kind", "none"), float(noise_doc.get("gamma", 0.0)))
    return model, noise, int(doc.get("seed", 0)), doc.get("n")


# -- ground-truth diagnostics ------------------------------------------------------------

def _default_resolution(model, resolution):
    if resolution is None:
        return model.reach / 200.0
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    return float(resolution)


def epsilon_rate(model, cloud, resolution=None, full_output=False):
    """Hausdorff distance between the cloud and the manifold.

    The cloud-to-manifold half is exact.  The manifold-to-cloud half is the
    largest distance from a reference net point to the cloud, which is within
    ``resolution`` of the truth because distance functions are 1-Lipschitz.

    Returns
    -------
    eps : float
    error : float
        Only with ``full_output``; the certified error bar.
    """
    res = _default_resolution(model, resolution)
    x = as_cloud(cloud)
    tree = cKDTree(x)
    far = 0.0
    for chunk in model.net(res):
        far = max(far, float(tree.query(chunk)[0].max()))
    off = float(model.distance(x).max())
    eps = max(far, off)
    return (eps, res) if full_output else eps


@functools.lru_cache(maxsize=256)
def _barycentric_grid_int(m, k):
    if k == 1:
        return np.array([[m]])
    rows = [np.column_stack([np.full(len(r), first), r])
            for first in range(m + 1) for r in [_barycentric_grid_int(m - first, k - 1)]]
    return np.vstack(rows)


def hull_samples(vertices, pitch):
    """Points of Conv(vertices) such that every hull point is within ``pitch``
    of one of them (barycentric grid)."""
    v = np.asarray(vertices, dtype=float)
    if len(v) == 1:
        return v.copy()
    diam = max(float(np.max(np.linalg.norm(v[:, None] - v[None], axis=2))), 0.0)
    m = max(1, int(math.ceil(diam / pitch)))
    w = _barycentric_grid_int(m, len(v)) / m
    return w @ v


def covers(model, cloud, t, resolution=None, complex_=None):
    """Does the projection of Conv_d(t, cloud) reach every net point?

    Every simplex with at most d + 1 vertices and radius <= t is sampled with
    a barycentric pitch of ``resolution / 2``; the samples are projected and
    each net point must lie within ``resolution`` of a projected sample.
    """
    from .estimate import reconstruct  # local import: estimate depends on this module

    res = _default_resolution(model, resolution)
    x = as_cloud(cloud)
    cx = complex_ if complex_ is not None else reconstruct(x, t, model.dim)
    pieces = [x]
    for k in range(1, model.dim + 1):
        for simplex in cx.simplices[k]:
            pieces.append(hull_samples(x[list(simplex)], res / 2))
    pts = np.vstack(pieces)
    proj = model._project(pts)
    tree = cKDTree(proj)
    for chunk in model.net(res):
        if tree.query(chunk, distance_upper_bound=res * (1 + 1e-12))[0].max() > res:
            return False
    return True


def tstar_estimate(model, cloud, resolution=None, rel_tol=TOL.tstar_rel, start=None):
    """Smallest t (below the reach) at which Conv_d(t, cloud) projects onto M.

    The scale is doubled from ``start`` until coverage holds, then bisected to
    relative tolerance ``rel_tol``.  Returns None when coverage does not hold
    below the reach.  Only meaningful for noiseless clouds, which is checked.
    """
    res = _default_resolution(model, resolution)
    x = as_cloud(cloud)
    if float(model.distance(x).max()) > TOL.on_manifold:
        raise ValueError("t* is defined for clouds lying on the manifold; this one is noisy")
    cap = model.reach * (1 - 1e-9)
    if start is None:
        start = 0.5 * float(cKDTree(x).query(x, k=2)[0][:, 1].max()) if len(x) > 1 else cap
    lo, hi = 0.0, min(max(start, 1e-12), cap)
    while not covers(model, x, hi, res):
        if hi >= cap:
            return None
        lo, hi = hi, min(2 * hi, cap)
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if covers(model, x, mid, res):
            hi = mid
        else:
            lo = mid
    return hi
