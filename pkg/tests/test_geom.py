import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tconvex.geom import (Ball, Subspace, dist_point_to_hull, hausdorff, meb_radius,
                          min_enclosing_ball, subspace_angle)

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def clouds(max_n=6, max_dim=3):
    return st.integers(1, max_dim).flatmap(
        lambda d: arrays(np.float64, st.tuples(st.integers(1, max_n), st.just(d)),
                         elements=coords))


def _brute_meb_radius(pts):
    """Least circumradius over support subsets whose ball holds every point."""
    best = np.inf
    dim = pts.shape[1]
    for k in range(1, min(len(pts), dim + 1) + 1):
        for sub in itertools.combinations(range(len(pts)), k):
            s = pts[list(sub)]
            if k == 1:
                c, r = s[0], 0.0
            else:
                u = s[1:] - s[0]
                gram = u @ u.T
                if abs(np.linalg.det(gram)) < 1e-12 * (1 + np.abs(gram).max()) ** (k - 1):
                    continue
                c = s[0] + np.linalg.solve(gram, 0.5 * np.einsum("ij,ij->i", u, u)) @ u
                r = np.linalg.norm(s[0] - c)
            if np.all(np.linalg.norm(pts - c, axis=1) <= r * (1 + 1e-9) + 1e-9):
                best = min(best, r)
    return best


# -- smallest enclosing ball ---------------------------------------------------------

def test_meb_singleton():
    ball = min_enclosing_ball([(0.0, 0.0)])
    assert ball.radius == 0.0
    np.testing.assert_array_equal(ball.center, [0, 0])


def test_meb_pair():
    ball = min_enclosing_ball([(0.0, 0.0), (2.0, 0.0)])
    assert ball.radius == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(ball.center, [1, 0], atol=1e-12)


def test_meb_equilateral_triangle_against_grid_search():
    tri = np.array([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
    r = meb_radius(tri)
    assert r == pytest.approx(1 / np.sqrt(3), abs=1e-9)
    # independent check: no grid centre does better than the circumradius
    g = np.linspace(-0.2, 1.2, 281)
    cx, cy = np.meshgrid(g, g)
    centres = np.c_[cx.ravel(), cy.ravel()]
    worst = np.max(np.linalg.norm(centres[:, None, :] - tri[None], axis=2), axis=1)
    assert worst.min() >= r - 1e-9
    assert worst.min() <= r + 0.01


def test_meb_errors():
    with pytest.raises(ValueError):
        min_enclosing_ball([])
    with pytest.raises(ValueError):
        min_enclosing_ball([(0.0, 0.0), (1.0, 0.0, 0.0)])


def test_meb_is_deterministic(rng):
    pts = rng.random((8, 3))
    a, b = min_enclosing_ball(pts), min_enclosing_ball(pts.copy())
    assert a.radius == b.radius
    np.testing.assert_array_equal(a.center, b.center)


@given(clouds())
def test_meb_contains_and_is_minimal(pts):
    ball = min_enclosing_ball(pts)
    for p in pts:
        assert ball.contains(p)
    assert ball.radius <= _brute_meb_radius(pts) * (1 + 1e-9) + 1e-9


@given(clouds(max_n=6), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_meb_radius_stability(pts, gamma, seed):
    g = np.random.default_rng(seed)
    shift = g.standard_normal(pts.shape)
    shift *= gamma * g.random((len(pts), 1)) / np.maximum(
        np.linalg.norm(shift, axis=1, keepdims=True), 1e-300)
    assert meb_radius(pts + shift) <= meb_radius(pts) + gamma + 1e-8 * (1 + meb_radius(pts))


@given(clouds(max_n=6, max_dim=4), st.integers(0, 2**32 - 1))
def test_hull_points_lie_within_radius_of_vertices(pts, seed):
    weights = np.random.default_rng(seed).dirichlet(np.ones(len(pts)), size=20)
    hull_pts = weights @ pts
    d = np.min(np.linalg.norm(hull_pts[:, None] - pts[None], axis=2), axis=1)
    assert np.all(d <= meb_radius(pts) + 1e-8)


def test_ball_contains():
    b = Ball(np.zeros(2), 1.0)
    assert b.contains([1.0, 0.0])
    assert not b.contains([1.1, 0.0])


# -- distance to a hull -----------------------------------------------------------------

def test_hull_distance_segment_examples():
    assert dist_point_to_hull((0.0, 1.0), [(-1.0, 0.0), (1.0, 0.0)]) == pytest.approx(1.0)
    assert dist_point_to_hull((3.0, 0.0), [(0.0, 0.0), (1.0, 0.0)]) == pytest.approx(2.0)


def test_hull_distance_to_containing_triangle():
    tri = [(-1.0, -1.0, 0.0), (1.0, -1.0, 0.0), (0.0, 1.0, 0.0)]
    assert dist_point_to_hull((0.0, 0.0, 1.0), tri) == pytest.approx(1.0, abs=1e-8)


def test_hull_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        dist_point_to_hull((0.0, 0.0), [(0.0, 0.0, 0.0)])


@given(arrays(np.float64, (4, 3), elements=st.floats(-3, 3)),
       arrays(np.float64, 3, elements=st.floats(-5, 5)))
def test_hull_distance_matches_barycentric_grid(simplex, p):
    d = dist_point_to_hull(p, simplex)
    # a barycentric grid gives an upper bound that converges from above
    k = 24
    w = np.array([(a, b, c, k - a - b - c) for a in range(k + 1) for b in range(k + 1 - a)
                  for c in range(k + 1 - a - b)], dtype=float) / k
    grid = np.min(np.linalg.norm(w @ simplex - p, axis=1))
    diam = max(np.linalg.norm(a - b) for a in simplex for b in simplex)
    assert d <= grid + 1e-8
    assert grid <= d + diam / k + 1e-8


def test_hull_distance_coincident_tiny_vertices():
    # a Gram matrix that underflows to zero must not break the solver
    simplex = np.full((4, 3), 1.5e-246)
    assert dist_point_to_hull([1.0, 1.0, 1.0], simplex) == pytest.approx(np.sqrt(3.0))


def test_hull_distance_zero_at_vertex_of_thin_simplex():
    simplex = np.array([[1.0, 0, 0], [5.96046448e-08, 0, 0], [0, 0, 0], [0, 0, 0]])
    assert dist_point_to_hull([0.0, 0.0, 0.0], simplex) == 0.0


# -- Hausdorff -----------------------------------------------------------------------------

def test_hausdorff_examples():
    a = np.array([[0.0], [10.0]])
    b = np.array([[0.0]])
    assert hausdorff(a, a) == 0.0
    assert hausdorff([[0.0]], [[1.0]]) == 1.0
    assert hausdorff([[0.0]], [[1.0]], mode="asymmetric") == 1.0
    assert hausdorff(a, b, mode="asymmetric") == 10.0
    assert hausdorff(b, a, mode="asymmetric") == 0.0


def test_hausdorff_errors():
    with pytest.raises(ValueError):
        hausdorff(np.empty((0, 2)), [[0.0, 0.0]])
    with pytest.raises(ValueError):
        hausdorff([[0.0]], [[0.0]], mode="other")


@given(clouds(max_n=8, max_dim=2), st.integers(0, 2**32 - 1))
def test_hausdorff_is_a_metric(a, seed):
    g = np.random.default_rng(seed)
    b = a[: max(1, len(a) // 2)] + g.standard_normal((max(1, len(a) // 2), a.shape[1]))
    c = g.standard_normal((3, a.shape[1]))
    assert hausdorff(a, b) == hausdorff(b, a)
    assert hausdorff(a, c) <= hausdorff(a, b) + hausdorff(b, c) + 1e-12


# -- subspaces --------------------------------------------------------------------------------

def _line(theta):
    return Subspace(np.array([[np.cos(theta), np.sin(theta)]]), np.zeros(2))


def test_subspace_angle_examples():
    u = _line(0.3)
    assert subspace_angle(u, u) == pytest.approx(0.0, abs=1e-15)
    assert subspace_angle(_line(0.0), _line(np.pi / 2)) == pytest.approx(1.0)
    assert subspace_angle(_line(0.0), _line(np.pi / 6)) == pytest.approx(0.5)


def test_subspace_angle_errors():
    plane = Subspace(np.eye(3)[:2], np.zeros(3))
    with pytest.raises(ValueError):
        subspace_angle(plane, Subspace(np.eye(3)[:1], np.zeros(3)))
    with pytest.raises(ValueError):
        subspace_angle(_line(0.0), Subspace(np.eye(3)[:1], np.zeros(3)))


def test_subspace_rejects_non_orthonormal_basis():
    with pytest.raises(ValueError):
        Subspace(np.array([[1.0, 0.0], [1.0, 1.0]]), np.zeros(2))


@given(st.integers(0, 2**32 - 1))
def test_subspace_angle_symmetric_and_basis_free(seed):
    g = np.random.default_rng(seed)
    u = Subspace.from_vectors(g.standard_normal((2, 4)))
    v = Subspace.from_vectors(g.standard_normal((2, 4)))
    rot = np.linalg.qr(g.standard_normal((2, 2)))[0]
    u2 = Subspace(rot @ u.basis, u.origin)
    assert subspace_angle(u, v) == pytest.approx(subspace_angle(v, u), abs=1e-12)
    assert subspace_angle(u2, v) == pytest.approx(subspace_angle(u, v), abs=1e-12)
    assert 0.0 <= subspace_angle(u, v) <= 1.0
