"""Numerical tolerances shared by every module."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # smallest enclosing ball: containment slack is meb_rel * (1 + radius)
    meb_rel: float = 1e-9
    # nearest point in a hull with more than two vertices
    hull_step: float = 1e-10
    hull_max_iter: int = 10_000
    # full (subset-enumeration) defect profile, absolute accuracy of each sup
    full_defect_abs: float = 1e-4
    full_defect_max_n: int = 15
    # projection onto reference manifolds
    project_tol: float = 1e-10
    # how far off a manifold a point may be before tangent_at refuses it
    on_manifold: float = 1e-8
    # bisection on t* (relative)
    tstar_rel: float = 1e-3


TOL = Tolerances()
