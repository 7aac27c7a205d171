"""Data-driven choice of the slope lambda and the scale t.

The curve g(lambda) = 1 / t_lambda grows roughly linearly while t_lambda sits
above the covering scale, then blows up once t_lambda drops below it.  The
first large increment of g marks that jump; the selected slope sits a fixed
fraction below it.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .defect import DefectProfile, GraphDefect, t_lambda, t_lambda_grid
from .geom import as_cloud

JUMP_FACTOR = 0.5
CHOICE_FACTOR = 0.8
FALLBACK_LAMBDA = 0.5


@dataclass(frozen=True)
class KStep:
    K: int
    ellK: float
    saturated: bool


@dataclass(frozen=True)
class SelectionResult:
    lambda_grid: np.ndarray
    g_values: np.ndarray
    jump_index: object  # int or None
    lambda_choice: float
    t_sel: float
    converged: bool
    K_trace: list = field(default_factory=list)
    profile: DefectProfile = None

    @property
    def K(self):
        return self.K_trace[-1].K

    def to_json(self):
        doc = {
            "lambda_grid": np.asarray(self.lambda_grid).tolist(),
            "g_values": np.asarray(self.g_values).tolist(),
            "jump_index": None if self.jump_index is None else int(self.jump_index),
            "lambda_choice": float(self.lambda_choice),
            "t_sel": float(self.t_sel),
            "converged": bool(self.converged),
            "K_trace": [{"K": int(s.K), "ellK": float(s.ellK), "saturated": bool(s.saturated)}
                        for s in self.K_trace],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text, profile=None):
        doc = json.loads(text)
        trace = [KStep(int(s["K"]), float(s["ellK"]), bool(s["saturated"]))
                 for s in doc["K_trace"]]
        return cls(np.array(doc["lambda_grid"], dtype=float),
                   np.array(doc["g_values"], dtype=float), doc["jump_index"],
                   float(doc["lambda_choice"]), float(doc["t_sel"]), bool(doc["converged"]),
                   trace, profile)


def lambda_grid(step=0.01):
    """Grid ``0, step, ..., 1`` (1 always included)."""
    if not 0 < step <= 1:
        raise ValueError("grid step must lie in (0, 1]")
    count = int(np.floor(1.0 / step + 1e-9))
    grid = np.arange(count + 1) * step
    if 1.0 - grid[-1] > 1e-9:
        grid = np.append(grid, 1.0)
    grid[-1] = 1.0
    return grid


def g_curve(profile, grid):
    """``1 / t_lambda`` over ``grid``, with ``t_0`` and saturated entries at the horizon."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if np.any(np.diff(grid) < 0) or grid[0] < 0 or grid[-1] > 1:
        raise ValueError("lambda grid must be ascending within [0, 1]")
    t, _ = t_lambda_grid(profile, grid)
    return 1.0 / t


def detect_jump(g_values, grid, jump_factor=JUMP_FACTOR):
    """Smallest index l with ``g[l+1] - g[l] > jump_factor * g[0]``, or None."""
    g = np.asarray(g_values, dtype=float)
    if len(g) != len(grid) or len(g) < 2:
        raise ValueError("g_values and grid must have equal length >= 2")
    hits = np.nonzero(np.diff(g) > jump_factor * g[0])[0]
    return int(hits[0]) if len(hits) else None


def select_scale(cloud, K0=16, grid_step=0.01, max_K=None, jump_factor=JUMP_FACTOR,
                 choice_factor=CHOICE_FACTOR, index=None):
    """Pick lambda and t from the graph defect profile, doubling K as needed.

    At each K the jump of the g-curve is located and ``t_sel`` is read off at
    ``choice_factor`` times the jump slope.  If no jump shows up, or ``t_sel``
    is the horizon itself, the horizon was too short and K is doubled (capped
    at ``max_K``, itself capped at ``n - 1``).

    Returns
    -------
    SelectionResult
        ``converged`` is False when K ran out first.  In that case ``t_sel``
        falls back to ``t_lambda`` at ``FALLBACK_LAMBDA`` if no jump was seen
        and to the horizon otherwise.
    """
    x = as_cloud(cloud)
    n = len(x)
    if n < 3:
        raise ValueError(f"scale selection needs at least 3 points, got {n}")
    cap = n - 1 if max_K is None else min(int(max_K), n - 1)
    if K0 < 1 or cap < 1:
        raise ValueError("K0 and max_K must be positive")
    grid = lambda_grid(grid_step)
    defect = GraphDefect(x, index)
    K = min(int(K0), cap)
    trace = []
    while True:
        profile = defect.profile(K)
        g = g_curve(profile, grid)
        jump = detect_jump(g, grid, jump_factor)
        if jump is None:
            lam, t_sel, saturated = FALLBACK_LAMBDA, None, True
        else:
            lam = choice_factor * float(grid[jump])
            if lam > 0:
                t_sel, saturated = t_lambda(profile, lam, full_output=True)
            else:
                t_sel, saturated = profile.horizon, True
        trace.append(KStep(K, profile.horizon, saturated))
        if not saturated or K >= cap:
            break
        K = min(2 * K, cap)
    if t_sel is None:
        t_sel = t_lambda(profile, lam)
    return SelectionResult(grid, g, jump, lam, float(t_sel), not saturated, trace, profile)
