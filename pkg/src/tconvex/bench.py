"""Seeded experiment matrices: scale selection on reference manifolds and
the risk-versus-n rate study.

Each experiment lists one or more sample classes, a grid of sample sizes and
a number of trials.  Trial ``k`` of every cell uses seed ``base_seed + k``.
A row is produced per trial; :func:`summarize` aggregates them per
``(family, n)`` and, for rate experiments, fits the log-log slope.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .estimate import ComplexTooLarge, oracle_scale, reconstruct, reconstruction_risk
from .manifolds import NoiseSpec, epsilon_rate, make_model
from .select import select_scale

COLUMNS = ("experiment", "family", "n", "seed", "K_max", "lambda_choice", "t_sel", "t",
           "epsilon", "risk", "runtime", "converged", "note")


@dataclass(frozen=True)
class SampleClass:
    family: str
    params: dict = field(default_factory=dict)
    # "none", "tubular:G", "ambient:G", or "<kind>:rate" for G = (ln n / n)^(2/d)
    noise: str = "none"

    def model(self):
        return make_model(self.family, **self.params)

    def noise_for(self, n, d):
        kind, _, amount = self.noise.partition(":")
        if amount == "rate":
            return NoiseSpec(kind, (math.log(n) / n) ** (2.0 / d))
        return NoiseSpec.parse(self.noise)


@dataclass(frozen=True)
class Experiment:
    name: str
    classes: tuple
    n_grid: tuple
    trials: int = 10
    scale: str = "selected"  # or "oracle"
    risk: bool = False
    epsilon: bool = True
    resolution: float = None  # absolute; default reach / 200
    # when set, the risk resolution also shrinks to this fraction of t^2 / reach,
    # so that it stays well below the risk itself as n grows
    risk_resolution_factor: float = None
    max_simplices: int = 20_000_000

    def to_dict(self):
        return {"name": self.name,
                "classes": [{"family": c.family, "params": c.params, "noise": c.noise}
                            for c in self.classes],
                "n_grid": list(self.n_grid), "trials": self.trials, "scale": self.scale,
                "risk": self.risk, "epsilon": self.epsilon, "resolution": self.resolution,
                "risk_resolution_factor": self.risk_resolution_factor,
                "max_simplices": self.max_simplices}


EXPERIMENTS = {
    "noisy-circle": Experiment("noisy-circle", (SampleClass("circle", {}, "tubular:0.1"),),
                               (100,), trials=10, risk=True),
    "growth-in-n": Experiment("growth-in-n", (
        SampleClass("circle", {"ambient_dim": 100}, "ambient:rate"),
        SampleClass("torus"),
        SampleClass("swissroll"),
    ), (100, 300, 1000, 3000, 10000), trials=10),
    "torus-swissroll": Experiment("torus-swissroll",
                                  (SampleClass("torus"), SampleClass("swissroll")),
                                  (10000,), trials=1),
    "rate-circle": Experiment("rate-circle", (SampleClass("circle"),),
                              (500, 1000, 2000, 4000, 8000), trials=10, scale="oracle",
                              risk=True, epsilon=False, risk_resolution_factor=0.05),
    "rate-torus": Experiment("rate-torus", (SampleClass("torus"),),
                             (500, 1000, 2000, 4000, 8000), trials=10, scale="oracle",
                             risk=True, epsilon=False, risk_resolution_factor=0.05),
}


def get_experiment(name, **overrides):
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if "n_grid" in overrides:
        overrides["n_grid"] = tuple(int(n) for n in overrides["n_grid"])
    return replace(EXPERIMENTS[name], **overrides)


def run_trial(experiment, sample_class, n, seed):
    """One row of the experiment table."""
    model = sample_class.model()
    noise = sample_class.noise_for(n, model.dim)
    cloud = model.sample(n, noise, seed).points
    row = dict.fromkeys(COLUMNS, float("nan"))
    row.update(experiment=experiment.name, family=model.family, n=n, seed=seed, note="")
    start = time.perf_counter()
    selection = select_scale(cloud) if experiment.scale == "selected" else None
    if selection is not None:
        row.update(K_max=selection.K, lambda_choice=selection.lambda_choice,
                   t_sel=selection.t_sel, t=selection.t_sel, converged=selection.converged)
    else:
        f_min = model.density_bounds()[0]
        row.update(t=oracle_scale(n, model.dim, f_min), converged=True)
    complex_ = None
    if experiment.risk:
        try:
            complex_ = reconstruct(cloud, row["t"], model.dim,
                                   max_simplices=experiment.max_simplices)
        except ComplexTooLarge as err:
            row["note"] = str(err)
    row["runtime"] = time.perf_counter() - start
    res = experiment.resolution
    if experiment.epsilon:
        row["epsilon"] = epsilon_rate(model, cloud, res)
    if complex_ is not None:
        row["risk"] = reconstruction_risk(complex_, model, cloud,
                                          _risk_resolution(experiment, model, row["t"]))
    return row


def _risk_resolution(experiment, model, t):
    res = experiment.resolution if experiment.resolution is not None else model.reach / 200
    if experiment.risk_resolution_factor is not None and t > 0:
        res = min(res, experiment.risk_resolution_factor * t * t / model.reach)
    return res


def run_experiment(experiment, base_seed=0, progress=None):
    rows = []
    for sample_class in experiment.classes:
        for n in experiment.n_grid:
            for k in range(experiment.trials):
                row = run_trial(experiment, sample_class, int(n), base_seed + k)
                rows.append(row)
                if progress is not None:
                    progress(row)
    return rows


def rate_slope(ns, risks):
    """Least-squares slope of log(risk) against log(ln n / n)."""
    ns = np.asarray(ns, dtype=float)
    risks = np.asarray(risks, dtype=float)
    ok = np.isfinite(risks) & (risks > 0)
    if ok.sum() < 2:
        return float("nan")
    u = np.log(np.log(ns[ok]) / ns[ok])
    return float(np.polyfit(u, np.log(risks[ok]), 1)[0])


def _mean(values):
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    return float(values.mean()) if len(values) else None


def summarize(rows):
    """Per ``(family, n)`` means plus, per family, the rate slope of the mean risk."""
    cells = {}
    for row in rows:
        cells.setdefault((row["family"], row["n"]), []).append(row)
    summary = {"cells": [], "slopes": {}}
    for (family, n), group in cells.items():
        def col(key):
            return [r[key] for r in group]

        K = np.array(col("K_max"), dtype=float)
        eps = np.array(col("epsilon"), dtype=float)
        t_sel = np.array(col("t_sel"), dtype=float)
        both = np.isfinite(eps) & np.isfinite(t_sel)
        summary["cells"].append({
            "family": family, "n": n, "trials": len(group),
            "mean_epsilon": _mean(eps), "mean_lambda_choice": _mean(col("lambda_choice")),
            "mean_t_sel": _mean(t_sel), "mean_t": _mean(col("t")),
            "mean_risk": _mean(col("risk")), "mean_runtime": _mean(col("runtime")),
            "mean_log2_K_max": _mean(np.log2(K)) if np.isfinite(K).any() else None,
            "max_K_max": int(np.nanmax(K)) if np.isfinite(K).any() else None,
            "frac_t_sel_ge_epsilon": float(np.mean(t_sel[both] >= eps[both])) if both.any()
            else None,
            "risk_failures": sum(1 for r in group if r["note"]),
        })
    for family in dict.fromkeys(c["family"] for c in summary["cells"]):
        mine = [c for c in summary["cells"] if c["family"] == family]
        risks = [c["mean_risk"] if c["mean_risk"] is not None and c["risk_failures"] == 0
                 else float("nan") for c in mine]
        if any(np.isfinite(risks)):
            summary["slopes"][family] = rate_slope([c["n"] for c in mine], risks)
    return summary


def format_rows(rows):
    """Tab-separated table with a header line."""
    lines = ["\t".join(COLUMNS)]
    for row in rows:
        cells = []
        for key in COLUMNS:
            v = row[key]
            if isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            elif isinstance(v, float):
                cells.append("nan" if math.isnan(v) else repr(v))
            else:
                cells.append(str(v))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
