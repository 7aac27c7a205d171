"""Risk at the oracle scale on the circle
=======================================

With the density known, the scale (7/4) (3 ln n / (alpha_d f_min n))^(1/d)
gives a Hausdorff risk of order (ln n / n)^(2/d).  This script runs the
seeded rate experiment on the unit circle (d = 1) and fits the slope of
log risk against log(ln n / n), which should come out close to 2.
"""

from tconvex.bench import get_experiment, run_experiment, summarize


def main(trials=3):
    experiment = get_experiment("rate-circle", trials=trials)
    rows = run_experiment(experiment)
    summary = summarize(rows)
    for cell in summary["cells"]:
        print(f"n = {cell['n']:5d}  t = {cell['mean_t']:.4f}  mean risk = {cell['mean_risk']:.2e}")
    print(f"fitted slope: {summary['slopes']['circle']:.3f} (theory: 2)")


if __name__ == "__main__":
    main()
