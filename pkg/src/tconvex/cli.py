"""Command-line front end.

Every subcommand writes its outputs, validates the JSON ones against the
shipped schemas and records a run manifest (config echo, version, timings,
SHA-256 of inputs and outputs) next to its primary output.

Exit status: 0 on success, 1 on bad input or failed computation, 2 on usage
errors, 3 when an output fails schema validation.
"""

import argparse
import json
import math
import os
import sys
import time
from importlib import resources

from . import __version__
from .bench import EXPERIMENTS, format_rows, get_experiment, run_experiment, summarize
from .defect import GraphDefect, full_defect_profile, t_lambda
from .estimate import ComplexTooLarge, oracle_scale, reconstruct, tangent_estimates
from .io import CloudParseError, read_cloud, sha256_file, write_cloud
from .manifolds import FAMILIES, NoiseSpec, load_config, make_model
from .select import select_scale

EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_INVALID = 3


class UsageError(Exception):
    pass


class ValidationFailed(Exception):
    pass


def _schema(name):
    text = resources.files("tconvex").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc, name):
    import jsonschema

    try:
        jsonschema.validate(doc, _schema(name))
    except jsonschema.ValidationError as err:
        raise ValidationFailed(f"{name} output does not match its schema: {err.message}") from None


class Run:
    """Collects timings and file digests for one command, then writes the manifest."""

    def __init__(self, args):
        self.args = args
        self.timings = {}
        self.inputs = {}
        self.outputs = {}

    def phase(self, name):
        run = self

        class _Timer:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] = run.timings.get(name, 0.0) + time.perf_counter() - self.start

        return _Timer()

    def read(self, path):
        with self.phase("read"):
            cloud = read_cloud(path)
        self.inputs[path] = sha256_file(path)
        return cloud

    def write_json(self, path, doc, schema):
        validate(doc, schema)
        with open(path, "w") as fh:
            json.dump(doc, fh, separators=(", ", ": "))
            fh.write("\n")
        self.outputs[path] = sha256_file(path)

    def write_text(self, path, text):
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        self.outputs[path] = sha256_file(path)

    def write_cloud(self, path, cloud, header=False):
        write_cloud(path, cloud, header)
        self.outputs[path] = sha256_file(path)

    def manifest(self, primary):
        config = {k: v for k, v in vars(self.args).items() if k not in ("func", "manifest")}
        doc = {"command": self.args.command, "config": config,
               "seed": getattr(self.args, "seed", None), "version": __version__,
               "inputs": self.inputs, "timings": self.timings, "outputs": self.outputs}
        path = self.args.manifest or f"{primary}.manifest.json"
        validate(doc, "manifest")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _tsv(header, columns):
    lines = ["\t".join(header)]
    for row in zip(*columns):
        lines.append("\t".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _stem(path):
    root, ext = os.path.splitext(path)
    return root if ext else path


# -- subcommands ------------------------------------------------------------------------------


def cmd_sample(args, run):
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        validate(doc, "model")
        model, noise, seed, n = load_config(doc)
        if args.n is not None:
            n = args.n
        if args.seed is not None:
            seed = args.seed
        if n is None:
            raise UsageError("the config has no n; pass --n")
    else:
        if args.manifold is None or args.n is None:
            raise UsageError("sample needs --manifold and --n (or --config)")
        params = {}
        if args.ambient_dim is not None:
            if args.manifold != "circle":
                raise UsageError("--ambient-dim only applies to --manifold circle")
            params["ambient_dim"] = args.ambient_dim
        model = make_model(args.manifold, **params)
        noise = NoiseSpec.parse(args.noise)
        seed, n = args.seed if args.seed is not None else 0, args.n
    if n < 1:
        raise UsageError("--n must be positive")
    args.seed = seed
    with run.phase("sample"):
        sample = model.sample(n, noise, seed)
    run.write_cloud(args.output, sample.points, args.header)
    if args.clean:
        run.write_cloud(args.clean, sample.clean, args.header)
    return args.output


def cmd_defect(args, run):
    cloud = run.read(args.input)
    with run.phase("defect"):
        if args.full:
            profile = full_defect_profile(cloud)
        else:
            k = min(args.k, len(cloud) - 1)
            if k < 1:
                raise ValueError("a defect profile needs at least 2 points")
            profile = GraphDefect(cloud).profile(k)
    doc = json.loads(profile.to_json())
    if not args.full:
        doc["K"] = k
    run.write_json(args.output, doc, "profile")
    if args.h_tsv:
        run.write_text(args.h_tsv, _tsv(("t", "h"), (profile.breakpoints, profile.values)))
    return args.output


def _fixed_lambda(cloud, lam, k0, max_k):
    """t_lambda with K doubled until it stops saturating."""
    n = len(cloud)
    cap = n - 1 if max_k is None else min(max_k, n - 1)
    defect = GraphDefect(cloud)
    K = min(k0, cap)
    while True:
        profile = defect.profile(K)
        t, saturated = t_lambda(profile, lam, full_output=True)
        if not saturated or K >= cap:
            return profile, t, saturated, K
        K = min(2 * K, cap)


def cmd_select(args, run):
    cloud = run.read(args.input)
    if len(cloud) < 3:
        raise ValueError(f"scale selection needs at least 3 points, got {len(cloud)}")
    stem = _stem(args.output)
    if args.lam is not None:
        with run.phase("select"):
            profile, t, saturated, K = _fixed_lambda(cloud, args.lam, args.k0, args.max_k)
        doc = {"lambda": args.lam, "t_lambda": t, "saturated": saturated, "K": K}
        run.write_json(args.output, doc, "tlambda")
    else:
        with run.phase("select"):
            result = select_scale(cloud, K0=args.k0, grid_step=args.grid_step, max_K=args.max_k)
        profile = result.profile
        run.write_json(args.output, json.loads(result.to_json()), "selection")
        run.write_text(args.g_tsv or f"{stem}.g.tsv",
                       _tsv(("lambda", "g"), (result.lambda_grid, result.g_values)))
    run.write_text(args.h_tsv or f"{stem}.h.tsv",
                   _tsv(("t", "h"), (profile.breakpoints, profile.values)))
    return args.output


def _resolve_scale(spec, cloud, run):
    """Number, ``auto`` (scale selection) or ``oracle:d:fmin``."""
    if spec == "auto":
        if len(cloud) < 3:
            raise ValueError("--t auto needs at least 3 points")
        with run.phase("select"):
            return select_scale(cloud).t_sel
    if spec.startswith("oracle:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise UsageError("--t oracle needs the form oracle:d:fmin")
        try:
            d, f_min = int(parts[1]), float(parts[2])
        except ValueError:
            raise UsageError(f"cannot parse {spec!r} as oracle:d:fmin") from None
        if d < 1 or not f_min > 0:
            raise UsageError("oracle scale needs d >= 1 and fmin > 0")
        return oracle_scale(len(cloud), d, f_min)
    try:
        t = float(spec)
    except ValueError:
        raise UsageError(f"--t must be a number, 'auto' or 'oracle:d:fmin', not {spec!r}") \
            from None
    if not (t >= 0 and math.isfinite(t)):
        raise UsageError("--t must be a finite nonnegative number")
    return t


def cmd_reconstruct(args, run):
    cloud = run.read(args.input)
    t = _resolve_scale(args.t, cloud, run)
    with run.phase("reconstruct"):
        complex_ = reconstruct(cloud, t, args.dim, max_simplices=args.max_simplices)
    run.write_json(args.output, json.loads(complex_.to_json()), "complex")
    return args.output


def _parse_points(text, n):
    points = []
    for part in text.split(","):
        lo, dash, hi = part.partition("-")
        try:
            points.extend(range(int(lo), int(hi) + 1) if dash else [int(lo)])
        except ValueError:
            raise UsageError(f"cannot parse point list {text!r}") from None
    bad = [i for i in points if not 0 <= i < n]
    if bad:
        raise UsageError(f"point index {bad[0]} out of range for {n} points")
    return points


def cmd_tangent(args, run):
    cloud = run.read(args.input)
    base = _resolve_scale(args.t, cloud, run)
    scale = args.scale_mult * base
    points = _parse_points(args.points, len(cloud)) if args.points else range(len(cloud))
    with run.phase("tangent"):
        spaces = tangent_estimates(cloud, scale, args.dim, points, refine=args.refine)
    D = cloud.shape[1]
    header = ["index", "scale"] + [f"v{a}_{j}" for a in range(args.dim) for j in range(D)]
    lines = ["\t".join(header)]
    for i, space in zip(points, spaces):
        values = [repr(float(v)) for v in space.basis.ravel()]
        lines.append("\t".join([str(i), repr(float(scale))] + values))
    run.write_text(args.output, "\n".join(lines) + "\n")
    return args.output


def cmd_bench(args, run):
    experiment = get_experiment(args.experiment, trials=args.trials, n_grid=args.n_grid,
                                resolution=args.resolution)
    args.seed = args.seed if args.seed is not None else 0

    def progress(row):
        if not args.quiet:
            print(f"{row['family']} n={row['n']} seed={row['seed']} t={row['t']:.4g} "
                  f"eps={row['epsilon']:.4g} risk={row['risk']:.4g}", file=sys.stderr)

    with run.phase("bench"):
        rows = run_experiment(experiment, args.seed, progress)
    run.write_text(args.output, format_rows(rows))
    summary = {"experiment": experiment.to_dict(), **summarize(rows)}
    path = args.summary or f"{_stem(args.output)}.summary.json"
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    run.outputs[path] = sha256_file(path)
    return args.output


# -- parser -------------------------------------------------------------------------------


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _unit_interval(text):
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tconvex", description="t-convex hull manifold estimation with scale selection")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=_positive_int, default=None,
                        help="worker cap (default: $MFLD_THREADS, else all cores)")
    parser.add_argument("--manifest", default=None,
                        help="manifest path (default: <output>.manifest.json)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a reference manifold to CSV")
    families = sorted({k.replace("_", "-") for k in FAMILIES} | set(FAMILIES))
    p.add_argument("--manifold", choices=families)
    p.add_argument("--config", help="model JSON {family, params, noise, seed, n}")
    p.add_argument("--n", type=int)
    p.add_argument("--noise", default="none", help="none | tubular:G | ambient:G")
    p.add_argument("--ambient-dim", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--header", action="store_true", help="write an x0,...,x{D-1} header row")
    p.add_argument("--clean", help="also write the noiseless positions here")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("defect", help="graph (or full) convexity defect profile")
    p.add_argument("input")
    p.add_argument("--k", type=_positive_int, default=16, help="neighbour count for the horizon")
    p.add_argument("--full", action="store_true", help="all-subset profile (n <= 15)")
    p.add_argument("--h-tsv", help="also write the (t, h) table")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_defect)

    p = sub.add_parser("select", help="data-driven choice of lambda and t")
    p.add_argument("input")
    p.add_argument("--k0", type=_positive_int, default=16)
    p.add_argument("--grid-step", type=_unit_interval, default=0.01)
    p.add_argument("--max-k", type=_positive_int)
    p.add_argument("--lambda", dest="lam", type=_unit_interval,
                   help="fixed slope: report t_lambda instead of running the heuristic")
    p.add_argument("--g-tsv", help="(lambda, g) table (default: <output stem>.g.tsv)")
    p.add_argument("--h-tsv", help="(t, h) table (default: <output stem>.h.tsv)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("reconstruct", help="complex of all simplices with radius <= t")
    p.add_argument("input")
    p.add_argument("--t", required=True, help="VALUE | auto | oracle:d:fmin")
    p.add_argument("--dim", type=_positive_int, required=True, help="largest simplex dimension")
    p.add_argument("--max-simplices", type=_positive_int, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("tangent", help="tangent spaces at scale-mult times the selected scale")
    p.add_argument("input")
    p.add_argument("--dim", type=_positive_int, required=True, help="intrinsic dimension")
    p.add_argument("--t", default="auto", help="base scale: VALUE | auto | oracle:d:fmin")
    p.add_argument("--scale-mult", type=float, default=11.0)
    p.add_argument("--points", help="indices, e.g. 0,5,10-20 (default: all)")
    p.add_argument("--refine", action="store_true", help="sup-norm refinement pass")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_tangent)

    p = sub.add_parser("bench", help="seeded experiment matrix")
    p.add_argument("experiment", choices=sorted(EXPERIMENTS))
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--n-grid", type=lambda s: [int(v) for v in s.split(",")])
    p.add_argument("--resolution", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--summary", help="summary JSON (default: <output stem>.summary.json)")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def _set_threads(requested):
    if requested is None:
        env = os.environ.get("MFLD_THREADS")
        if not env:
            return
        try:
            requested = int(env)
        except ValueError:
            raise UsageError(f"MFLD_THREADS must be an integer, not {env!r}") from None
        if requested < 1:
            raise UsageError("MFLD_THREADS must be positive")
    import numba

    numba.set_num_threads(min(requested, numba.config.NUMBA_NUM_THREADS))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _set_threads(args.threads)
        run = Run(args)
        primary = args.func(args, run)
        run.manifest(primary)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"tconvex: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailed as err:
        print(f"tconvex: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (CloudParseError, FileNotFoundError, ValueError, ComplexTooLarge) as err:
        print(f"tconvex: error: {err}", file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
