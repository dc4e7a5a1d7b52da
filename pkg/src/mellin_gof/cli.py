"""Command-line interface.

Exit codes: 0 accept (or success), 3 reject, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .maxtest import delta_K, max_test, parse_collection
from .mellin import TestProblem
from .numerics import QuadratureError
from .rates import ErrorSmoothness, RegimeError, RegularityClass, rate_order, rate_sweep, sweep_slopes
from .simulation import (
    PRESETS,
    SimConfig,
    calibrate_quantiles,
    default_jobs,
    preset_config,
    run_simulation,
    write_outputs,
)
from .statistic import SampleError, Sample
from .thresholds import (
    Empirical,
    Theoretical,
    TheoreticalBonferroni,
    deltainf,
    delta4,
    model_constants,
    test_single,
)

log = logging.getLogger("mellin_gof")

EXIT_ACCEPT, EXIT_USAGE, EXIT_DATA, EXIT_REJECT = 0, 1, 2, 3
SEED_ENV = "MELLIN_GOF_SEED"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def read_data(path) -> Sample:
    """Newline-delimited positive decimals; blank lines and '#' comments are skipped."""
    values = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                v = float(text)
            except ValueError:
                raise DataError(f"{path}:{lineno}: not a number: {text!r}") from None
            if not (math.isfinite(v) and v > 0):
                raise DataError(f"{path}:{lineno}: observation must be positive and finite, got {text!r}")
            values.append(v)
    if len(values) < 2:
        raise DataError(f"{path}: need at least 2 observations, found {len(values)}")
    return Sample(np.array(values))


def read_config(path) -> dict:
    """Flat ``key = value`` lines with '#' comments."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        key, sep, value = text.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _problem(args) -> TestProblem:
    try:
        return TestProblem.from_specs(args.null, args.error, args.c, args.weight)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_problem(p):
    p.add_argument("--null", default="lognormal:0:1", help="null density spec")
    p.add_argument("--error", default="pareto:2", help="error density spec")
    p.add_argument("--c", type=float, default=0.5, help="Mellin line Re(s) = c")
    p.add_argument("--weight", default="unit", help="unit | survival | derivative:<beta>")


def _add_common(p):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes for Monte Carlo loops")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mellin-gof", description="Goodness-of-fit tests under multiplicative measurement error.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test", help="test a data file against the null")
    p.add_argument("data", help="newline-delimited positive observations")
    _add_problem(p)
    _add_common(p)
    p.add_argument("--k", type=float, help="single dimension parameter")
    p.add_argument("--collection", help="naive | geometric | loglog:<m> | explicit:<list>")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--mode", choices=("theoretical", "bonferroni", "empirical"), default="theoretical")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--calib", help="calib.csv with cached null quantiles (empirical mode)")
    p.add_argument("--B", type=int, default=1000, help="calibration size when no cache is given")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="Monte Carlo experiment")
    _add_problem(p)
    _add_common(p)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--example", type=int, choices=(1, 2), default=1, help="1: data from the null, 2: powerlaw2x")
    p.add_argument("--alt", help="density generating the data (default: the null)")
    p.add_argument("--k", type=_floats, help="comma-separated k grid")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--reps", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--scale", type=float)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--calib", type=int, help="null replications for the empirical quantiles")
    p.add_argument("--save-samples", action="store_true", help="write each replication's sample")
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rates", help="numerical k* and radius against tabulated orders")
    _add_problem(p)
    _add_common(p)
    p.add_argument("--regularity", default="os:2", help="os:<s> | ss:<s>")
    p.add_argument("--smoothness", default="os:1", help="declared error decay, os:<gamma> | ss:<sigma>")
    p.add_argument("--n-list", type=_floats, default=[10.0**j for j in range(3, 10)])
    p.add_argument("--collection", choices=("single", "naive", "geometric", "loglog"), default="single")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("calibrate", help="empirical null quantiles")
    _add_problem(p)
    _add_common(p)
    p.add_argument("--k", type=_floats, required=True, help="comma-separated k values")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--B", type=int, default=1000)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("constants", help="model constants and penalties")
    _add_problem(p)
    _add_common(p)
    p.add_argument("--k", type=_floats, default=[1.0])
    p.add_argument("--p", type=float, default=2.0)
    p.set_defaults(func=cmd_constants)
    return parser


def parse_args(argv, parser=None):
    parser = parser or build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions if a.dest not in ("help", "config", "func")}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for key, raw in values.items():
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                values[key] = raw.lower() in ("1", "true", "yes", "on")
        sub.set_defaults(**values)
        # string defaults go through each action's type conversion
        args = parser.parse_args(argv)
    return args


def _jobs(args) -> int:
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise UsageError("--jobs must be at least 1")
    return jobs


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def load_calibration(path, ks, n, alpha) -> np.ndarray:
    """Quantiles for ``ks`` from a calib.csv written by the calibrate command."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    table = {}
    for lineno, row in enumerate(rows, 2):
        try:
            key = (float(row["k"]), int(row["n"]), float(row["alpha"]))
            table[key] = float(row["quantile"])
        except (KeyError, TypeError, ValueError):
            raise DataError(f"{path}:{lineno}: malformed calibration row") from None
    out = []
    for k in ks:
        if (k, n, alpha) not in table:
            raise DataError(f"{path}: no quantile for k={k:g}, n={n}, alpha={alpha:g}")
        out.append(table[(k, n, alpha)])
    return np.array(out)


def cmd_test(args) -> int:
    problem = _problem(args)
    sample = read_data(args.data)
    if (args.k is None) == (args.collection is None):
        raise UsageError("give exactly one of --k and --collection")
    try:
        collection = parse_collection(args.collection, sample.n) if args.collection else None
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ks = list(collection) if collection else [args.k]
    quantiles = None
    if args.mode == "empirical":
        if args.calib:
            quantiles = load_calibration(args.calib, ks, sample.n, args.alpha)
        else:
            quantiles = calibrate_quantiles(problem, ks, sample.n, args.alpha, args.B, _seed(args), _jobs(args))
    constants = None if args.mode == "empirical" else model_constants(problem, args.p)
    if collection is None:
        mode = {
            "theoretical": Theoretical(),
            "bonferroni": TheoreticalBonferroni(args.p, 1),
            "empirical": Empirical(float(quantiles[0]) if quantiles is not None else 0.0, args.B),
        }[args.mode]
        outcomes = [test_single(sample, problem, args.k, args.alpha, mode, args.scale, constants)]
        reject = outcomes[0].reject
        factor = 1.0
    else:
        mt_mode = "empirical" if args.mode == "empirical" else "bonferroni"
        res = max_test(sample, problem, collection, args.alpha, args.p, mt_mode, args.scale, constants, quantiles)
        outcomes, reject, factor = list(res.per_k), res.reject, res.delta_K
    rows = [
        [_fmt(o.k), _fmt(o.statistic), _fmt(o.threshold), int(o.reject), args.mode, _fmt(args.alpha)]
        for o in outcomes
    ]
    _write_csv(Path(args.out) / "report.csv", ["k", "statistic", "threshold", "reject", "mode", "alpha"], rows)
    print(f"n = {sample.n}, alpha = {args.alpha:g}, mode = {args.mode}")
    if collection is not None:
        print(f"collection {collection.kind}, |K| = {collection.size}, delta_K = {factor:.6g}")
    for o in outcomes:
        print(f"  k = {o.k:<8g} statistic = {o.statistic: .6g}  threshold = {o.threshold:.6g}  {'reject' if o.reject else 'accept'}")
    print("decision:", "reject H0" if reject else "accept H0")
    return EXIT_REJECT if reject else EXIT_ACCEPT


def _sim_config(args) -> SimConfig:
    overrides = {}
    if args.k is not None:
        overrides["k_grid"] = tuple(args.k)
    for name, key in (("reps", "reps"), ("alpha", "alpha"), ("scale", "scale"), ("calib", "calib_B")):
        if getattr(args, name) is not None:
            overrides[key] = getattr(args, name)
    overrides["seed"] = _seed(args)
    overrides["p"] = args.p
    if args.preset:
        cfg = preset_config(args.preset, args.example, args.n, **overrides)
        if args.alt:
            cfg = SimConfig(**{**cfg.__dict__, "alt_name": args.alt})
        return cfg
    alt = args.alt if args.alt else (None if args.example == 1 else "powerlaw2x")
    return SimConfig(
        n=args.n, null_name=args.null, error_name=args.error, alt_name=alt, c=args.c, weight=args.weight, **overrides
    )


def cmd_simulate(args) -> int:
    try:
        cfg = _sim_config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    result = run_simulation(cfg, _jobs(args), keep_samples=args.save_samples)
    paths = write_outputs(result, args.out, svg=not args.no_svg)
    if args.save_samples:
        sdir = Path(args.out) / "samples"
        sdir.mkdir(parents=True, exist_ok=True)
        for r, row in enumerate(result.samples):
            (sdir / f"rep_{r:04d}.txt").write_text("".join(f"{_fmt(v)}\n" for v in row))
    print(f"n = {cfg.n}, reps = {cfg.reps}, k = {', '.join(f'{k:g}' for k in cfg.k_grid)}")
    print(f"separation truth = {result.separation_truth:.6g}")
    for mode, rate in result.rejection_rates.items():
        print(f"  {mode:<32} {rate:.3f}")
    for p in paths:
        print("wrote", p)
    return 0


def _smoothness(text, cls):
    kind, _, param = text.partition(":")
    try:
        return cls(kind, float(param))
    except ValueError as exc:
        raise UsageError(f"bad smoothness {text!r}: {exc}") from exc


def cmd_rates(args) -> int:
    if not args.n_list:
        raise UsageError("--n-list must not be empty")
    problem = _problem(args)
    regularity = _smoothness(args.regularity, RegularityClass)
    error = _smoothness(args.smoothness, ErrorSmoothness)
    try:
        fitted = error.validate(problem)
        pred = rate_order(regularity, error, problem.weight.a, args.n_list, args.collection)
        rows = rate_sweep(regularity, problem, error, args.n_list)
    except RegimeError as exc:
        raise UsageError(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for row, p in zip(rows, pred):
        row.update(k_pred=p["k_pred"], rho2_pred=p["rho2_pred"], regime=p["regime"])
    slopes = sweep_slopes(rows)
    header = ["n", "k_star", "rho2_star", "k_pred", "rho2_pred", "regime"]
    out = [[_fmt(r["n"]), _fmt(r["k_star"]), _fmt(r["rho2_star"]), _fmt(r["k_pred"]), _fmt(r["rho2_pred"]), r["regime"]] for r in rows]
    path = _write_csv(Path(args.out) / "rates.csv", header, out)
    print(f"fitted error decay exponent {fitted:.4g} (declared {error.param:g})")
    print(",".join(header))
    for r in out:
        print(",".join(r))
    for name, v in slopes.items():
        print(f"{name} = {v:.6g}")
    print("wrote", path)
    return 0


def cmd_calibrate(args) -> int:
    problem = _problem(args)
    if args.B < 100:
        raise UsageError("--B must be at least 100")
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    ks = sorted(args.k)
    seed = _seed(args)
    q = calibrate_quantiles(problem, ks, args.n, args.alpha, args.B, seed, _jobs(args))
    header = ["k", "n", "alpha", "B", "seed", "quantile", "null", "error", "c", "weight"]
    rows = [
        [_fmt(k), args.n, _fmt(args.alpha), args.B, seed, _fmt(v), problem.null.spec, problem.error.spec, _fmt(args.c), problem.weight.spec]
        for k, v in zip(ks, q)
    ]
    path = _write_csv(Path(args.out) / "calib.csv", header, rows)
    for k, v in zip(ks, q):
        print(f"k = {k:g}: quantile = {v:.17g}")
    print("wrote", path)
    return 0


def cmd_constants(args) -> int:
    problem = _problem(args)
    c = model_constants(problem, args.p)
    print(f"c_U = {c.c_u:.17g}\nv1 = {c.v1:.17g}\nv2 = {c.v2:.17g}\nvp = {c.vp:.17g} (p = {c.p:g})")
    for k in args.k:
        print(f"k = {k:g}: Delta4 = {delta4(problem, k):.17g}, DeltaInf = {deltainf(problem, k):.17g}")
    print(f"delta_K for |K| = {len(args.k)}: {delta_K(len(args.k)):.17g}")
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        args = parse_args(argv, parser)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"mellin-gof: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SampleError) as exc:
        print(f"mellin-gof: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except QuadratureError as exc:
        print(f"mellin-gof: numerical error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"mellin-gof: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
