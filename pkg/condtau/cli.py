"""
condtau command line
====================
Front end over the library:

  estimate         conditional Kendall's tau on a grid of z values (+ CIs)
  cv-bandwidth     leave-pair-out cross-validation curve and selected h
  bounds           positivity / deviation bound evaluation
  simulate         Monte Carlo study in one of the two simulation settings
  cv-study         Monte Carlo study with cross-validated bandwidths
  validate-bounds  empirical check of the deviation bound
  replay           re-run a command from its manifest

Usage:
    python -m condtau estimate --input data.csv --z 0.1:0.9:9 --bandwidth rot:1.5 --ci 0.95
    python -m condtau simulate --setting 1 --n 500 --reps 500 --out table.csv --local-out curves.csv

Exit codes: 0 success, 2 usage error, 1 runtime error (one-line message).
Every output file gets a `<file>.manifest.json` sidecar.
"""

import argparse
import logging
import sys

import numpy as np
import pandas as pd

from . import bandwidth, bounds, config, estimators, inference, kernels, simulation
from .errors import CondTauError, InvalidParameter
from .estimators import ALL_ESTIMATORS, EstimatorKind
from .kernels import KernelFamily, KernelSpec
from .sample import read_sample_csv, write_frame

_LOG = logging.getLogger("condtau")


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------

def float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def grid_spec(text):
    """lo:hi:count"""
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:count, got {text!r}") from None
    if count < 1 or lo <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"need 0 < lo <= hi and count >= 1, got {text!r}")
    return lo, hi, count


def estimator_list(text):
    if text == "all":
        return [k.value for k in ALL_ESTIMATORS]
    names = [v.strip() for v in text.split(",") if v.strip()]
    for name in names:
        if name not in {k.value for k in EstimatorKind}:
            raise argparse.ArgumentTypeError(f"unknown estimator {name!r}")
    return names


def parse_points(text, p):
    """
    Query points for --z.

    lo:hi:count gives an equispaced grid (p = 1). Otherwise points are
    separated by ';' and coordinates by ','; with p = 1 a plain comma list
    is a list of points.
    """
    if ":" in text:
        try:
            lo, hi, count = text.split(":")
            grid = np.linspace(float(lo), float(hi), int(count))
        except ValueError:
            raise InvalidParameter(f"--z grid must be lo:hi:count, got {text!r}") from None
        if p != 1:
            raise InvalidParameter("a lo:hi:count grid needs a one-dimensional covariate")
        return [np.array([v]) for v in grid]
    try:
        if ";" in text or p > 1:
            points = [np.array([float(c) for c in chunk.split(",")]) for chunk in text.split(";") if chunk.strip()]
        else:
            points = [np.array([float(v)]) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidParameter(f"--z expects numbers, got {text!r}") from None
    for point in points:
        if point.shape != (p,):
            raise InvalidParameter(f"--z point {point.tolist()} does not have the covariate dimension {p}")
    if not points:
        raise InvalidParameter("--z holds no point")
    return points


def resolve_bandwidth(text, sample, spec, k, n_pairs, threads):
    """h, rot[:alpha] or cv."""
    if text == "cv":
        total = sample.n * (sample.n - 1) // 2
        cv = bandwidth.CVConfig(k=k, n_pairs=min(n_pairs, total), kernel=spec)
        h, _ = bandwidth.cv_select(sample, cv, threads=threads)
        _LOG.info("  ✓ cross-validated bandwidth h = %.6g", h)
        return h
    if text.startswith("rot"):
        _, _, alpha = text.partition(":")
        try:
            alpha = float(alpha) if alpha else 1.0
        except ValueError:
            raise InvalidParameter(f"--bandwidth rot:<alpha> needs a number, got {text!r}") from None
        h = bandwidth.rule_of_thumb(sample, alpha)
        _LOG.info("  ✓ rule-of-thumb bandwidth h = %.6g", h)
        return h
    try:
        h = float(text)
    except ValueError:
        raise InvalidParameter(f"--bandwidth must be a number, rot:<alpha> or cv, got {text!r}") from None
    kernels.check_bandwidth(h)
    return h


def _output(frame, path, manifest):
    write_frame(frame, path if path else sys.stdout)
    if path:
        config.write_manifest(manifest, path)
        _LOG.info("  ✓ wrote %s", path)


def _copula_or_nan(tau, family):
    if not np.isfinite(tau):
        return np.nan
    try:
        return estimators.copula_parameter(tau, family)
    except InvalidParameter as exc:
        _LOG.debug("no %s parameter for tau=%g: %s", family, tau, exc)
        return np.nan


def _params(args):
    return {key: value for key, value in vars(args).items() if key not in ("func", "verbose", "quiet")}


def _spec(args, dimension=1):
    return KernelSpec.from_name(args.kernel or KernelFamily.EPANECHNIKOV.value, dimension=dimension)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_estimate(args):
    threads = config.resolve_threads(args.threads)
    _LOG.info("Step 1: Loading %s...", args.input)
    sample = read_sample_csv(args.input)
    _LOG.info("  ✓ %d observations, p = %d", sample.n, sample.p)
    spec = _spec(args, sample.p)
    points = parse_points(args.z, sample.p)

    _LOG.info("\nStep 2: Choosing the bandwidth...")
    h = resolve_bandwidth(args.bandwidth, sample, spec, args.k, args.n_pairs, threads)

    _LOG.info("\nStep 3: Estimating %s at %d point(s)...", args.estimator, len(points))
    results = estimators.tau_hat_grid(args.estimator, sample, points, spec, h, threads=threads)
    ties = max((r.tied_pairs for r in results), default=0)
    if ties:
        _LOG.warning("  ⚠ tied pairs in the weighted windows (up to %d at one point); they count as neither concordant nor discordant", ties)
    if any(r.signed_weights for r in results):
        _LOG.warning("  ⚠ negative kernel weights: range guarantees do not hold")

    frame = pd.DataFrame(
        np.array([r.z for r in results]),
        columns=["z"] if sample.p == 1 else [f"z{k + 1}" for k in range(sample.p)],
    )
    frame["estimate"] = [r.value for r in results]
    frame["s_n"] = [r.s_n for r in results]
    frame["n_effective"] = [r.n_effective for r in results]

    if args.ci is not None:
        _LOG.info("\nStep 4: Plug-in variance and %.0f%% intervals...", 100 * args.ci)
        variances = inference.estimate_variance_grid(args.estimator, sample, results, spec, h, threads=threads)
        rows = []
        for est, var in zip(results, variances):
            if var is None:
                rows.append((np.nan, np.nan, np.nan, False))
                continue
            ci = inference.confidence_interval(est, var, sample.n, h, sample.p, args.ci, truncate=args.truncate)
            rows.append((ci.standard_error, ci.lower, ci.upper, var.clamped))
        intervals = pd.DataFrame(rows, columns=["se", "ci_lo", "ci_hi", "var_clamped"], index=frame.index)
        frame = frame.join(intervals.astype({"var_clamped": bool}))

    if args.copula:
        frame["copula_param"] = [_copula_or_nan(v, args.copula) for v in frame["estimate"]]

    manifest = config.RunManifest.for_run("estimate", _params(args) | {"h": h})
    _output(frame, args.out, manifest)
    return 0


def cmd_cv_bandwidth(args):
    threads = config.resolve_threads(args.threads)
    _LOG.info("Step 1: Loading %s...", args.input)
    sample = read_sample_csv(args.input)
    spec = _spec(args, sample.p)
    grid = None
    if args.grid:
        lo, hi, count = args.grid
        grid = tuple(np.geomspace(lo, hi, count))
    n_pairs = min(args.n_pairs, sample.n * (sample.n - 1) // 2)
    if n_pairs < args.n_pairs:
        _LOG.info("  ⚠ only %d pairs in a sample of %d, using all of them", n_pairs, sample.n)
    cv = bandwidth.CVConfig(k=args.k, n_pairs=n_pairs, h_grid=grid, kernel=spec)

    _LOG.info("\nStep 2: Leave-pair-out criterion over %d bandwidths...", len(cv.grid_for(sample)))
    h_cv, curve = bandwidth.cv_select(sample, cv, threads=threads)
    _LOG.info("  ✓ selected h = %.6g", h_cv)

    manifest = config.RunManifest.for_run("cv-bandwidth", _params(args) | {"h_cv": h_cv})
    _output(curve[["h", "cv"]], args.out, manifest)
    # stdout carries the curve when there is no --out
    print(f"h_cv = {float(h_cv)!r}", file=None if args.out else sys.stderr)
    return 0


DENSITY_FLAGS = ("f_min", "f_max", "f_z", "c_k_alpha", "c_ktilde_2", "c_xz_alpha", "alpha")


def _density_constants(args):
    values = config.load_toml(args.constants) if args.constants else {}
    values = values.get("density", values)
    values = dict(values) | {key: getattr(args, key) for key in DENSITY_FLAGS if getattr(args, key) is not None}
    if "f_min" not in values or "f_max" not in values:
        raise InvalidParameter("f_min and f_max are required (flags or --constants file)")
    return bounds.DensityConstants.from_mapping(values)


def _print_bound(title, result):
    rows = [(name, "ok" if ok else "violated") for name, ok in result.conditions]
    width = max(len(name) for name, _ in rows) if rows else 10
    print(title)
    print("=" * len(title))
    for name, status in rows:
        print(f"  {name:<{width}}  {status}")
    print(f"  threshold_x  {float(result.threshold_x)!r}")
    print(f"  raw_bound    {float(result.raw_bound)!r}")
    print(f"  prob_bound   {float(result.prob_bound)!r}")


def cmd_bounds(args):
    spec = _spec(args, args.p)
    kc = kernels.constants(spec)
    dc = _density_constants(args)
    if args.prop == "positivity":
        result = bounds.positivity_bound(args.n, args.h, args.p, kc, dc)
        _print_bound("P(f_hat_Z(z) > 0) >= prob_bound", result)
    else:
        if args.t is None or args.t_prime is None:
            raise InvalidParameter("the deviation bound needs --t and --t-prime")
        result = bounds.deviation_bound(args.k, args.n, args.h, args.p, args.t, args.t_prime, kc, dc)
        _print_bound(f"P(|tau_{args.k} - tau| > threshold_x) <= prob_bound", result)
    return 0


SIMULATE_DEFAULTS = {
    "setting": 1,
    "n": 500,
    "reps": simulation.DEFAULT_REPS,
    "alpha_h": list(simulation.DEFAULT_ALPHA_H),
    "estimators": [k.value for k in ALL_ESTIMATORS],
    "h_source": "rot",
    "n_pairs": bandwidth.DEFAULT_N_PAIRS,
    "seed": 0,
    "kernel": KernelFamily.EPANECHNIKOV.value,
    "z_grid": None,
}


def _resolved(args, defaults):
    file_values = config.load_toml(args.config) if args.config else {}
    cli_values = {key: getattr(args, key, None) for key in defaults}
    return config.merge_settings(file_values, cli_values, defaults)


def cmd_simulate(args):
    threads = config.resolve_threads(args.threads)
    run = _resolved(args, SIMULATE_DEFAULTS)
    mc = simulation.MCConfig(
        setting=simulation.SettingSpec(run["setting"], run["n"], run["seed"]),
        reps=run["reps"],
        estimators=run["estimators"],
        alpha_h=run["alpha_h"],
        h_source=run["h_source"],
        n_pairs=run["n_pairs"],
        z_grid=run["z_grid"],
        kernel=KernelSpec.from_name(run["kernel"]),
    )
    _LOG.info("Step 1: Running %d replications on %d thread(s)...", mc.reps, threads)
    report = simulation.run_mc(mc, threads=threads)

    _LOG.info("\nStep 2: Writing results...")
    manifest = config.RunManifest.for_run("simulate", _params(args) | {"resolved": run}, seed=run["seed"])
    table = simulation.integrated_table(report).reset_index()
    _output(table, args.out, manifest)
    if args.local_out:
        _output(report.local, args.local_out, manifest)
    return 0


CV_STUDY_DEFAULTS = {
    "setting": 2,
    "n_values": list(simulation.DEFAULT_N_VALUES),
    "reps": simulation.DEFAULT_REPS,
    "n_pairs": bandwidth.DEFAULT_N_PAIRS,
    "multipliers": list(simulation.CV_MULTIPLIERS),
    "estimators": [k.value for k in ALL_ESTIMATORS],
    "seed": 0,
    "kernel": KernelFamily.EPANECHNIKOV.value,
}


def cmd_cv_study(args):
    threads = config.resolve_threads(args.threads)
    run = _resolved(args, CV_STUDY_DEFAULTS)
    study = simulation.run_cv_study(
        setting=run["setting"], n_values=run["n_values"], reps=run["reps"], n_pairs=run["n_pairs"],
        multipliers=run["multipliers"], seed=run["seed"], kinds=run["estimators"],
        kernel=KernelSpec.from_name(run["kernel"]), threads=threads,
    )
    manifest = config.RunManifest.for_run("cv-study", _params(args) | {"resolved": run}, seed=run["seed"])
    _output(study.summary, args.summary_out, manifest)
    if args.out:
        _output(study.integrated, args.out, manifest)
    return 0


def cmd_validate_bounds(args):
    threads = config.resolve_threads(args.threads)
    spec = _spec(args)
    report = bounds.bound_validity_check(
        args.setting, args.z, args.n, args.h, args.t, args.t_prime, args.reps, args.seed,
        k=args.k, spec=spec, threads=threads,
    )
    frame = pd.DataFrame([{
        "setting": report.setting, "z": report.z, "n": report.n, "h": report.h, "k": int(report.k),
        "reps": report.reps, "threshold_x": report.bound.threshold_x,
        "prob_bound": report.bound.prob_bound, "raw_bound": report.bound.raw_bound,
        "violations": report.violations, "undefined": report.undefined,
        "frequency": report.frequency, "status": report.status,
    }])
    manifest = config.RunManifest.for_run("validate-bounds", _params(args), seed=args.seed)
    _output(frame, args.out, manifest)
    return 0


def cmd_replay(args):
    manifest = config.read_manifest(args.manifest)
    handler = COMMANDS.get(manifest.command)
    if handler is None:
        raise InvalidParameter(f"{args.manifest}: unknown command {manifest.command!r}")
    params = {key: value for key, value in manifest.parameters.items() if key not in ("resolved", "h", "h_cv")}
    if "resolved" in manifest.parameters:
        # the run file may have changed since; replay the values actually used
        params.update(manifest.parameters["resolved"])
        params["config"] = None
    params["threads"] = args.threads if args.threads is not None else params.get("threads")
    _LOG.info("Replaying %s recorded with condtau %s at %s", manifest.command, manifest.version, manifest.timestamp)
    return handler(argparse.Namespace(**params))


COMMANDS = {
    "estimate": cmd_estimate,
    "cv-bandwidth": cmd_cv_bandwidth,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "cv-study": cmd_cv_study,
    "validate-bounds": cmd_validate_bounds,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="Only warnings and errors")
    common.add_argument("--threads", type=int, default=None,
                        help=f"Worker threads (default: ${config.THREADS_ENV} or CPU count)")
    common.add_argument("--kernel", choices=[f.value for f in KernelFamily], default=None,
                        help="Kernel family (default: epanechnikov)")

    parser = argparse.ArgumentParser(prog="condtau", description="Conditional Kendall's tau estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="Estimate tau(z) on a grid")
    p.add_argument("--input", required=True, help="CSV with header x1,x2,z1[,z2,...]")
    p.add_argument("--z", required=True, help="Points: lo:hi:count, v1,v2,... or z1,z2;z1,z2")
    p.add_argument("--estimator", choices=[k.value for k in EstimatorKind], default=EstimatorKind.TILDE.value)
    p.add_argument("--bandwidth", default="rot:1.5", help="h, rot[:alpha] or cv (default rot:1.5)")
    p.add_argument("--k", type=int, choices=[1, 2, 3], default=2, help="g_k used by --bandwidth cv")
    p.add_argument("--n-pairs", type=int, default=bandwidth.DEFAULT_N_PAIRS)
    p.add_argument("--ci", type=float, default=None, metavar="LEVEL", help="Add pointwise confidence intervals")
    p.add_argument("--truncate", action="store_true", help="Clip intervals to [-1, 1]")
    p.add_argument("--copula", choices=estimators.COPULA_FAMILIES, default=None,
                   help="Add the copula parameter matching each estimate")
    p.add_argument("--out", default=None, help="Output CSV (default: stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("cv-bandwidth", parents=[common], help="Cross-validation curve")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, choices=[1, 2, 3], default=2)
    p.add_argument("--n-pairs", type=int, default=bandwidth.DEFAULT_N_PAIRS)
    p.add_argument("--grid", type=grid_spec, default=None, help="lo:hi:count, geometric (default: around the rule of thumb)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cv_bandwidth)

    p = sub.add_parser("bounds", parents=[common], help="Evaluate a finite-sample bound")
    p.add_argument("--prop", choices=["positivity", "deviation"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--k", type=int, choices=[1, 2, 3], default=2)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--t-prime", type=float, default=None)
    p.add_argument("--constants", default=None, help="TOML file with the density constants")
    for key in DENSITY_FLAGS:
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int if key == "alpha" else float, default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo study")
    p.add_argument("--config", default=None, help="TOML run file; flags override it")
    p.add_argument("--setting", type=int, choices=[1, 2], default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--alpha-h", type=float_list, default=None)
    p.add_argument("--estimators", type=estimator_list, default=None)
    p.add_argument("--h-source", choices=["rot", "cv"], default=None)
    p.add_argument("--n-pairs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="Integrated table (x1000) CSV")
    p.add_argument("--local-out", default=None, help="Local curves CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cv-study", parents=[common], help="Cross-validated bandwidth study")
    p.add_argument("--config", default=None)
    p.add_argument("--setting", type=int, choices=[1, 2], default=None)
    p.add_argument("--n-values", type=int_list, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--n-pairs", type=int, default=None)
    p.add_argument("--multipliers", type=float_list, default=None)
    p.add_argument("--estimators", type=estimator_list, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--summary-out", default=None, help="E[h_cv], Sd[h_cv], h_ref per n")
    p.add_argument("--out", default=None, help="Integrated measures per n")
    p.set_defaults(func=cmd_cv_study)

    p = sub.add_parser("validate-bounds", parents=[common], help="Empirical deviation frequency vs bound")
    p.add_argument("--setting", type=int, choices=[1, 2], default=1)
    p.add_argument("--z", type=float, default=0.5)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--t-prime", type=float, required=True)
    p.add_argument("--k", type=int, choices=[1, 2, 3], default=2)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate_bounds)

    p = sub.add_parser("replay", help="Re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_replay)
    return parser


def _configure_logging(verbose, quiet):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr, force=True)


def parse_and_dispatch(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    _configure_logging(args.verbose, args.quiet)
    try:
        return args.func(args) or 0
    except (CondTauError, OSError) as exc:
        _LOG.error("error: %s", exc)
        return 1


def main():
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
