"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical
failure (solver non-convergence under ``--strict``, divergence).
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import secrets
import sys
from dataclasses import asdict, is_dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig, bootstrap, default_jobs
from .data import DomainPair, load_csv, write_csv
from .errors import DataError, DomainError, NumericalError
from .estimators import PropensityClip
from .experiments import PartConfig, run_grid, run_part
from .frameworks import Framework, fit_nuisances, plug_in
from .selection import (DEFAULT_LOG10_GRID, LambdaGrid, SelectionPolicy, select_lambda, smd,
                        write_score_table)
from .synthetic import GridConfig, ToyConfig, generate_grid_instance, generate_toy
from .transfer import estimate_theory_constants, theory_lambda_or, theory_lambda_ps

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- shared flags

def _add_data(p, source=True):
    p.add_argument("--target", required=True, help="target-domain CSV")
    if source:
        p.add_argument("--source", required=True, help="source-domain CSV")
    p.add_argument("--treatment-col", default="z")
    p.add_argument("--outcome-col", default="y")


def _add_common(p):
    p.add_argument("--seed", type=int, help="master seed; drawn and recorded when omitted")
    p.add_argument("--out", help="output directory (receives outputs and manifest.json)")
    p.add_argument("--strict", action="store_true", help="exit 3 on solver non-convergence")
    p.add_argument("--format", choices=("json", "table"), default="json",
                   help="standard-output report format")


def _add_selection(p):
    p.add_argument("--criterion", choices=("auc", "nll", "smd"), default="auc")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--grid-start", type=float, default=DEFAULT_LOG10_GRID[0],
                   help="log10 of the smallest lambda")
    p.add_argument("--grid-stop", type=float, default=DEFAULT_LOG10_GRID[-1],
                   help="log10 of the largest lambda")
    p.add_argument("--grid-step", type=float, default=0.25)


def _add_fit(p):
    p.add_argument("--framework", choices=[f.value for f in Framework], default="l1-tcl")
    p.add_argument("--lambda-ps", type=float, help="fixed PS lambda (skips selection)")
    p.add_argument("--lambda-or", type=float, help="fixed OR lambda (skips selection)")
    p.add_argument("--clip", type=float, default=1e-6, help="propensity clip floor")
    p.add_argument("--standardize", action="store_true",
                   help="scale covariates by target standard deviations before fitting")
    _add_selection(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="l1tcl", description="Transfer-learned causal effect estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic DomainPair plus oracle sidecar")
    p.add_argument("kind", choices=("toy", "grid"))
    p.add_argument("--n-target", type=int)
    p.add_argument("--n-source", type=int)
    p.add_argument("--n-target-pool", type=int, help="toy only")
    p.add_argument("--intercept", action="store_true", help="toy only: append a constant column")
    p.add_argument("--d", type=int, default=10, help="grid only")
    p.add_argument("--s", type=int, default=3, help="grid only")
    p.add_argument("--coefficient-scale", type=float, default=0.5, help="grid only")
    p.add_argument("--n-validation", type=int, default=0, help="grid only")
    _add_common(p)

    p = sub.add_parser("fit-nuisance", help="fit PS and/or OR models under a framework")
    _add_data(p)
    p.add_argument("--model", choices=("ps", "or", "both"), default="ps")
    _add_fit(p)
    _add_common(p)

    p = sub.add_parser("estimate", help="estimate the target-domain ACE")
    _add_data(p)
    p.add_argument("--estimator", choices=("ipw", "or", "dr"), default="ipw")
    _add_fit(p)
    _add_common(p)

    p = sub.add_parser("bootstrap", help="percentile bootstrap of an ACE estimate")
    _add_data(p)
    p.add_argument("--estimator", choices=("ipw", "or", "dr"), default="ipw")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--ci", type=float, default=0.90, help="confidence level")
    p.add_argument("--resample-size", type=int, help="rows per resample (default: target n)")
    p.add_argument("--no-reselect", action="store_true",
                   help="choose lambda once on the full data instead of per trial")
    p.add_argument("--full-grid", action="store_true",
                   help="per-trial reselection over the full grid instead of the reduced one")
    p.add_argument("--jobs", type=int, help="worker processes (default: $L1TCL_JOBS or 1)")
    _add_fit(p)
    _add_common(p)

    p = sub.add_parser("select-lambda", help="score the lambda grid and report the choice")
    _add_data(p)
    p.add_argument("--model", choices=("ps", "or"), default="ps")
    _add_selection(p)
    _add_common(p)

    p = sub.add_parser("smd", help="IPW covariate balance of a fitted PS model")
    _add_data(p)
    p.add_argument("--framework", choices=[f.value for f in Framework], default="to-cl")
    p.add_argument("--lambda-ps", type=float)
    p.add_argument("--clip", type=float, default=1e-6)
    _add_selection(p)
    _add_common(p)

    p = sub.add_parser("grid-experiment", help="synthetic (d, s, n, n_s) comparison grid")
    p.add_argument("--full", action="store_true", help="the full 5x5x3x3 grid with 100 trials")
    p.add_argument("--d-values", type=int, nargs="+")
    p.add_argument("--s-values", type=int, nargs="+")
    p.add_argument("--n-values", type=int, nargs="+")
    p.add_argument("--ns-values", type=int, nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--coefficient-scale", type=float)
    p.add_argument("--validation-size", type=int)
    p.add_argument("--estimator", choices=("ipw", "or", "dr"), default="ipw")
    p.add_argument("--jobs", type=int)
    _add_common(p)

    p = sub.add_parser("part", help="partition one dataset on a binary covariate and transfer")
    p.add_argument("--data", required=True)
    p.add_argument("--treatment-col", default="z")
    p.add_argument("--outcome-col", default="y")
    p.add_argument("--partition-column", required=True, help="covariate name or 0-based index")
    p.add_argument("--target-label", type=float, required=True)
    p.add_argument("--drop-partition-column", action="store_true")
    p.add_argument("--estimator", choices=("ipw", "or", "dr"), default="ipw")
    _add_fit(p)
    _add_common(p)
    return parser


# ---------------------------------------------------------------- helpers

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in asdict(obj).items() if k != "validation"}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _emit(report: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(_dump(report))
        return
    flat = {}

    def walk(prefix, v):
        if isinstance(v, dict):
            for k, x in v.items():
                walk(f"{prefix}.{k}" if prefix else str(k), x)
        else:
            flat[prefix] = v
    walk("", _jsonable(report))
    width = max((len(k) for k in flat), default=0)
    for k, v in flat.items():
        sys.stdout.write(f"{k.ljust(width)}  {v}\n")


def _load_domains(args) -> DomainPair:
    return DomainPair(load_csv(args.target, args.treatment_col, args.outcome_col),
                      load_csv(args.source, args.treatment_col, args.outcome_col))


def _policy(args, seed) -> SelectionPolicy:
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    if args.grid_step <= 0 or args.grid_stop < args.grid_start:
        raise UsageError("lambda grid needs --grid-step > 0 and --grid-stop >= --grid-start")
    return SelectionPolicy(args.criterion, args.folds, not args.no_stratify,
                           LambdaGrid.log10(args.grid_start, args.grid_stop, args.grid_step),
                           seed=seed)


def _clip(args) -> PropensityClip:
    try:
        return PropensityClip(args.clip)
    except ValueError as exc:
        raise UsageError(f"--clip: {exc}") from None


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _strict(args, converged: bool) -> int:
    if not converged and args.strict:
        sys.stderr.write("error: solver did not converge (--strict)\n")
        return EXIT_NUMERICAL
    return EXIT_OK


def _fit_kwargs(args):
    return dict(lambda_ps=args.lambda_ps, lambda_or=args.lambda_or, standardize=args.standardize)


# ---------------------------------------------------------------- subcommands

def _cmd_simulate(args, seed, out):
    if out is None:
        raise UsageError("simulate requires --out")
    if args.kind == "toy":
        kw = {k: v for k, v in (("n_target", args.n_target), ("n_source", args.n_source),
                                ("n_target_pool", args.n_target_pool)) if v is not None}
        cfg = ToyConfig(seed=seed, intercept=args.intercept, **kw)
        domains, oracle = generate_toy(cfg)
    else:
        cfg = dict(d=args.d, s=args.s, n=args.n_target or 100, n_s=args.n_source or 2000,
                   coefficient_scale=args.coefficient_scale, seed=seed,
                   n_validation=args.n_validation)
        if not 0 <= args.s <= args.d:
            raise UsageError(f"--s must satisfy 0 <= s <= d={args.d}")
        domains, oracle = generate_grid_instance(**cfg)
    write_csv(domains.target, out / "target.csv")
    write_csv(domains.source, out / "source.csv")
    if oracle.validation is not None:
        write_csv(oracle.validation, out / "validation.csv")
    (out / "oracle.json").write_text(_dump(oracle.to_dict()), encoding="utf-8")
    report = {"kind": args.kind, "config": cfg, "true_tau": oracle.true_tau,
              "n_target": domains.target.n, "n_source": domains.source.n, "d": domains.d}
    return report, True, {"config": cfg}


def _nuisance_report(fits) -> dict:
    return {"lambda_ps": fits.lambda_ps, "lambda_or": fits.lambda_or,
            "converged": fits.converged,
            "ps_coefficients": None if fits.ps is None else fits.ps.coefficients,
            "or_coefficients": None if fits.or_fits is None else
            {"treated": fits.or_fits[0].coefficients, "control": fits.or_fits[1].coefficients}}


def _cmd_fit_nuisance(args, seed, out):
    domains = _load_domains(args)
    estimator = {"ps": "ipw", "or": "or", "both": "dr"}[args.model]
    fits = fit_nuisances(domains, args.framework, estimator, _policy(args, seed),
                         **_fit_kwargs(args))
    report = {"framework": args.framework, "model": args.model, "columns": domains.target.columns,
              **_nuisance_report(fits)}
    if out is not None:
        (out / "nuisance.json").write_text(_dump(report), encoding="utf-8")
        for name, rows in fits.score_tables.items():
            write_score_table(rows, out / f"scores_{name}.csv")
    return report, fits.converged, {}


def _theory_lambdas(domains) -> dict:
    """Advisory closed-form lambdas with data-estimated constants."""
    try:
        c = estimate_theory_constants(domains)
    except DataError as exc:
        return {"error": str(exc)}
    n, ns, d = domains.target.n, domains.source.n, domains.d
    return {"ps": theory_lambda_ps(n, ns, d, c), "or": theory_lambda_or(n, ns, d, c),
            "constants": c}


def _cmd_estimate(args, seed, out):
    domains = _load_domains(args)
    fits = fit_nuisances(domains, args.framework, args.estimator, _policy(args, seed),
                         **_fit_kwargs(args))
    est = plug_in(domains, fits, args.framework, args.estimator, _clip(args))
    report = {"framework": args.framework, **est.to_dict(), "n_target": domains.target.n,
              "n_source": domains.source.n, "theory_lambda": _theory_lambdas(domains)}
    if out is not None:
        (out / "estimate.json").write_text(_dump(report), encoding="utf-8")
    return report, est.converged, {}


def _cmd_bootstrap(args, seed, out):
    domains = _load_domains(args)
    try:
        bcfg = BootstrapConfig(args.trials, args.resample_size, not args.no_reselect, args.ci,
                               seed, args.full_grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    summary = bootstrap(domains, args.framework, args.estimator, _policy(args, seed), bcfg,
                        clip=_clip(args), lambda_ps=args.lambda_ps, lambda_or=args.lambda_or,
                        jobs=jobs)
    report = {"framework": args.framework, "estimator": args.estimator, **summary.to_dict()}
    if out is not None:
        (out / "bootstrap.json").write_text(_dump(report), encoding="utf-8")
        summary.write_trials_csv(out / "bootstrap_trials.csv")
    converged = report["nonconverged_trials"] == 0
    return report, converged, {"bootstrap": bcfg, "jobs": jobs}


def _cmd_select_lambda(args, seed, out):
    domains = _load_domains(args)
    lam, table = select_lambda(domains, args.model, _policy(args, seed))
    criterion = table[0].criterion
    means = {}
    for r in table:
        means.setdefault(r.lam, []).append(r.score)
    report = {"model": args.model, "criterion": criterion, "lambda": lam,
              "mean_scores": {repr(k): float(np.mean(v)) for k, v in means.items()}}
    if out is not None:
        write_score_table(table, out / "scores.csv")
        (out / "selection.json").write_text(_dump(report), encoding="utf-8")
    return report, True, {}


def _cmd_smd(args, seed, out):
    domains = _load_domains(args)
    fits = fit_nuisances(domains, args.framework, "ipw", _policy(args, seed),
                         lambda_ps=args.lambda_ps)
    clip = _clip(args)
    target = domains.target
    report = {"framework": args.framework, "lambda_ps": fits.lambda_ps,
              "smd_fitted": smd(target, fits.ps, clip),
              "smd_unweighted": smd(target, np.full(target.n, 0.5), clip),
              "converged": fits.converged}
    if out is not None:
        (out / "smd.json").write_text(_dump(report), encoding="utf-8")
    return report, fits.converged, {}


def _cmd_grid(args, seed, out):
    base = GridConfig() if args.full else GridConfig.reduced()
    kw = {"seed": seed}
    for flag, key, conv in (("d_values", "d_values", tuple), ("s_values", "s_values", tuple),
                            ("n_values", "n_values", tuple), ("ns_values", "ns_values", tuple),
                            ("trials", "trials", int),
                            ("coefficient_scale", "coefficient_scale", float),
                            ("validation_size", "validation_size", int)):
        v = getattr(args, flag)
        if v is not None:
            kw[key] = conv(v)
    cfg = replace(base, **kw)
    if cfg.trials < 1:
        raise UsageError("--trials must be >= 1")
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    res = run_grid(cfg, estimator=args.estimator, jobs=jobs)
    if out is not None:
        res.write_results_csv(out / "grid_results.csv")
        res.write_heatmap_csv(out / "heatmap.csv")
    report = {"cells": len(res.cells), "evaluated": len(res.evaluated()),
              "improvement_fraction": {b: res.improvement_fraction(b) for b in res.baselines}}
    return report, True, {"grid": cfg, "jobs": jobs}


def _cmd_part(args, seed, out):
    data = load_csv(args.data, args.treatment_col, args.outcome_col)
    col = args.partition_column
    col = int(col) if col.lstrip("-").isdigit() else col
    cfg = PartConfig(col, args.target_label, args.framework, args.estimator,
                     _policy(args, seed), clip=_clip(args),
                     drop_column=args.drop_partition_column)
    est = run_part(data, cfg)
    report = {"framework": args.framework, "partition_column": args.partition_column,
              "target_label": args.target_label, **est.to_dict()}
    if out is not None:
        (out / "estimate.json").write_text(_dump(report), encoding="utf-8")
    return report, est.converged, {}


_COMMANDS = {"simulate": _cmd_simulate, "fit-nuisance": _cmd_fit_nuisance,
             "estimate": _cmd_estimate, "bootstrap": _cmd_bootstrap,
             "select-lambda": _cmd_select_lambda, "smd": _cmd_smd,
             "grid-experiment": _cmd_grid, "part": _cmd_part}


def _replay_argv(argv: list[str], seed: int) -> list[str]:
    if "--seed" in argv or any(a.startswith("--seed=") for a in argv):
        return list(argv)
    return list(argv) + ["--seed", str(seed)]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("l1tcl: a subcommand is required")
        started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        seed = args.seed if args.seed is not None else secrets.randbelow(2 ** 31)
        out = _out_dir(args)
        inputs = {}
        for flag in ("target", "source", "data"):
            path = getattr(args, flag, None)
            if path is not None and Path(path).is_file():
                inputs[path] = _sha256(path)
        report, converged, configs = _COMMANDS[args.command](args, seed, out)
        report["seed"] = seed
        _emit(report, args.format)
        if out is not None:
            manifest = {"command": args.command, "argv": argv,
                        "replay_argv": _replay_argv(argv, seed),
                        "arguments": vars(args), "configs": configs, "seed": seed,
                        "version": __version__, "input_sha256": inputs,
                        "started": started,
                        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat()}
            (out / "manifest.json").write_text(_dump(manifest), encoding="utf-8")
        return _strict(args, converged)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except ValueError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
