"""Percentile bootstrap for any framework/estimator pair.

Only target rows are resampled; the source domain and its rough fits stay
fixed and are computed once.  Trial ``t`` draws its resample from
``default_rng([master_seed, t])``, so results do not depend on execution
order or on the number of worker processes.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import DomainPair
from .errors import DataError, NumericalError
from .estimators import Estimator, PropensityClip
from .frameworks import Framework, SourceFits, fit_nuisances, plug_in
from .glm import SolverConfig
from .selection import SelectionPolicy

JOBS_ENV = "L1TCL_JOBS"


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "").strip()
    if not raw:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise ValueError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise ValueError(f"{JOBS_ENV} must be >= 1")
    return jobs


class BootstrapFailure(DataError):
    """More than half of the trials failed."""

    def __init__(self, message: str, reasons: dict[int, str]):
        super().__init__(message)
        self.reasons = reasons


@dataclass(frozen=True)
class BootstrapConfig:
    trials: int = 200
    resample_size: int | None = None  # None: the target sample size
    reselect_lambda: bool = True
    ci_level: float = 0.90
    master_seed: int = 0
    full_grid: bool = False

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError("bootstrap needs at least 2 trials")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")
        if self.resample_size is not None and self.resample_size < 2:
            raise ValueError("resample_size must be >= 2")


@dataclass(frozen=True)
class TrialResult:
    trial: int
    estimate: float | None
    lambda_ps: float | None = None
    lambda_or: float | None = None
    converged: bool = True
    n_clipped: int = 0
    failure: str | None = None


@dataclass(frozen=True)
class BootstrapSummary:
    estimates: tuple[float | None, ...]  # one slot per trial, None where the trial failed
    mean: float
    median: float
    ci_low: float
    ci_high: float
    failure_count: int
    ci_level: float
    failures: dict[int, str] = field(default_factory=dict)
    trials: tuple[TrialResult, ...] = field(default=(), repr=False)

    @property
    def successful(self) -> np.ndarray:
        return np.array([v for v in self.estimates if v is not None], dtype=np.float64)

    def to_dict(self) -> dict:
        return {"trials": len(self.estimates), "successful": len(self.estimates) - self.failure_count,
                "failure_count": self.failure_count, "ci_level": self.ci_level,
                "mean": self.mean, "median": self.median,
                "ci_low": self.ci_low, "ci_high": self.ci_high,
                "nonconverged_trials": sum(1 for r in self.trials
                                           if r.estimate is not None and not r.converged),
                "failures": {str(k): v for k, v in sorted(self.failures.items())}}

    def write_trials_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "estimate", "lambda_ps", "lambda_or", "converged", "n_clipped",
                        "failure"])
            for r in self.trials:
                w.writerow([r.trial, "" if r.estimate is None else repr(r.estimate),
                            "" if r.lambda_ps is None else repr(r.lambda_ps),
                            "" if r.lambda_or is None else repr(r.lambda_or),
                            int(r.converged), r.n_clipped, r.failure or ""])


def quantile(sorted_values, q: float) -> float:
    """Linear interpolation between order statistics at zero-indexed position ``q*(n-1)``."""
    v = np.asarray(sorted_values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("quantile of an empty sequence")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if np.any(np.diff(v) < 0):
        raise ValueError("values must be sorted ascending")
    return float(np.quantile(v, q, method="linear"))


def summarize(results, ci_level: float) -> BootstrapSummary:
    results = sorted(results, key=lambda r: r.trial)
    failures = {r.trial: r.failure for r in results if r.estimate is None}
    if 2 * len(failures) > len(results):
        detail = "; ".join(f"trial {k}: {v}" for k, v in failures.items())
        raise BootstrapFailure(f"{len(failures)} of {len(results)} bootstrap trials failed ({detail})",
                               failures)
    ok = np.sort(np.array([r.estimate for r in results if r.estimate is not None]))
    alpha = (1.0 - ci_level) / 2.0
    return BootstrapSummary(
        estimates=tuple(r.estimate for r in results), mean=float(ok.mean()),
        median=quantile(ok, 0.5), ci_low=quantile(ok, alpha), ci_high=quantile(ok, 1.0 - alpha),
        failure_count=len(failures), ci_level=ci_level, failures=failures, trials=tuple(results))


@dataclass(frozen=True)
class _Job:
    domains: DomainPair
    framework: Framework
    estimator: Estimator
    policy: SelectionPolicy
    config: SolverConfig | None
    rough_config: SolverConfig | None
    clip: PropensityClip | None
    bcfg: BootstrapConfig
    source_fits: SourceFits | None
    lambda_ps: float | None
    lambda_or: float | None


def _run_trial(job: _Job, t: int) -> TrialResult:
    rng = np.random.default_rng([job.bcfg.master_seed, t])
    target = job.domains.target
    m = job.bcfg.resample_size or target.n
    rows = rng.integers(0, target.n, size=m)
    fold_seed = int(rng.integers(0, 2 ** 31 - 1))
    doms = DomainPair(target.subset(rows), job.domains.source)
    try:
        kw = {}
        if job.framework is Framework.L1_TCL:
            kw = dict(source_fits=job.source_fits, lambda_ps=job.lambda_ps, lambda_or=job.lambda_or)
        fits = fit_nuisances(doms, job.framework, job.estimator,
                             replace(job.policy, seed=fold_seed), job.config,
                             rough_config=job.rough_config, **kw)
        est = plug_in(doms, fits, job.framework, job.estimator, job.clip)
    except (DataError, ValueError, NumericalError) as exc:
        return TrialResult(t, None, failure=f"{type(exc).__name__}: {exc}")
    if not math.isfinite(est.value):
        return TrialResult(t, None, failure="non-finite estimate")
    return TrialResult(t, est.value, est.lambda_ps, est.lambda_or, est.converged, est.n_clipped)


def _run_chunk(job: _Job, trials) -> list[TrialResult]:
    return [_run_trial(job, t) for t in trials]


def bootstrap(domains: DomainPair, framework, estimator, policy: SelectionPolicy | None = None,
              bcfg: BootstrapConfig | None = None, *, config: SolverConfig | None = None,
              rough_config: SolverConfig | None = None, clip: PropensityClip | None = None,
              lambda_ps: float | None = None, lambda_or: float | None = None,
              jobs: int | None = None) -> BootstrapSummary:
    """Resample target rows, refit, re-estimate; summarize with percentile CIs.

    For ``l1-tcl`` with ``reselect_lambda`` each trial re-runs selection on the
    reduced grid (every other value of ``policy.grid``) unless ``full_grid``
    is set.  Without reselection, lambdas are chosen once on the original data
    (or taken from ``lambda_ps`` / ``lambda_or``) and reused in every trial.
    """
    bcfg = bcfg or BootstrapConfig()
    policy = policy or SelectionPolicy()
    fw, est = Framework(framework), Estimator(estimator)
    if domains.target.n < 2:
        raise DataError("bootstrap needs at least 2 target rows")
    source_fits = None
    if fw is Framework.L1_TCL:
        source_fits = SourceFits.compute(domains, est, rough_config)
        if bcfg.reselect_lambda:
            if not bcfg.full_grid:
                policy = replace(policy, grid=policy.grid.reduced())
        elif (est is not Estimator.OR and lambda_ps is None) or \
                (est is not Estimator.IPW and lambda_or is None):
            full = fit_nuisances(domains, fw, est, policy, config, source_fits=source_fits,
                                 rough_config=rough_config, lambda_ps=lambda_ps,
                                 lambda_or=lambda_or)
            lambda_ps, lambda_or = full.lambda_ps, full.lambda_or
    job = _Job(domains, fw, est, policy, config, rough_config, clip, bcfg, source_fits,
               lambda_ps, lambda_or)
    jobs = default_jobs() if jobs is None else jobs
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    indices = list(range(bcfg.trials))
    if jobs == 1:
        results = _run_chunk(job, indices)
    else:
        chunks = [indices[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = [r for part in pool.map(_run_chunk, [job] * len(chunks), chunks)
                       for r in part]
    return summarize(results, bcfg.ci_level)
