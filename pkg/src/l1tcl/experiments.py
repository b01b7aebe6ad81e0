"""Reproduction harness: toy comparison, synthetic (d, s) grid, and partition-then-transfer CATE."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, split_by_covariate
from .errors import DataError, NumericalError
from .estimators import AceEstimate, Estimator, PropensityClip
from .frameworks import Framework, run_framework
from .glm import SolverConfig
from .selection import SelectionPolicy
from .synthetic import GridConfig, ToyConfig, generate_grid_instance, generate_toy

FRAMEWORKS = (Framework.TO_CL, Framework.MERGE_CL, Framework.L1_TCL)


# ---------------------------------------------------------------- toy example

@dataclass(frozen=True)
class ToyRow:
    seed: int
    framework: str
    estimate: float
    abs_error: float


@dataclass(frozen=True)
class ToyComparison:
    truth: float
    rows: tuple[ToyRow, ...]
    estimator: str = "ipw"

    def estimates(self, framework) -> np.ndarray:
        fw = Framework(framework).value
        return np.array([r.estimate for r in self.rows if r.framework == fw])

    def errors(self, framework) -> np.ndarray:
        fw = Framework(framework).value
        return np.array([r.abs_error for r in self.rows if r.framework == fw])

    @property
    def seeds(self) -> list[int]:
        return sorted({r.seed for r in self.rows})

    def l1_best_fraction(self) -> float:
        """Share of seeds where l1-TCL's |error| is no larger than both baselines'."""
        errs = np.column_stack([self.errors(fw) for fw in FRAMEWORKS])
        return float(np.mean(errs[:, 2] <= errs[:, :2].min(axis=1)))

    def l1_negative_fraction(self) -> float:
        return float(np.mean(self.estimates(Framework.L1_TCL) < 0))

    def summary(self) -> dict:
        out = {"truth": self.truth, "estimator": self.estimator, "seeds": len(self.seeds),
               "l1_best_fraction": self.l1_best_fraction(),
               "l1_negative_fraction": self.l1_negative_fraction()}
        for fw in FRAMEWORKS:
            out[fw.value] = {"mean_estimate": float(self.estimates(fw).mean()),
                             "mean_abs_error": float(self.errors(fw).mean())}
        return out

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "framework", "estimate", "truth", "abs_error"])
            for r in self.rows:
                w.writerow([r.seed, r.framework, repr(r.estimate), repr(self.truth),
                            repr(r.abs_error)])


def run_toy_comparison(cfg: ToyConfig, seeds, estimator="ipw",
                       policy: SelectionPolicy | None = None,
                       config: SolverConfig | None = None) -> ToyComparison:
    """Estimate the toy ACE under all three frameworks, one toy draw per seed.

    ``cfg.seed`` is replaced by each entry of ``seeds``.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    rows = []
    for seed in seeds:
        domains, oracle = generate_toy(replace(cfg, seed=seed))
        for fw in FRAMEWORKS:
            v = run_framework(domains, fw, estimator, policy, config).value
            rows.append(ToyRow(seed, fw.value, v, abs(v - oracle.true_tau)))
    return ToyComparison(cfg.tau, tuple(rows), Estimator(estimator).value)


# ---------------------------------------------------------------- synthetic grid

@dataclass(frozen=True)
class GridCellResult:
    d: int
    s: int
    n: int
    n_s: int
    mean_abs_err: dict[str, float]
    err_difference: dict[str, float]  # baseline -> baseline error minus l1-TCL error
    trials_run: int
    failures: int = 0
    skipped: str | None = None

    def __post_init__(self):
        l1 = self.mean_abs_err.get(Framework.L1_TCL.value)
        for b, diff in self.err_difference.items():
            if diff != self.mean_abs_err[b] - l1:
                raise ValueError("err_difference must equal baseline error minus l1-TCL error")


@dataclass(frozen=True)
class GridResults:
    config: GridConfig
    baselines: tuple[str, ...]
    cells: tuple[GridCellResult, ...]

    def evaluated(self) -> list[GridCellResult]:
        return [c for c in self.cells if c.skipped is None]

    def improvement_fraction(self, baseline) -> float:
        """Share of evaluated cells where l1-TCL's mean |error| is <= the baseline's."""
        b = Framework(baseline).value
        cells = self.evaluated()
        if not cells:
            return math.nan
        return float(np.mean([c.err_difference[b] >= 0 for c in cells]))

    def write_results_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["d", "s", "n", "n_s", "framework", "mean_abs_err", "trials_run",
                        "failures", "status"])
            for c in self.cells:
                for fw in (Framework.L1_TCL.value,) + self.baselines:
                    err = c.mean_abs_err.get(fw)
                    w.writerow([c.d, c.s, c.n, c.n_s, fw, "" if err is None else repr(err),
                                c.trials_run, c.failures, c.skipped or "ok"])

    def write_heatmap_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["d", "s", "n", "n_s", "baseline", "err_difference",
                        "err_difference_truncated", "trials_run", "status"])
            for c in self.cells:
                for b in self.baselines:
                    diff = c.err_difference.get(b)
                    w.writerow([c.d, c.s, c.n, c.n_s, b, "" if diff is None else repr(diff),
                                "" if diff is None else repr(max(diff, 0.0)),
                                c.trials_run, c.skipped or "ok"])


def _grid_trial(args):
    d, s, n, ns, t, cfg, frameworks, estimator = args
    domains, oracle = generate_grid_instance(
        d, s, n, ns, cfg.coefficient_scale, seed=[cfg.seed, d, s, n, ns, t],
        n_validation=cfg.validation_size)
    policy = SelectionPolicy("auc", validation=oracle.validation)
    errs = {}
    try:
        for fw in frameworks:
            v = run_framework(domains, fw, estimator, policy).value
            if not math.isfinite(v):
                return (d, s, n, ns, t), None
            errs[fw] = abs(v - oracle.true_tau)
    except (DataError, ValueError, NumericalError):
        return (d, s, n, ns, t), None
    return (d, s, n, ns, t), errs


def run_grid(cfg: GridConfig, baselines=("to-cl", "merge-cl"), estimator="ipw",
             jobs: int = 1) -> GridResults:
    """Full factorial sweep; every trial fits l1-TCL and each baseline on the same draw.

    The l1 strength is chosen by treatment-prediction AUC on an extra
    ``cfg.validation_size`` target rows.  A trial where any framework fails is
    dropped for all of them so the comparison stays paired.  Cells with
    ``s > d`` are kept in the output and marked as skipped.
    """
    baselines = tuple(Framework(b).value for b in baselines)
    if Framework.L1_TCL.value in baselines:
        raise ValueError("l1-tcl is always evaluated; list only baselines")
    frameworks = (Framework.L1_TCL.value,) + baselines
    tasks, cells = [], list(cfg.cells())
    for d, s, n, ns in cells:
        if s <= d:
            tasks.extend((d, s, n, ns, t, cfg, frameworks, estimator) for t in range(cfg.trials))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_grid_trial, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        out = [_grid_trial(a) for a in tasks]
    by_cell: dict[tuple, list] = {}
    for (d, s, n, ns, t), errs in sorted(out, key=lambda x: x[0]):
        by_cell.setdefault((d, s, n, ns), []).append(errs)

    results = []
    for d, s, n, ns in cells:
        if s > d:
            results.append(GridCellResult(d, s, n, ns, {}, {}, 0, 0, skipped=f"s={s} > d={d}"))
            continue
        trials = by_cell[(d, s, n, ns)]
        ok = [e for e in trials if e is not None]
        if not ok:
            results.append(GridCellResult(d, s, n, ns, {}, {}, 0, len(trials),
                                          skipped="all trials failed"))
            continue
        mae = {fw: float(np.mean([e[fw] for e in ok])) for fw in frameworks}
        l1 = mae[Framework.L1_TCL.value]
        diff = {b: mae[b] - l1 for b in baselines}
        results.append(GridCellResult(d, s, n, ns, mae, diff, len(ok), len(trials) - len(ok)))
    return GridResults(cfg, baselines, tuple(results))


# ---------------------------------------------------------------- partition-then-transfer

@dataclass(frozen=True)
class PartConfig:
    partition_column: int | str
    target_label: float
    framework: str = "l1-tcl"
    estimator: str = "ipw"
    policy: SelectionPolicy = field(default_factory=SelectionPolicy)
    config: SolverConfig | None = None
    clip: PropensityClip | None = None
    # kept by default; it is constant inside each half
    drop_column: bool = False

    def column_index(self, data: Dataset) -> int:
        if isinstance(self.partition_column, str):
            if self.partition_column not in data.columns:
                raise DataError(f"partition column {self.partition_column!r} not found")
            return data.columns.index(self.partition_column)
        return int(self.partition_column)


def run_part(data: Dataset, cfg: PartConfig) -> AceEstimate:
    """Estimate the subgroup ACE for rows whose partition column equals ``target_label``.

    The complementary rows act as the source domain.
    """
    domains = split_by_covariate(data, cfg.column_index(data), cfg.target_label, cfg.drop_column)
    return run_framework(domains, cfg.framework, cfg.estimator, cfg.policy, cfg.config, cfg.clip)
