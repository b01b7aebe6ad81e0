"""Hyperparameter selection and balance diagnostics.

Criteria for choosing the l1 strength on the target domain:

* ``auc``  treatment-prediction ROC AUC on held-out rows (higher is better)
* ``nll``  held-out mean negative log-likelihood for the PS model, or
           held-out arm-wise mean squared error for the OR model (lower is better)
* ``smd``  inverse-propensity-weighted covariate balance on the full target
           set (lower is better; PS model only)
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata
from sklearn.model_selection import KFold, StratifiedKFold

from .data import Dataset, DomainPair
from .errors import DataError, DegenerateDataError
from .estimators import PropensityClip, propensities
from .glm import GlmFit, LinkKind, SolverConfig, nll
from .transfer import rough_or, rough_ps, transfer_or_arm, transfer_ps

DEFAULT_LOG10_GRID = tuple(-2.5 + 0.25 * k for k in range(11))

CRITERIA = ("auc", "smd", "nll")
_HIGHER_IS_BETTER = {"auc": True, "smd": False, "nll": False}


@dataclass(frozen=True)
class LambdaGrid:
    values: tuple[float, ...] = tuple(10.0 ** p for p in DEFAULT_LOG10_GRID)

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        if not v:
            raise ValueError("lambda grid is empty")
        if any(not (x > 0 and math.isfinite(x)) for x in v):
            raise ValueError("lambda grid values must be positive and finite")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("lambda grid must be strictly increasing")
        object.__setattr__(self, "values", v)

    @classmethod
    def log10(cls, start: float, stop: float, step: float) -> "LambdaGrid":
        k = int(round((stop - start) / step))
        return cls(tuple(10.0 ** (start + step * i) for i in range(k + 1)))

    def reduced(self) -> "LambdaGrid":
        """Every other value, always keeping the largest."""
        v = self.values[::-1][::2][::-1]
        return LambdaGrid(v)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray

    def folds(self):
        for f in range(self.k):
            yield f, np.flatnonzero(self.assignments != f), np.flatnonzero(self.assignments == f)


def make_folds(treatment: np.ndarray, k: int = 5, seed: int = 0, stratified: bool = True) -> FoldPlan:
    """Deterministic (given ``seed``) k-fold assignment.

    Stratified plans guarantee at least one treated and one control row per
    fold, which needs ``k`` rows in each arm.
    """
    z = np.asarray(treatment)
    n = z.shape[0]
    if k < 2 or k > n:
        raise DegenerateDataError(f"cannot split {n} rows into {k} folds")
    assign = np.empty(n, dtype=np.int64)
    if stratified:
        n1 = int(z.sum())
        if min(n1, n - n1) < k:
            raise DegenerateDataError(
                f"stratified {k}-fold CV needs >= {k} rows per arm, got {n1} treated, {n - n1} control")
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed).split(np.zeros(n), z)
    else:
        splitter = KFold(n_splits=k, shuffle=True, random_state=seed).split(np.zeros(n))
    for f, (_, test) in enumerate(splitter):
        assign[test] = f
    return FoldPlan(k, assign)


@dataclass(frozen=True)
class SelectionPolicy:
    criterion: str = "auc"
    k: int = 5
    stratified: bool = True
    grid: LambdaGrid = field(default_factory=LambdaGrid)
    seed: int = 0
    validation: Dataset | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")


@dataclass(frozen=True)
class ScoreRow:
    lam: float
    fold: int  # -1: full target set / holdout validation
    criterion: str
    score: float


def auc(scores, labels) -> float:
    """ROC AUC in Mann-Whitney form, P(s+ > s-) + P(s+ = s-)/2, via average ranks."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    lab = np.asarray(labels).reshape(-1)
    if s.shape != lab.shape:
        raise ValueError("scores and labels differ in length")
    pos = lab == 1
    n1 = int(pos.sum())
    n0 = lab.shape[0] - n1
    if n1 == 0 or n0 == 0:
        raise DegenerateDataError("AUC needs both classes present")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def cohens_d(a, b) -> float:
    """Standardized mean difference with population (1/m) variances.

    Zero pooled variance: returns 0 when the means agree, otherwise a signed
    infinity (the "degenerate" case).
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("cohens_d needs two nonempty samples")
    diff = a.mean() - b.mean()
    pooled = math.sqrt((a.var() + b.var()) / 2.0)
    if pooled == 0.0:
        if diff == 0.0:
            return 0.0
        return math.copysign(math.inf, diff)
    return float(diff / pooled)


def smd(data: Dataset, ps, clip: PropensityClip | None = None) -> float:
    """Mean absolute Cohen's d between ``x/e`` over treated rows and ``x/(1-e)`` over controls.

    Returns ``inf`` when any column is degenerate.
    """
    data.require_both_arms("SMD data")
    e, _ = (clip or PropensityClip()).apply(propensities(data, ps))
    t = data.treatment == 1.0
    X = data.covariates
    trt = X[t] / e[t, None]
    ctl = X[~t] / (1.0 - e[~t, None])
    return float(np.mean([abs(cohens_d(trt[:, j], ctl[:, j])) for j in range(data.d)]))


def _ps_score(criterion: str, val: Dataset, fit: GlmFit) -> float:
    if criterion == "auc":
        return auc(val.covariates @ fit.coefficients, val.treatment)
    return nll(val, "treatment", fit)


def _or_score(val: Dataset, f1: GlmFit, f0: GlmFit) -> float:
    t = val.treatment == 1.0
    pred = np.where(t, val.covariates @ f1.coefficients, val.covariates @ f0.coefficients)
    return float(np.mean((val.outcome - pred) ** 2))


def select_lambda(domains: DomainPair, model: str, policy: SelectionPolicy | None = None,
                  config: SolverConfig | None = None, *, source_fit=None,
                  rough_config: SolverConfig | None = None, clip: PropensityClip | None = None
                  ) -> tuple[float, list[ScoreRow]]:
    """Pick the l1 strength for the ``"ps"`` or ``"or"`` transfer step.

    The source fit is computed once (or passed in) and held fixed.  Held-out
    scoring uses stratified k-fold CV on the target unless the policy carries a
    separate ``validation`` set.  Ties go to the larger lambda.  The OR model
    always scores by held-out squared error.
    """
    policy = policy or SelectionPolicy()
    config = config or SolverConfig()
    target = domains.target
    if model == "ps":
        criterion = policy.criterion
        if source_fit is None:
            source_fit, _ = rough_ps(domains.source, rough_config)
    elif model == "or":
        criterion = "nll"
        if source_fit is None:
            (f1, _), (f0, _) = rough_or(domains.source, rough_config)
            source_fit = (f1, f0)
    else:
        raise ValueError(f"model must be 'ps' or 'or', got {model!r}")

    if model == "ps" and criterion == "smd":
        splits = [(-1, target, target)]
    elif policy.validation is not None:
        splits = [(-1, target, policy.validation)]
    else:
        plan = make_folds(target.treatment, policy.k, policy.seed, policy.stratified)
        splits = [(f, target.subset(tr), target.subset(va)) for f, tr, va in plan.folds()]

    table: list[ScoreRow] = []
    means: list[float] = []
    reasons: list[str] = []
    for lam in policy.grid.values:
        scores = []
        for f, train, val in splits:
            try:
                if model == "ps":
                    tf = transfer_ps(DomainPair(train, domains.source), lam, config,
                                     source_fit=source_fit)
                    if criterion == "smd":
                        s = smd(val, tf.target_fit, clip)
                    else:
                        s = _ps_score(criterion, val, tf.target_fit)
                else:
                    f1 = transfer_or_arm(train.arm(1), source_fit[0], lam, config).target_fit
                    f0 = transfer_or_arm(train.arm(0), source_fit[1], lam, config).target_fit
                    s = _or_score(val, f1, f0)
            except (DataError, ValueError) as exc:
                reasons.append(f"lambda={lam:g} fold={f}: {exc}")
                s = math.nan
            table.append(ScoreRow(lam, f, criterion, s))
            scores.append(s)
        arr = np.asarray(scores)
        means.append(float(arr.mean()) if np.all(np.isfinite(arr)) else math.nan)

    best, best_lam = None, None
    higher = _HIGHER_IS_BETTER[criterion]
    for lam, m in zip(policy.grid.values, means):
        if not math.isfinite(m):
            continue
        if best is None or (m >= best if higher else m <= best):
            best, best_lam = m, lam
    if best_lam is None:
        detail = "; ".join(reasons) or ", ".join(f"{lam:g}: {m}" for lam, m in
                                                  zip(policy.grid.values, means))
        raise DegenerateDataError(f"every lambda produced a degenerate {criterion} score ({detail})")
    return best_lam, table


def write_score_table(rows: list[ScoreRow], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "fold", "criterion", "score"])
        for r in rows:
            w.writerow([repr(r.lam), r.fold, r.criterion, repr(r.score)])
