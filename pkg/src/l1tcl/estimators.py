"""Plug-in average-causal-effect estimators: IPW, OR and DR.

All three evaluate on the rows of the dataset they are given; frameworks
(see :mod:`l1tcl.frameworks`) decide which nuisance fits to plug in.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DegenerateDataError
from .glm import GlmFit


class Estimator(str, enum.Enum):
    IPW = "ipw"
    OR = "or"
    DR = "dr"


# provenance tags for nuisance fits
TARGET_ONLY, MERGED, TRANSFER, ORACLE, NONE = "target-only", "merged", "transfer", "oracle", "none"
PROVENANCE_TAGS = (TARGET_ONLY, MERGED, TRANSFER, ORACLE, NONE)


@dataclass(frozen=True)
class PropensityClip:
    floor: float = 1e-6

    def __post_init__(self):
        if not 0 <= self.floor < 0.5:
            raise ValueError("clip floor must lie in [0, 0.5)")

    def apply(self, e: np.ndarray) -> tuple[np.ndarray, int]:
        e = np.asarray(e, dtype=np.float64)
        lo, hi = self.floor, 1.0 - self.floor
        n_clipped = int(np.count_nonzero((e < lo) | (e > hi)))
        return np.clip(e, lo, hi), n_clipped


@dataclass(frozen=True)
class AceEstimate:
    value: float
    estimator: Estimator
    ps_source: str
    or_source: str
    n_clipped: int = 0
    lambda_ps: float | None = None
    lambda_or: float | None = None
    converged: bool = True
    details: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        est = Estimator(self.estimator)
        object.__setattr__(self, "estimator", est)
        for tag in (self.ps_source, self.or_source):
            if tag not in PROVENANCE_TAGS:
                raise ValueError(f"unknown provenance tag {tag!r}")
        if est is Estimator.IPW and self.or_source != NONE:
            raise ValueError("an IPW estimate cannot carry an OR provenance")
        if est is Estimator.OR and self.ps_source != NONE:
            raise ValueError("an OR estimate cannot carry a PS provenance")

    def to_dict(self) -> dict:
        return {"estimate": self.value, "estimator": self.estimator.value,
                "ps_source": self.ps_source, "or_source": self.or_source,
                "n_clipped": self.n_clipped, "lambda_ps": self.lambda_ps,
                "lambda_or": self.lambda_or, "converged": self.converged}


def propensities(data: Dataset, ps) -> np.ndarray:
    """Unclipped propensity scores from a fitted PS model or a precomputed array."""
    if isinstance(ps, GlmFit):
        if ps.d != data.d:
            raise ValueError(f"PS dimension {ps.d} != data dimension {data.d}")
        return ps.predict(data.covariates)
    e = np.asarray(ps, dtype=np.float64).reshape(-1)
    if e.shape[0] != data.n:
        raise ValueError(f"{e.shape[0]} propensities for {data.n} rows")
    return e


def potential_outcomes(data: Dataset, or_fits) -> tuple[np.ndarray, np.ndarray]:
    """Fitted ``(m1, m0)`` per row.

    ``or_fits`` may be an ``OrPairFit``, a ``(treated, control)`` pair of
    ``GlmFit`` or coefficient vectors, or a pair of per-row prediction arrays.
    """
    if hasattr(or_fits, "treated") and hasattr(or_fits, "control"):
        or_fits = (or_fits.treated.target_fit, or_fits.control.target_fit)
    out = []
    for f in or_fits:
        if isinstance(f, GlmFit):
            f = f.coefficients
        f = np.asarray(f, dtype=np.float64).reshape(-1)
        if f.shape[0] == data.d:
            out.append(data.covariates @ f)
        elif f.shape[0] == data.n:
            out.append(f)
        else:
            raise ValueError(f"OR input of length {f.shape[0]} fits neither d={data.d} nor n={data.n}")
    return out[0], out[1]


def estimate_ipw(data: Dataset, ps, clip: PropensityClip | None = None,
                 ps_source: str = TRANSFER) -> AceEstimate:
    """Horvitz-Thompson IPW: mean of ``z*y/e - (1-z)*y/(1-e)`` over rows."""
    e, n_clipped = (clip or PropensityClip()).apply(propensities(data, ps))
    z, y = data.treatment, data.outcome
    value = float(np.mean(z * y / e - (1.0 - z) * y / (1.0 - e)))
    return AceEstimate(value, Estimator.IPW, ps_source, NONE, n_clipped)


def estimate_or(data: Dataset, or_fits, or_source: str = TRANSFER) -> AceEstimate:
    """Difference of arm-wise means of fitted potential outcomes, each over its own arm."""
    c = data.counts
    if c.n_treated == 0 or c.n_control == 0:
        raise DegenerateDataError("OR estimator needs both arms nonempty")
    m1, m0 = potential_outcomes(data, or_fits)
    t = data.treatment == 1.0
    value = float(np.mean(m1[t]) - np.mean(m0[~t]))
    return AceEstimate(value, Estimator.OR, NONE, or_source)


def estimate_dr(data: Dataset, ps, or_fits, clip: PropensityClip | None = None,
                ps_source: str = TRANSFER, or_source: str = TRANSFER) -> AceEstimate:
    """Augmented IPW.

    Per row: ``(z*y - m1*(z - e))/e - ((1-z)*y + m0*(z - e))/(1 - e)``.  With
    ``m1 = m0 = 0`` every term matches :func:`estimate_ipw` exactly.
    """
    e, n_clipped = (clip or PropensityClip()).apply(propensities(data, ps))
    m1, m0 = potential_outcomes(data, or_fits)
    z, y = data.treatment, data.outcome
    r = z - e
    value = float(np.mean((z * y - m1 * r) / e - ((1.0 - z) * y + m0 * r) / (1.0 - e)))
    return AceEstimate(value, Estimator.DR, ps_source, or_source, n_clipped)
