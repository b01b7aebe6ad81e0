"""Two-step nuisance transfer: rough source fit, then l1 bias correction on the target.

For the propensity-score (PS) model the source fit is plain logistic
regression on source treatments; the correction solves

    min_delta  nll_target(beta_s + delta) + lam * ||delta||_1

and the target fit is ``beta_s + delta``.  The outcome-regression (OR) model
repeats the same two steps per treatment arm with least squares.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset, DomainPair, column_scales
from .errors import DegenerateDataError
from .glm import (GlmFit, LinkKind, SolveTrace, SolverConfig, fit_l1_deviation, fit_mle,
                  proximal_gradient)


@dataclass(frozen=True)
class TransferFit:
    source_fit: GlmFit
    delta: np.ndarray
    target_fit: GlmFit
    lam: float
    trace: SolveTrace

    @classmethod
    def assemble(cls, source_fit: GlmFit, delta: np.ndarray, lam: float, trace: SolveTrace):
        delta = np.asarray(delta, dtype=np.float64)
        return cls(source_fit, delta, GlmFit(source_fit.link, source_fit.coefficients + delta),
                   float(lam), trace)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.delta)


@dataclass(frozen=True)
class OrPairFit:
    treated: TransferFit
    control: TransferFit

    def arm(self, z: int) -> TransferFit:
        return self.treated if z == 1 else self.control


@dataclass(frozen=True)
class TheoryConstants:
    M_X: float
    sigma: float = 1.0
    sigma_s: float = 1.0
    r: float = 0.5

    def __post_init__(self):
        if not (self.M_X > 0 and self.sigma > 0 and self.sigma_s > 0):
            raise ValueError("M_X, sigma and sigma_s must be positive")
        if not 0 < self.r < 1:
            raise ValueError("r must lie in (0, 1)")


def _require_arms(domains: DomainPair) -> None:
    domains.target.require_both_arms("target domain")
    domains.source.require_both_arms("source domain")


def rough_ps(source: Dataset, config: SolverConfig | None = None) -> tuple[GlmFit, SolveTrace]:
    return fit_mle(source, "treatment", LinkKind.SIGMOID, config)


def rough_or(source: Dataset, config: SolverConfig | None = None):
    fits = []
    for z in (1, 0):
        arm = source.arm(z)
        if arm.n == 0:
            raise DegenerateDataError(f"source domain arm z={z} is empty")
        fits.append(fit_mle(arm, "outcome", LinkKind.IDENTITY, config))
    return fits


def scale_domains(domains: DomainPair) -> tuple[DomainPair, np.ndarray]:
    """Divide every covariate column of both domains by its target-domain standard deviation."""
    s = column_scales(domains.target)
    return DomainPair(domains.target.with_covariates(domains.target.covariates / s),
                      domains.source.with_covariates(domains.source.covariates / s)), s


def _unscale(tf: TransferFit, s: np.ndarray) -> TransferFit:
    src = GlmFit(tf.source_fit.link, tf.source_fit.coefficients / s)
    return TransferFit.assemble(src, tf.delta / s, tf.lam, tf.trace)


def transfer_ps(domains: DomainPair, lam: float, config: SolverConfig | None = None, *,
                source_fit: GlmFit | None = None, rough_config: SolverConfig | None = None,
                standardize: bool = False) -> TransferFit:
    """Sigmoid-link PS transfer.  ``source_fit`` skips the rough step when already known."""
    _require_arms(domains)
    config = (config or SolverConfig()).with_lambda(lam)
    if standardize:
        scaled, s = scale_domains(domains)
        if source_fit is not None:
            source_fit = GlmFit(source_fit.link, source_fit.coefficients * s)
        return _unscale(transfer_ps(scaled, lam, config, source_fit=source_fit,
                                    rough_config=rough_config), s)
    if source_fit is None:
        source_fit, _ = rough_ps(domains.source, rough_config)
    delta, trace = fit_l1_deviation(domains.target, "treatment", LinkKind.SIGMOID, source_fit, config)
    return TransferFit.assemble(source_fit, delta, lam, trace)


def transfer_or_arm(target_arm: Dataset, source_fit: GlmFit, lam: float,
                    config: SolverConfig | None = None) -> TransferFit:
    """Least-squares bias correction for one arm.

    ``lam`` is on the scale of the squared-error loss ``(1/n_z) sum (y - x'a)^2``;
    the solver works with half that loss, so it receives ``lam / 2``.
    """
    config = (config or SolverConfig()).with_lambda(lam / 2.0)
    delta, trace = fit_l1_deviation(target_arm, "outcome", LinkKind.IDENTITY, source_fit, config)
    return TransferFit.assemble(source_fit, delta, lam, trace)


def transfer_or(domains: DomainPair, lam: float, config: SolverConfig | None = None, *,
                source_fits: tuple[GlmFit, GlmFit] | None = None,
                rough_config: SolverConfig | None = None, standardize: bool = False) -> OrPairFit:
    """Arm-wise OR transfer; ``source_fits`` is ``(treated, control)`` when precomputed."""
    for label, dom in (("target", domains.target), ("source", domains.source)):
        c = dom.counts
        for z, nz in ((1, c.n_treated), (0, c.n_control)):
            if nz == 0:
                raise DegenerateDataError(f"{label} domain arm z={z} is empty")
    if standardize:
        scaled, s = scale_domains(domains)
        if source_fits is not None:
            source_fits = tuple(GlmFit(f.link, f.coefficients * s) for f in source_fits)
        pair = transfer_or(scaled, lam, config, source_fits=source_fits, rough_config=rough_config)
        return OrPairFit(_unscale(pair.treated, s), _unscale(pair.control, s))
    if source_fits is None:
        (f1, _), (f0, _) = rough_or(domains.source, rough_config)
    else:
        f1, f0 = source_fits
    return OrPairFit(treated=transfer_or_arm(domains.target.arm(1), f1, lam, config),
                     control=transfer_or_arm(domains.target.arm(0), f0, lam, config))


def generic_transfer(loss: Callable[[np.ndarray], tuple[float, np.ndarray]],
                     source_params: np.ndarray, lam: float, config: SolverConfig | None = None,
                     link: LinkKind = LinkKind.IDENTITY) -> TransferFit:
    """Bias-correct ``source_params`` against an arbitrary smooth target loss.

    ``loss(theta)`` returns the target-domain loss and its gradient.  The
    ``link`` only labels the returned fits.
    """
    config = (config or SolverConfig()).with_lambda(lam)
    src = GlmFit(link, source_params)
    delta, trace = proximal_gradient(loss, src.coefficients, config)
    return TransferFit.assemble(src, delta, lam, trace)


def theory_lambda_ps(n: int, n_s: int, d: int, constants: TheoryConstants) -> float:
    if min(n, n_s, d) < 1:
        raise ValueError("n, n_s and d must be >= 1")
    M = constants.M_X
    return math.sqrt(5.0 * M * M * math.log(6.0 * n * d) / (2.0 * n)
                     * max(25.0, n * d * d / n_s))


def theory_lambda_or(n: int, n_s: int, d: int, constants: TheoryConstants) -> float:
    if min(n, n_s, d) < 1:
        raise ValueError("n, n_s and d must be >= 1")
    c = constants
    return math.sqrt(2.0 * c.M_X ** 2 * math.log(12.0 * n * d)
                     * max(100.0 * c.sigma ** 2 / (c.r * n),
                           d * d * c.sigma_s ** 2 / (c.r * n_s)))


def estimate_theory_constants(domains: DomainPair,
                              or_fits: tuple[GlmFit, GlmFit, GlmFit, GlmFit] | None = None
                              ) -> TheoryConstants:
    """Data-driven stand-ins for the theory constants (heuristics, override as needed).

    ``M_X`` is the largest absolute covariate over both domains.  ``sigma`` and
    ``sigma_s`` are residual standard deviations of arm-wise least-squares fits
    in the target and source.  ``r`` is the smallest arm fraction over domains.
    ``or_fits`` is ``(target treated, target control, source treated, source control)``.
    """
    t, s = domains.target, domains.source
    M = float(max(np.abs(t.covariates).max(), np.abs(s.covariates).max()))
    r = min(min(t.counts.n_treated, t.counts.n_control) / t.n,
            min(s.counts.n_treated, s.counts.n_control) / s.n)
    if r <= 0:
        raise DegenerateDataError("an arm is empty; cannot estimate the balance floor r")

    def resid_sd(dom: Dataset, f1: GlmFit | None, f0: GlmFit | None) -> float:
        res = []
        for z, f in ((1, f1), (0, f0)):
            arm = dom.arm(z)
            if f is None:
                f, _ = fit_mle(arm, "outcome", LinkKind.IDENTITY)
            res.append(arm.outcome - arm.covariates @ f.coefficients)
        sd = float(np.std(np.concatenate(res)))
        return sd if sd > 0 else 1e-12

    fits = or_fits or (None, None, None, None)
    return TheoryConstants(M_X=M if M > 0 else 1.0, sigma=resid_sd(t, fits[0], fits[1]),
                           sigma_s=resid_sd(s, fits[2], fits[3]), r=r)
