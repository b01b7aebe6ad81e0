"""Learning frameworks: which data fits the nuisance models before the plug-in step.

``to-cl``     target rows only
``merge-cl``  target and source rows concatenated
``l1-tcl``    source rough fit, then l1 bias correction on target rows

Every framework evaluates the ACE estimator on target rows only.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .data import DomainPair
from .errors import DegenerateDataError
from .estimators import (MERGED, NONE, TARGET_ONLY, TRANSFER, AceEstimate, Estimator,
                         PropensityClip, estimate_dr, estimate_ipw, estimate_or)
from .glm import GlmFit, LinkKind, SolverConfig, fit_mle
from .selection import SelectionPolicy, select_lambda
from .transfer import (OrPairFit, TransferFit, rough_or, rough_ps, scale_domains, transfer_or,
                       transfer_ps)


class Framework(str, enum.Enum):
    TO_CL = "to-cl"
    MERGE_CL = "merge-cl"
    L1_TCL = "l1-tcl"


_PROVENANCE = {Framework.TO_CL: TARGET_ONLY, Framework.MERGE_CL: MERGED, Framework.L1_TCL: TRANSFER}


@dataclass(frozen=True)
class SourceFits:
    """Rough source-only fits, reusable across lambdas and bootstrap trials."""
    ps: GlmFit | None = None
    or_fits: tuple[GlmFit, GlmFit] | None = None  # (treated, control)
    converged: bool = True

    @classmethod
    def compute(cls, domains: DomainPair, estimator, rough_config: SolverConfig | None = None
                ) -> "SourceFits":
        est = Estimator(estimator)
        ps = or_fits = None
        conv = True
        if est in (Estimator.IPW, Estimator.DR):
            domains.source.require_both_arms("source domain")
            ps, tr = rough_ps(domains.source, rough_config)
            conv &= tr.converged
        if est in (Estimator.OR, Estimator.DR):
            (f1, t1), (f0, t0) = rough_or(domains.source, rough_config)
            or_fits = (f1, f0)
            conv &= t1.converged and t0.converged
        return cls(ps, or_fits, conv)


@dataclass(frozen=True)
class NuisanceFits:
    ps: GlmFit | None
    or_fits: tuple[GlmFit, GlmFit] | None
    lambda_ps: float | None = None
    lambda_or: float | None = None
    converged: bool = True
    ps_transfer: TransferFit | None = field(default=None, repr=False)
    or_transfer: OrPairFit | None = field(default=None, repr=False)
    score_tables: dict = field(default_factory=dict, repr=False)


def _arm_mle(data, label, rough_config):
    fits, conv = [], True
    for z in (1, 0):
        arm = data.arm(z)
        if arm.n == 0:
            raise DegenerateDataError(f"{label} arm z={z} is empty")
        f, tr = fit_mle(arm, "outcome", LinkKind.IDENTITY, rough_config)
        fits.append(f)
        conv &= tr.converged
    return (fits[0], fits[1]), conv


def fit_nuisances(domains: DomainPair, framework, estimator, policy: SelectionPolicy | None = None,
                  config: SolverConfig | None = None, *, lambda_ps: float | None = None,
                  lambda_or: float | None = None, source_fits: SourceFits | None = None,
                  rough_config: SolverConfig | None = None, standardize: bool = False
                  ) -> NuisanceFits:
    """Fit whatever nuisance models ``estimator`` needs under ``framework``.

    For ``l1-tcl`` an explicit ``lambda_ps`` / ``lambda_or`` bypasses selection;
    otherwise ``policy`` (default: 5-fold stratified AUC) picks it.
    """
    fw, est = Framework(framework), Estimator(estimator)
    if standardize:
        if source_fits is not None:
            raise ValueError("precomputed source fits cannot be combined with standardize=True")
        scaled, s = scale_domains(domains)
        f = fit_nuisances(scaled, fw, est, policy, config, lambda_ps=lambda_ps,
                          lambda_or=lambda_or, rough_config=rough_config)
        ps = None if f.ps is None else GlmFit(f.ps.link, f.ps.coefficients / s)
        or_fits = None if f.or_fits is None else tuple(
            GlmFit(g.link, g.coefficients / s) for g in f.or_fits)
        return NuisanceFits(ps, or_fits, f.lambda_ps, f.lambda_or, f.converged,
                            score_tables=f.score_tables)
    need_ps = est in (Estimator.IPW, Estimator.DR)
    need_or = est in (Estimator.OR, Estimator.DR)
    domains.target.require_both_arms("target domain")

    if fw is not Framework.L1_TCL:
        data = domains.target if fw is Framework.TO_CL else domains.merged()
        label = "target domain" if fw is Framework.TO_CL else "merged data"
        ps = or_fits = None
        conv = True
        if need_ps:
            ps, tr = fit_mle(data, "treatment", LinkKind.SIGMOID, rough_config)
            conv &= tr.converged
        if need_or:
            or_fits, c = _arm_mle(data, label, rough_config)
            conv &= c
        return NuisanceFits(ps, or_fits, converged=conv)

    if source_fits is None:
        source_fits = SourceFits.compute(domains, est, rough_config)
    policy = policy or SelectionPolicy()
    ps = or_fits = ps_tf = or_tf = None
    conv = source_fits.converged
    tables = {}
    if need_ps:
        if lambda_ps is None:
            lambda_ps, tables["ps"] = select_lambda(
                domains, "ps", policy, config, rough_config=rough_config,
                source_fit=source_fits.ps)
        ps_tf = transfer_ps(domains, lambda_ps, config, rough_config=rough_config,
                            source_fit=source_fits.ps)
        ps = ps_tf.target_fit
        conv &= ps_tf.trace.converged
    if need_or:
        if lambda_or is None:
            lambda_or, tables["or"] = select_lambda(
                domains, "or", policy, config, rough_config=rough_config,
                source_fit=source_fits.or_fits)
        or_tf = transfer_or(domains, lambda_or, config, rough_config=rough_config,
                            source_fits=source_fits.or_fits)
        or_fits = (or_tf.treated.target_fit, or_tf.control.target_fit)
        conv &= or_tf.treated.trace.converged and or_tf.control.trace.converged
    return NuisanceFits(ps, or_fits, lambda_ps, lambda_or, conv, ps_tf, or_tf, tables)


def plug_in(domains: DomainPair, fits: NuisanceFits, framework, estimator,
            clip: PropensityClip | None = None) -> AceEstimate:
    fw, est = Framework(framework), Estimator(estimator)
    tag = _PROVENANCE[fw]
    target = domains.target
    if est is Estimator.IPW:
        out = estimate_ipw(target, fits.ps, clip, ps_source=tag)
    elif est is Estimator.OR:
        out = estimate_or(target, fits.or_fits, or_source=tag)
    else:
        out = estimate_dr(target, fits.ps, fits.or_fits, clip, ps_source=tag, or_source=tag)
    details = {"ps_coefficients": None if fits.ps is None else fits.ps.coefficients.tolist(),
               "or_coefficients": None if fits.or_fits is None else
               [f.coefficients.tolist() for f in fits.or_fits]}
    return AceEstimate(out.value, out.estimator, out.ps_source if est is not Estimator.OR else NONE,
                       out.or_source if est is not Estimator.IPW else NONE, out.n_clipped,
                       fits.lambda_ps, fits.lambda_or, fits.converged, details)


def run_framework(domains: DomainPair, framework, estimator,
                  policy: SelectionPolicy | None = None, config: SolverConfig | None = None,
                  clip: PropensityClip | None = None, **kw) -> AceEstimate:
    """Fit nuisances under ``framework`` and evaluate ``estimator`` on the target rows.

    Extra keyword arguments go to :func:`fit_nuisances`.
    """
    fits = fit_nuisances(domains, framework, estimator, policy, config, **kw)
    return plug_in(domains, fits, framework, estimator, clip)
