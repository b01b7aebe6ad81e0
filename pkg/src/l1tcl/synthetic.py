"""Seeded data generators with ground truth attached.

Toy example
    X1 ~ N(mu1, 1), X2 ~ N(mu2, 1) per domain,
    P(Z=1 | X) = 1 / (1 + exp(beta1*X1 + beta2*X2)),
    Y = tau*Z + alpha*X2 + eps,  eps ~ N(0, noise_sd^2).

  Note the *positive* exponent: the assignment curve is decreasing in the
  index.  The estimation code uses the standard sigmoid 1/(1+exp(-u)), so the
  ground-truth PS parameters recorded in :class:`OracleInfo` are ``-beta``.

Grid instances
    Sigmoid-link PS with source parameters ~ N(0, scale^2), an exactly
    s-sparse Gaussian target-minus-source difference, covariates ~ N(0, I),
    and the outcome truth ``Y = tau*Z + X @ eta + eps`` with
    eta ~ N(0, scale^2/d), tau ~ N(0, 1), eps ~ N(0, 1/4), shared by both
    domains.  That outcome has no through-the-origin linear form per arm, so
    ``true_or_params`` stays ``None``; ``eta`` is in ``extra``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import Dataset, DomainPair


@dataclass(frozen=True)
class ToyConfig:
    mu1: float = 0.0
    beta1: float = 0.1
    mu2: float = 2.0
    beta2: float = -0.1
    tau: float = -2.0 / 30.0
    alpha: float = 0.1
    mu2_s: float = 1.0
    beta2_s: float = -0.2
    noise_sd: float = 0.5
    n_target: int = 100
    n_target_pool: int = 2000
    n_source: int = 1000
    seed: int = 0
    # source-domain outcome model; None means "same as target"
    tau_s: float | None = None
    alpha_s: float | None = None
    intercept: bool = False

    def __post_init__(self):
        if not 1 <= self.n_target <= self.n_target_pool:
            raise ValueError("need 1 <= n_target <= n_target_pool")
        if self.n_source < 1:
            raise ValueError("n_source must be >= 1")


@dataclass(frozen=True)
class GridConfig:
    d_values: tuple[int, ...] = (10, 20, 50, 75, 100)
    s_values: tuple[int, ...] = (1, 3, 5, 7, 10)
    n_values: tuple[int, ...] = (100, 200, 500)
    ns_values: tuple[int, ...] = (2000, 3000, 5000)
    trials: int = 100
    coefficient_scale: float = 0.5
    seed: int = 0
    validation_size: int = 50

    @classmethod
    def reduced(cls, **kw) -> "GridConfig":
        base = dict(d_values=(10, 20), s_values=(1, 3), n_values=(100,), ns_values=(2000,),
                    trials=20)
        base.update(kw)
        return cls(**base)

    def cells(self):
        for d in self.d_values:
            for s in self.s_values:
                for n in self.n_values:
                    for ns in self.ns_values:
                        yield d, s, n, ns


@dataclass(frozen=True)
class OracleInfo:
    true_tau: float
    true_ps_params: dict[str, np.ndarray]
    true_or_params: dict[str, dict[int, np.ndarray]] | None = None
    noise: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    validation: Dataset | None = field(default=None, repr=False)
    tau_by_domain: dict[str, float] = field(default_factory=dict)
    extra: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        out = {"true_tau": self.true_tau,
               "tau_by_domain": dict(self.tau_by_domain),
               "true_ps_params": {k: v.tolist() for k, v in self.true_ps_params.items()}}
        for k, v in self.extra.items():
            out[k] = np.asarray(v).tolist()
        if self.true_or_params is not None:
            out["true_or_params"] = {dom: {str(z): a.tolist() for z, a in arms.items()}
                                     for dom, arms in self.true_or_params.items()}
        return out


def _toy_domain(rng, n, mu1, mu2, b1, b2, tau, alpha, sd, intercept):
    x1 = rng.normal(mu1, 1.0, n)
    x2 = rng.normal(mu2, 1.0, n)
    p = 1.0 / (1.0 + np.exp(b1 * x1 + b2 * x2))
    z = (rng.random(n) < p).astype(np.float64)
    eps = rng.normal(0.0, sd, n)
    y = tau * z + alpha * x2 + eps
    cols = [x1, x2] + ([np.ones(n)] if intercept else [])
    names = ("x1", "x2") + (("const",) if intercept else ())
    return Dataset(np.column_stack(cols), z, y, names), eps


def generate_toy(cfg: ToyConfig = ToyConfig()) -> tuple[DomainPair, OracleInfo]:
    """Target = first ``n_target`` rows of an ``n_target_pool`` draw; source drawn independently."""
    rng_t, rng_s = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    tau_s = cfg.tau if cfg.tau_s is None else cfg.tau_s
    alpha_s = cfg.alpha if cfg.alpha_s is None else cfg.alpha_s
    pool, eps_t = _toy_domain(rng_t, cfg.n_target_pool, cfg.mu1, cfg.mu2, cfg.beta1, cfg.beta2,
                              cfg.tau, cfg.alpha, cfg.noise_sd, cfg.intercept)
    source, eps_s = _toy_domain(rng_s, cfg.n_source, cfg.mu1, cfg.mu2_s, cfg.beta1, cfg.beta2_s,
                                tau_s, alpha_s, cfg.noise_sd, cfg.intercept)
    target = pool.subset(np.arange(cfg.n_target))
    pad = [0.0] if cfg.intercept else []
    ps = {"target": -np.array([cfg.beta1, cfg.beta2] + pad),
          "source": -np.array([cfg.beta1, cfg.beta2_s] + pad)}
    or_params = None
    if cfg.intercept:
        or_params = {"target": {1: np.array([0.0, cfg.alpha, cfg.tau]),
                                0: np.array([0.0, cfg.alpha, 0.0])},
                     "source": {1: np.array([0.0, alpha_s, tau_s]),
                                0: np.array([0.0, alpha_s, 0.0])}}
    oracle = OracleInfo(true_tau=cfg.tau, true_ps_params=ps, true_or_params=or_params,
                        noise={"target": eps_t[:cfg.n_target], "source": eps_s},
                        tau_by_domain={"target": cfg.tau, "source": tau_s})
    return DomainPair(target, source), oracle


def toy_pool(cfg: ToyConfig = ToyConfig()) -> Dataset:
    """The full ``n_target_pool`` target draw that :func:`generate_toy` truncates."""
    rng_t = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[0])
    pool, _ = _toy_domain(rng_t, cfg.n_target_pool, cfg.mu1, cfg.mu2, cfg.beta1, cfg.beta2,
                          cfg.tau, cfg.alpha, cfg.noise_sd, cfg.intercept)
    return pool


def generate_grid_instance(d: int, s: int, n: int, n_s: int, coefficient_scale: float = 0.5,
                           seed: int = 0, n_validation: int = 0) -> tuple[DomainPair, OracleInfo]:
    """One synthetic transfer problem; ``n_validation`` extra target rows go to ``oracle.validation``."""
    if not 0 <= s <= d:
        raise ValueError(f"sparsity s={s} must satisfy 0 <= s <= d={d}")
    if min(n, n_s) < 1:
        raise ValueError("sample sizes must be >= 1")
    rng = np.random.default_rng(seed)
    scale = coefficient_scale
    beta_s = rng.normal(0.0, scale, d)
    delta = np.zeros(d)
    support = np.sort(rng.choice(d, size=s, replace=False))
    mags = rng.normal(0.0, scale, s)
    # a Gaussian draw of exactly zero would break the sparsity count
    mags[mags == 0.0] = scale
    delta[support] = mags
    beta_t = beta_s + delta
    eta = rng.normal(0.0, scale / np.sqrt(d), d)
    tau = float(rng.normal())

    def domain(m, beta):
        X = rng.normal(size=(m, d))
        z = (rng.random(m) < expit(X @ beta)).astype(np.float64)
        eps = rng.normal(0.0, 0.5, m)
        return Dataset(X, z, tau * z + X @ eta + eps), eps

    target_all, eps_t = domain(n + n_validation, beta_t)
    source, eps_s = domain(n_s, beta_s)
    target = target_all.subset(np.arange(n))
    validation = target_all.subset(np.arange(n, n + n_validation)) if n_validation else None
    oracle = OracleInfo(
        true_tau=tau, true_ps_params={"target": beta_t, "source": beta_s},
        noise={"target": eps_t[:n], "source": eps_s}, validation=validation,
        tau_by_domain={"target": tau, "source": tau},
        extra={"delta": delta, "support": support, "eta": eta})
    return DomainPair(target, source), oracle


def true_propensity(oracle: OracleInfo, x, domain: str = "target"):
    """Structural P(Z=1 | x) under the standard sigmoid; ``x`` may be one row or a matrix."""
    beta = oracle.true_ps_params[domain]
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != beta.shape[0]:
        raise ValueError(f"x has dimension {x.shape[-1]}, PS parameters have {beta.shape[0]}")
    return expit(x @ beta)
