"""Transfer-learned nuisance models for average causal effect estimation.

Rough GLM fits on a data-rich source domain are bias-corrected on a small
target domain with an l1 penalty on the parameter difference, then plugged
into IPW, outcome-regression or doubly robust ACE estimators.
"""
__version__ = "0.1.0"

from .bootstrap import BootstrapConfig, BootstrapSummary, bootstrap, quantile
from .data import Dataset, DomainPair, load_csv, split_by_covariate, write_csv
from .errors import DataError, DegenerateDataError, DomainError, NumericalError
from .estimators import (AceEstimate, Estimator, PropensityClip, estimate_dr, estimate_ipw,
                         estimate_or)
from .experiments import PartConfig, run_grid, run_part, run_toy_comparison
from .frameworks import Framework, fit_nuisances, run_framework
from .glm import GlmFit, LinkKind, SolverConfig, fit_l1_deviation, fit_mle, nll, nll_gradient
from .selection import LambdaGrid, SelectionPolicy, auc, cohens_d, select_lambda, smd
from .synthetic import (GridConfig, OracleInfo, ToyConfig, generate_grid_instance, generate_toy,
                        true_propensity)
from .transfer import (TheoryConstants, TransferFit, theory_lambda_or, theory_lambda_ps,
                       transfer_or, transfer_ps)

__all__ = [
    "AceEstimate", "BootstrapConfig", "BootstrapSummary", "DataError", "Dataset",
    "DegenerateDataError", "DomainError", "DomainPair", "Estimator", "Framework", "GlmFit",
    "GridConfig", "LambdaGrid", "LinkKind", "NumericalError", "OracleInfo", "PartConfig",
    "PropensityClip", "SelectionPolicy", "SolverConfig", "TheoryConstants", "ToyConfig",
    "TransferFit", "auc", "bootstrap", "cohens_d", "estimate_dr", "estimate_ipw", "estimate_or",
    "fit_l1_deviation", "fit_mle", "fit_nuisances", "generate_grid_instance", "generate_toy",
    "load_csv", "nll", "nll_gradient", "quantile", "run_framework", "run_grid", "run_part",
    "run_toy_comparison", "select_lambda", "smd", "split_by_covariate", "theory_lambda_or",
    "theory_lambda_ps", "transfer_or", "transfer_ps", "true_propensity", "write_csv",
]
