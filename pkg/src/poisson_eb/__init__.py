"""Empirical Bayes for Poisson counts.

Core pieces: discrete mixing distributions and their Poisson mixtures
(`mixtures`), finite-difference and orthogonal-polynomial machinery
(`differences`), the nonparametric maximum-likelihood mixing estimator with a
first-order certificate (`npmle`), plug-in estimation rules from Robbins'
formula to the regularized mixture rule (`rules`), reference priors and
certified discretizations (`priors`), local moment-matching compression of
priors (`moment_match`), and a reproducible Monte Carlo harness
(`experiments`).
"""

from ._version import __version__
from .errors import (
    DegenerateSupportError,
    InvalidInputError,
    MomentDegeneracyError,
    NumericalFailureError,
    PoissonEBError,
    TailCoverageError,
    UnsupportedRegimeError,
)
from .mixtures import (
    DiscretePrior,
    MixturePmf,
    bayes_rule,
    generating_function_check,
    hellinger_sq,
    log_poisson_pmf,
    mixture_tail_bound,
    mmse,
    mmse_exact,
    pmf_table,
    poisson_divergences,
    poisson_tail_bound,
    posterior_mean_table,
)
from .differences import (
    ak_recursion_residuals,
    ak_sequence,
    charlier,
    diff_table,
    finite_diff,
    summation_by_parts,
)
from .npmle import (
    CountHistogram,
    NpmleFit,
    fit_npmle,
    grid_spec,
    kkt_gap_on_grid,
    load_count_data,
    log_likelihood,
)
from .rules import (
    EstimatorConfig,
    FittedRule,
    fit_rule,
    npmle_eb,
    robbins,
    robbins_truncated,
    tune_defaults,
)
from .priors import (
    PriorSpec,
    ResolvedPrior,
    assouad_prior,
    divergent_mmse_diagnostic,
    parse_prior_spec,
    resolve,
)
from .moment_match import (
    MatchReport,
    MeasureFragment,
    QuadraticPartition,
    local_moment_match,
    quadrature_from_moments,
)
from .experiments import (
    ExperimentPlan,
    ExperimentReport,
    density_risk_trial,
    fit_rate,
    individual_regret_trial,
    parse_plan,
    robbins_instability_probe,
    run_plan,
    total_regret_trial,
)

__all__ = [
    "__version__",
    # errors
    "PoissonEBError", "InvalidInputError", "DegenerateSupportError",
    "TailCoverageError", "UnsupportedRegimeError", "MomentDegeneracyError",
    "NumericalFailureError",
    # mixtures
    "DiscretePrior", "MixturePmf", "log_poisson_pmf", "pmf_table",
    "bayes_rule", "posterior_mean_table", "mmse", "mmse_exact",
    "hellinger_sq", "poisson_divergences", "poisson_tail_bound",
    "mixture_tail_bound", "generating_function_check",
    # differences
    "finite_diff", "diff_table", "summation_by_parts", "charlier",
    "ak_sequence", "ak_recursion_residuals",
    # npmle
    "CountHistogram", "NpmleFit", "fit_npmle", "grid_spec",
    "kkt_gap_on_grid", "log_likelihood", "load_count_data",
    # rules
    "EstimatorConfig", "FittedRule", "robbins", "robbins_truncated",
    "npmle_eb", "fit_rule", "tune_defaults",
    # priors
    "PriorSpec", "ResolvedPrior", "parse_prior_spec", "resolve",
    "assouad_prior", "divergent_mmse_diagnostic",
    # moment matching
    "MeasureFragment", "QuadraticPartition", "quadrature_from_moments",
    "local_moment_match", "MatchReport",
    # experiments
    "ExperimentPlan", "ExperimentReport", "parse_plan", "run_plan",
    "density_risk_trial", "individual_regret_trial", "total_regret_trial",
    "robbins_instability_probe", "fit_rate",
]
