"""Asymmetric Laplace/normal distributions and downstream fitters."""

from .distributions import (
    MIXTURE_NORMALIZER,
    AsymmetricLaplace,
    AsymmetricNormal,
    ExpFamilyRepr,
    distribution_from_dict,
)
from .estimation import (
    ConvergenceError,
    DegenerateDataError,
    FitResult,
    HillClimbConfig,
    InsufficientDataError,
    SampleSet,
    entropy_penalty,
    fit_laplace_fixed_p,
    fit_normal_fixed_p,
    hill_climb_p,
    log_likelihood,
)
from .bayes import LaplacePrior, NormalPrior, posterior_update, prior_from_dict

__all__ = [
    "MIXTURE_NORMALIZER",
    "AsymmetricLaplace",
    "AsymmetricNormal",
    "ExpFamilyRepr",
    "distribution_from_dict",
    "ConvergenceError",
    "DegenerateDataError",
    "FitResult",
    "HillClimbConfig",
    "InsufficientDataError",
    "SampleSet",
    "entropy_penalty",
    "fit_laplace_fixed_p",
    "fit_normal_fixed_p",
    "hill_climb_p",
    "log_likelihood",
    "LaplacePrior",
    "NormalPrior",
    "posterior_update",
    "prior_from_dict",
]
