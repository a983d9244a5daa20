"""Conjugate priors for the asymmetric families at a fixed split point.

With the split fixed, both families are exponential families, so the
priors close under Bayesian updating: the update adds the per-side
sufficient-statistic masses to (chi1, chi2) and the sample count to nu.
The densities are evaluated as the factored product of named densities
in the transformed scale variables -- gamma x gamma x beta for the
Laplace family, inverse-gamma x inverse-gamma x beta for the normal --
which is the natural-parameter-coordinate form; no Jacobian correction
is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from scipy.special import betaln, gammaln

from .estimation import SampleSet


def _gamma_log_density(x: float, shape: float, rate: float) -> float:
    if x <= 0.0:
        raise ValueError("gamma argument must be positive")
    return shape * math.log(rate) - gammaln(shape) + (shape - 1.0) * math.log(x) - rate * x


def _inv_gamma_log_density(x: float, shape: float, scale: float) -> float:
    if x <= 0.0:
        raise ValueError("inverse-gamma argument must be positive")
    return shape * math.log(scale) - gammaln(shape) - (shape + 1.0) * math.log(x) - scale / x


def _sym_beta_log_density(p: float, shape: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return (shape - 1.0) * (math.log(p) + math.log(1.0 - p)) - betaln(shape, shape)


@dataclass(frozen=True)
class LaplacePrior:
    """Gamma x gamma x beta prior for (lam, p) at fixed split ``mu``.

    ``chi1`` accumulates right-side absolute deviations, ``chi2``
    left-side ones; ``nu`` counts pseudo-observations.
    """

    nu: float
    chi1: float
    chi2: float
    mu: float

    def __post_init__(self) -> None:
        if self.chi1 <= 0.0 or self.chi2 <= 0.0:
            raise ValueError("chi1 and chi2 must be positive")
        if self.gamma_shape <= 0.0:
            raise ValueError("nu must satisfy 1 + nu/2 > 0")
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")

    @property
    def gamma_shape(self) -> float:
        return 1.0 + self.nu / 2.0

    def log_density(self, lam: float, p: float) -> float:
        if lam <= 0.0:
            raise ValueError("lam must be positive")
        alpha = math.sqrt(p / (1.0 - p))
        shape = self.gamma_shape
        return (
            _gamma_log_density(lam * alpha, shape, self.chi1)
            + _gamma_log_density(lam / alpha, shape, self.chi2)
            + _sym_beta_log_density(p, shape)
        )

    def to_dict(self) -> dict:
        return {"family": "laplace", "nu": self.nu, "chi1": self.chi1, "chi2": self.chi2, "mu": self.mu}


@dataclass(frozen=True)
class NormalPrior:
    """Inverse-gamma x inverse-gamma x beta prior for (sigma, p) at fixed
    split ``mu``.  Requires nu > 4 so the inverse-gamma shape nu/4 - 1 is
    positive.
    """

    nu: float
    chi1: float
    chi2: float
    mu: float

    def __post_init__(self) -> None:
        if self.chi1 <= 0.0 or self.chi2 <= 0.0:
            raise ValueError("chi1 and chi2 must be positive")
        if self.inv_gamma_shape <= 0.0:
            raise ValueError("nu must exceed 4 so that nu/4 - 1 > 0")
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")

    @property
    def beta_shape(self) -> float:
        return 1.0 + self.nu / 2.0

    @property
    def inv_gamma_shape(self) -> float:
        return self.nu / 4.0 - 1.0

    def log_density(self, sigma: float, p: float) -> float:
        if sigma <= 0.0:
            raise ValueError("sigma must be positive")
        a2 = p / (1.0 - p)
        s2 = sigma * sigma
        shape = self.inv_gamma_shape
        # Scale parameters chi_i / 2, matching eta_i = -1 / (2 sigma^2 ...).
        return (
            _inv_gamma_log_density(s2 * a2, shape, self.chi2 / 2.0)
            + _inv_gamma_log_density(s2 / a2, shape, self.chi1 / 2.0)
            + _sym_beta_log_density(p, self.beta_shape)
        )

    def to_dict(self) -> dict:
        return {"family": "normal", "nu": self.nu, "chi1": self.chi1, "chi2": self.chi2, "mu": self.mu}


Prior = Union[LaplacePrior, NormalPrior]


def prior_from_dict(data: dict) -> Prior:
    family = data.get("family")
    fields = {k: float(data[k]) for k in ("nu", "chi1", "chi2", "mu")}
    if family == "laplace":
        return LaplacePrior(**fields)
    if family == "normal":
        return NormalPrior(**fields)
    raise ValueError(f"unknown prior family {family!r}")


def posterior_update(prior: Prior, samples) -> Prior:
    """Conjugate update: add per-side sufficient statistics at the prior's
    fixed split to (chi1, chi2) and the sample count to nu.

    ``samples`` may be a :class:`SampleSet` or any sequence of reals
    (possibly empty, which leaves the prior unchanged).
    """
    values = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)
    d = values - prior.mu
    right = d >= 0.0
    if isinstance(prior, LaplacePrior):
        t1 = float(np.sum(np.abs(d[right])))
        t2 = float(np.sum(np.abs(d[~right])))
    else:
        t1 = float(np.sum(d[right] ** 2))
        t2 = float(np.sum(d[~right] ** 2))
    return replace(
        prior,
        nu=prior.nu + values.size,
        chi1=prior.chi1 + t1,
        chi2=prior.chi2 + t2,
    )
