"""Two-piece asymmetric Laplace and normal distributions.

Both densities are built by splitting a single base distribution at its
mode ``mu``: the left half-line carries probability mass ``p`` and the
right half-line ``1 - p``, with the two branch scales tied so that the
density stays continuous at the split.  ``p = 0.5`` recovers the
classical symmetric distribution.  The split ratio is

    alpha = sqrt(p / (1 - p))

and ``beta`` is the common density value shared by both branches at the
split.  The boundary ``x == mu`` always belongs to the right branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np
from scipy.special import ndtri

ArrayLike = Union[float, np.ndarray]

# Weight of each component in the underlying two-part mixture
# representation: density * Z == p * left_component + (1-p) * right_component.
MIXTURE_NORMALIZER = 0.5

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _validate_params(mu: float, scale: float, p: float, scale_name: str) -> None:
    if not math.isfinite(mu):
        raise ValueError(f"mu must be finite, got {mu!r}")
    if not (math.isfinite(scale) and scale > 0.0):
        raise ValueError(f"{scale_name} must be positive and finite, got {scale!r}")
    if not (math.isfinite(p) and 0.0 < p < 1.0):
        raise ValueError(f"p must lie in the open interval (0, 1), got {p!r}")


def _as_finite_array(x: ArrayLike, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _maybe_scalar(arr: np.ndarray, scalar_in: bool) -> ArrayLike:
    return float(arr) if scalar_in else arr


def _clip_open_unit(u: np.ndarray) -> np.ndarray:
    # rng.random() may return exactly 0.0; keep branch inverses finite.
    tiny = np.finfo(float).tiny
    return np.clip(u, tiny, None)


@dataclass(frozen=True)
class ExpFamilyRepr:
    """Exponential-family quadruple (h, T, eta, A) at a fixed split point.

    The represented density is ``h(x) * exp(eta . T(x) - A)``; the
    representation is only valid with the split point held fixed.
    """

    log_base_measure: Callable[[ArrayLike], np.ndarray]
    sufficient_stats: Callable[[ArrayLike], Tuple[np.ndarray, np.ndarray]]
    natural_params: Tuple[float, float]
    log_partition: float

    def log_density(self, x: ArrayLike) -> ArrayLike:
        """Reconstruct the log density from the representation."""
        scalar_in = np.isscalar(x)
        t1, t2 = self.sufficient_stats(x)
        e1, e2 = self.natural_params
        out = self.log_base_measure(x) + e1 * t1 + e2 * t2 - self.log_partition
        return _maybe_scalar(np.asarray(out, dtype=float), scalar_in)


@dataclass(frozen=True)
class AsymmetricLaplace:
    """Asymmetric Laplace distribution with mode ``mu``, rate ``lam``,
    and left-side weight ``p``."""

    mu: float
    lam: float
    p: float

    def __post_init__(self) -> None:
        _validate_params(self.mu, self.lam, self.p, "lam")

    @property
    def alpha(self) -> float:
        return math.sqrt(self.p / (1.0 - self.p))

    @property
    def beta(self) -> float:
        a = self.alpha
        return self.lam * a / (a * a + 1.0)

    @property
    def left_rate(self) -> float:
        """Decay rate of the left branch (the underlying rate is lam)."""
        return self.lam / self.alpha

    @property
    def right_rate(self) -> float:
        return self.lam * self.alpha

    def log_pdf(self, x: ArrayLike) -> ArrayLike:
        scalar_in = np.isscalar(x)
        d = _as_finite_array(x) - self.mu
        log_beta = math.log(self.beta)
        out = np.where(d >= 0.0, log_beta - self.right_rate * d, log_beta + self.left_rate * d)
        return _maybe_scalar(out, scalar_in)

    def pdf(self, x: ArrayLike) -> ArrayLike:
        scalar_in = np.isscalar(x)
        out = np.exp(self.log_pdf(np.asarray(x, dtype=float)))
        return _maybe_scalar(out, scalar_in)

    def cdf(self, x: ArrayLike) -> ArrayLike:
        scalar_in = np.isscalar(x)
        d = _as_finite_array(x) - self.mu
        left = self.p * np.exp(self.left_rate * np.minimum(d, 0.0))
        right = 1.0 - (1.0 - self.p) * np.exp(-self.right_rate * np.maximum(d, 0.0))
        out = np.where(d >= 0.0, right, left)
        return _maybe_scalar(out, scalar_in)

    def quantile(self, q: ArrayLike) -> ArrayLike:
        scalar_in = np.isscalar(q)
        qa = np.asarray(q, dtype=float)
        if not np.all((qa > 0.0) & (qa < 1.0)):
            raise ValueError("quantile levels must lie in (0, 1)")
        left = self.mu + np.log(np.minimum(qa, self.p) / self.p) / self.left_rate
        right = self.mu - np.log(np.minimum(1.0 - qa, 1.0 - self.p) / (1.0 - self.p)) / self.right_rate
        out = np.where(qa >= self.p, right, left)
        return _maybe_scalar(out, scalar_in)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` values: a uniform picks the branch, a second uniform
        is pushed through the inverse cdf of the truncated branch."""
        if n < 0:
            raise ValueError("n must be non-negative")
        u = rng.random(n)
        v = _clip_open_unit(rng.random(n))
        left = self.mu + np.log(v) / self.left_rate
        right = self.mu - np.log(1.0 - v) / self.right_rate
        return np.where(u < self.p, left, right)

    def exp_family(self) -> ExpFamilyRepr:
        mu = self.mu

        def log_base(x: ArrayLike) -> np.ndarray:
            return np.zeros_like(np.asarray(x, dtype=float))

        def stats(x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
            d = np.asarray(x, dtype=float) - mu
            return np.abs(d) * (d >= 0.0), np.abs(d) * (d < 0.0)

        return ExpFamilyRepr(
            log_base_measure=log_base,
            sufficient_stats=stats,
            natural_params=(-self.right_rate, -self.left_rate),
            log_partition=-math.log(self.beta),
        )

    def to_dict(self) -> dict:
        return {"family": "laplace", "mu": self.mu, "scale": self.lam, "p": self.p}


@dataclass(frozen=True)
class AsymmetricNormal:
    """Asymmetric normal distribution with mode ``mu``, underlying scale
    ``sigma``, and left-side weight ``p``."""

    mu: float
    sigma: float
    p: float

    def __post_init__(self) -> None:
        _validate_params(self.mu, self.sigma, self.p, "sigma")

    @property
    def alpha(self) -> float:
        return math.sqrt(self.p / (1.0 - self.p))

    @property
    def beta(self) -> float:
        a = self.alpha
        return 2.0 * a / (self.sigma * (a * a + 1.0))

    @property
    def left_scale(self) -> float:
        return self.sigma * self.alpha

    @property
    def right_scale(self) -> float:
        return self.sigma / self.alpha

    def log_pdf(self, x: ArrayLike) -> ArrayLike:
        scalar_in = np.isscalar(x)
        d = _as_finite_array(x) - self.mu
        z = np.where(d >= 0.0, d / self.right_scale, d / self.left_scale)
        out = math.log(self.beta) - _LOG_SQRT_2PI - 0.5 * z * z
        return _maybe_scalar(out, scalar_in)

    def pdf(self, x: ArrayLike) -> ArrayLike:
        scalar_in = np.isscalar(x)
        out = np.exp(self.log_pdf(np.asarray(x, dtype=float)))
        return _maybe_scalar(out, scalar_in)

    def cdf(self, x: ArrayLike) -> ArrayLike:
        from scipy.special import ndtr

        scalar_in = np.isscalar(x)
        d = _as_finite_array(x) - self.mu
        left = 2.0 * self.p * ndtr(np.minimum(d, 0.0) / self.left_scale)
        right = self.p + (1.0 - self.p) * (2.0 * ndtr(np.maximum(d, 0.0) / self.right_scale) - 1.0)
        out = np.where(d >= 0.0, right, left)
        return _maybe_scalar(out, scalar_in)

    def quantile(self, q: ArrayLike) -> ArrayLike:
        scalar_in = np.isscalar(q)
        qa = np.asarray(q, dtype=float)
        if not np.all((qa > 0.0) & (qa < 1.0)):
            raise ValueError("quantile levels must lie in (0, 1)")
        left = self.mu + self.left_scale * ndtri(np.minimum(qa, self.p) / (2.0 * self.p))
        right = self.mu + self.right_scale * ndtri(
            0.5 + np.maximum(qa - self.p, 0.0) / (2.0 * (1.0 - self.p))
        )
        out = np.where(qa >= self.p, right, left)
        return _maybe_scalar(out, scalar_in)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be non-negative")
        u = rng.random(n)
        v = _clip_open_unit(rng.random(n))
        left = self.mu + self.left_scale * ndtri(0.5 * v)
        right = self.mu + self.right_scale * ndtri(0.5 + 0.5 * v)
        return np.where(u < self.p, left, right)

    def exp_family(self) -> ExpFamilyRepr:
        mu = self.mu
        a2 = self.alpha * self.alpha
        s2 = self.sigma * self.sigma

        def log_base(x: ArrayLike) -> np.ndarray:
            return np.full_like(np.asarray(x, dtype=float), -_LOG_SQRT_2PI)

        def stats(x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
            d = np.asarray(x, dtype=float) - mu
            return d * d * (d >= 0.0), d * d * (d < 0.0)

        return ExpFamilyRepr(
            log_base_measure=log_base,
            sufficient_stats=stats,
            natural_params=(-a2 / (2.0 * s2), -1.0 / (2.0 * s2 * a2)),
            log_partition=-math.log(self.beta),
        )

    def to_dict(self) -> dict:
        return {"family": "normal", "mu": self.mu, "scale": self.sigma, "p": self.p}


Distribution = Union[AsymmetricLaplace, AsymmetricNormal]


def distribution_from_dict(data: dict) -> Distribution:
    """Inverse of ``to_dict`` for both families."""
    family = data.get("family")
    if family == "laplace":
        return AsymmetricLaplace(mu=float(data["mu"]), lam=float(data["scale"]), p=float(data["p"]))
    if family == "normal":
        return AsymmetricNormal(mu=float(data["mu"]), sigma=float(data["scale"]), p=float(data["p"]))
    raise ValueError(f"unknown distribution family {family!r}")
