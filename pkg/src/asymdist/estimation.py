"""Maximum-likelihood fitting for the asymmetric Laplace and normal families.

For a fixed left-side weight ``p`` both families have closed-form optima:
the Laplace split minimizes a convex piecewise-linear error functional
whose breakpoints are the sample points, and the normal split is the
unique root of a strictly convex piecewise-quadratic one, found by
scanning the inter-sample intervals for the single self-consistent
candidate.  The weight itself is then optimized with a bracketing
hill-climbing line search started at the symmetric value 0.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Optional, Sequence, Tuple

import numpy as np

from .distributions import (
    MIXTURE_NORMALIZER,
    AsymmetricLaplace,
    AsymmetricNormal,
    Distribution,
)

Family = Literal["laplace", "normal"]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class DegenerateDataError(ValueError):
    """All samples coincide: the scale estimate would be degenerate."""


class InsufficientDataError(ValueError):
    """Too few samples for the requested fit."""


class ConvergenceError(RuntimeError):
    """Iteration budget exhausted; carries the best result found so far."""

    def __init__(self, message: str, best: "FitResult"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class SampleSet:
    """Sorted observations with prefix-sum caches for O(1) partition stats."""

    values: np.ndarray
    prefix_sums: np.ndarray
    prefix_sq_sums: np.ndarray

    @classmethod
    def from_data(cls, data: Iterable[float]) -> "SampleSet":
        values = np.sort(np.asarray(list(data), dtype=float))
        if values.size < 1:
            raise InsufficientDataError("sample set must contain at least one value")
        if not np.all(np.isfinite(values)):
            raise ValueError("samples must be finite")
        prefix = np.concatenate(([0.0], np.cumsum(values)))
        prefix_sq = np.concatenate(([0.0], np.cumsum(values * values)))
        return cls(values=values, prefix_sums=prefix, prefix_sq_sums=prefix_sq)

    def __len__(self) -> int:
        return int(self.values.size)

    def left_count(self, mu: float) -> int:
        """Number of samples strictly below ``mu`` (the left partition)."""
        return int(np.searchsorted(self.values, mu, side="left"))


@dataclass(frozen=True)
class HillClimbConfig:
    initial_step: float = 0.1
    tolerance: float = 1e-4
    shrink: float = 0.5
    max_iters: int = 10_000

    def __post_init__(self) -> None:
        if self.initial_step <= 0.0:
            raise ValueError("initial_step must be positive")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True)
class FitResult:
    dist: Distribution
    log_likelihood: float
    partition_index: int
    trace: Optional[Tuple[Tuple[float, float], ...]] = None


def log_likelihood(dist: Distribution, samples: SampleSet) -> float:
    """Total log-likelihood of the sample set (direct log-pdf sum)."""
    return float(np.sum(dist.log_pdf(samples.values)))


def log_likelihood_decomposed(dist: Distribution, samples: SampleSet) -> float:
    """Log-likelihood via the mixture decomposition.

    Splits the total into the mixture normalizer term, the partition-count
    term |S-| ln p + |S+| ln(1-p), and the per-branch component likelihood.
    Must agree with :func:`log_likelihood` to rounding error; kept separate
    so tests can check the identity.
    """
    n = len(samples)
    mu, p, a = dist.mu, dist.p, dist.alpha
    n_left = samples.left_count(mu)
    n_right = n - n_left
    sum_left = samples.prefix_sums[n_left]
    sum_right = samples.prefix_sums[n] - sum_left

    ll_counts = n_left * math.log(p) + n_right * math.log(1.0 - p)

    if isinstance(dist, AsymmetricLaplace):
        # ln of the truncated Laplace component on each side, summed.
        dev = a * (sum_right - n_right * mu) - (sum_left - n_left * mu) / a
        ll_branch = (
            n * math.log(dist.lam)
            - n * math.log(2.0)
            + (n_right - n_left) * math.log(a)
            - dist.lam * dev
        )
    else:
        sq_left = samples.prefix_sq_sums[n_left]
        sq_right = samples.prefix_sq_sums[n] - sq_left
        dev_left = sq_left - 2.0 * mu * sum_left + n_left * mu * mu
        dev_right = sq_right - 2.0 * mu * sum_right + n_right * mu * mu
        s2 = dist.sigma * dist.sigma
        ll_branch = (
            -n * (_LOG_SQRT_2PI + math.log(dist.sigma))
            + (n_right - n_left) * math.log(a)
            - dev_left / (2.0 * s2 * a * a)
            - a * a * dev_right / (2.0 * s2)
        )
    return float(-n * math.log(MIXTURE_NORMALIZER) + ll_counts + ll_branch)


def entropy_penalty(p: float, n: int) -> float:
    """Likelihood term depending on p alone: (n/2)(ln p + ln(1-p)).

    Maximal at p = 0.5; acts as an implicit regularizer pulling the fit
    toward the symmetric distribution.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if n < 0:
        raise ValueError("n must be non-negative")
    return 0.5 * n * (math.log(p) + math.log(1.0 - p))


def _check_fit_preconditions(samples: SampleSet, p: float) -> None:
    if len(samples) < 2:
        raise InsufficientDataError("need at least two samples to fit a scale")
    if samples.values[0] == samples.values[-1]:
        raise DegenerateDataError("all samples are identical; scale estimate diverges")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")


def fit_laplace_fixed_p(samples: SampleSet, p: float) -> FitResult:
    """Closed-form asymmetric Laplace fit at fixed weight p.

    The split functional is convex and piecewise linear with breakpoints
    at the sample points, so the minimizer is found by evaluating it at
    every sample via prefix sums.  Ties resolve to the smallest index.
    """
    _check_fit_preconditions(samples, p)
    values = samples.values
    n = len(samples)
    a = math.sqrt(p / (1.0 - p))

    # Left partition size for each candidate mu = values[k] (strictly-below count).
    left_counts = np.searchsorted(values, values, side="left")
    left_sums = samples.prefix_sums[left_counts]
    total = samples.prefix_sums[n]
    right_sums = total - left_sums
    right_counts = n - left_counts
    gamma = a * (right_sums - right_counts * values) + (left_counts * values - left_sums) / a
    best = int(np.argmin(gamma))
    mu = float(values[best])
    lam = n / float(gamma[best])
    dist = AsymmetricLaplace(mu=mu, lam=lam, p=p)
    return FitResult(
        dist=dist,
        log_likelihood=log_likelihood(dist, samples),
        partition_index=int(left_counts[best]),
    )


def fit_normal_fixed_p(samples: SampleSet, p: float) -> FitResult:
    """Closed-form asymmetric normal fit at fixed weight p.

    Scans the N+1 inter-sample intervals; strict convexity of the split
    functional guarantees exactly one interval whose weighted-mean
    candidate falls inside it (boundary points resolve rightward).
    """
    _check_fit_preconditions(samples, p)
    values = samples.values
    n = len(samples)
    a2 = p / (1.0 - p)
    inv_a2 = 1.0 / a2

    counts = np.arange(n + 1, dtype=float)
    left_sums = samples.prefix_sums
    right_sums = samples.prefix_sums[n] - left_sums
    denom = inv_a2 * counts + a2 * (n - counts)
    candidates = (inv_a2 * left_sums + a2 * right_sums) / denom

    lower = np.concatenate(([-np.inf], values))
    upper = np.concatenate((values, [np.inf]))
    valid = (candidates > lower) & (candidates <= upper)
    hits = np.flatnonzero(valid)
    if hits.size == 0:
        raise RuntimeError("no self-consistent split candidate found; numerics bug")
    if hits.size > 1:
        # Only possible through floating-point boundary coincidence.
        hits = hits[:1]
    j = int(hits[0])
    mu = float(candidates[j])

    sq_left = samples.prefix_sq_sums[j]
    sq_right = samples.prefix_sq_sums[n] - sq_left
    dev_left = sq_left - 2.0 * mu * left_sums[j] + j * mu * mu
    dev_right = sq_right - 2.0 * mu * right_sums[j] + (n - j) * mu * mu
    var = (inv_a2 * dev_left + a2 * dev_right) / n
    if var <= 0.0:
        raise DegenerateDataError("zero variance at the optimal split")
    dist = AsymmetricNormal(mu=mu, sigma=math.sqrt(var), p=p)
    return FitResult(
        dist=dist,
        log_likelihood=log_likelihood(dist, samples),
        partition_index=j,
    )


_P_CLAMP = 1e-6


def hill_climb(
    objective: Callable[[float], Tuple[float, object]],
    cfg: HillClimbConfig = HillClimbConfig(),
) -> Tuple[float, float, object, Tuple[Tuple[float, float], ...]]:
    """Bracketing line search over p in (0, 1), starting from 0.5.

    ``objective`` maps p to (log-likelihood, payload).  The current center
    moves to a neighbor whenever the neighbor's value is at least as good;
    otherwise the step shrinks, until it drops below the tolerance.
    Candidates are clamped away from {0, 1} to keep the objective finite.
    Returns (p, value, payload, trace of accepted (p, value) pairs).
    """
    p = 0.5
    value, payload = objective(p)
    trace = [(p, value)]
    eta = cfg.initial_step
    iters = 0
    while eta >= cfg.tolerance:
        iters += 1
        if iters > cfg.max_iters:
            raise ConvergenceError(
                "hill climb exceeded max_iters",
                best=_fit_result_from_payload(payload, value, trace),
            )
        hi = min(max(p + eta, _P_CLAMP), 1.0 - _P_CLAMP)
        lo = min(max(p - eta, _P_CLAMP), 1.0 - _P_CLAMP)
        moved = False
        if hi != p:
            v_hi, pay_hi = objective(hi)
            if v_hi >= value:
                p, value, payload = hi, v_hi, pay_hi
                trace.append((p, value))
                moved = True
        if not moved and lo != p:
            v_lo, pay_lo = objective(lo)
            if v_lo >= value:
                p, value, payload = lo, v_lo, pay_lo
                trace.append((p, value))
                moved = True
        if not moved:
            eta *= cfg.shrink
    return p, value, payload, tuple(trace)


def _fit_result_from_payload(payload: object, value: float, trace: list) -> FitResult:
    if isinstance(payload, FitResult):
        return FitResult(
            dist=payload.dist,
            log_likelihood=value,
            partition_index=payload.partition_index,
            trace=tuple(trace),
        )
    raise RuntimeError("hill climb diverged before producing a fit")


def hill_climb_p(
    samples: SampleSet,
    family: Family,
    cfg: HillClimbConfig = HillClimbConfig(),
) -> FitResult:
    """Full maximum-likelihood fit: closed-form (mu, scale) inside a
    hill-climbing search over the weight p."""
    fixed_p = fit_laplace_fixed_p if family == "laplace" else fit_normal_fixed_p

    def objective(p: float) -> Tuple[float, FitResult]:
        fit = fixed_p(samples, p)
        return fit.log_likelihood, fit

    _, value, payload, trace = hill_climb(objective, cfg)
    return _fit_result_from_payload(payload, value, trace)


# Responsibility-weighted variants, used by the mixture/HMM M-steps.  The
# formulas are the fixed-p optima with weighted sums replacing plain sums.


def weighted_normal_fixed_p(
    values: np.ndarray, weights: np.ndarray, p: float
) -> Tuple[AsymmetricNormal, float]:
    """Weighted asymmetric normal fit at fixed p.

    ``values`` must be sorted ascending with ``weights`` aligned and
    non-negative.  Returns the fitted distribution and the weighted
    log-likelihood sum(w * log_pdf).
    """
    n = values.size
    w_total = float(np.sum(weights))
    if n < 1 or w_total <= 0.0:
        raise InsufficientDataError("no effective weight in weighted fit")
    a2 = p / (1.0 - p)
    inv_a2 = 1.0 / a2

    w_prefix = np.concatenate(([0.0], np.cumsum(weights)))
    ws_prefix = np.concatenate(([0.0], np.cumsum(weights * values)))
    wsq_prefix = np.concatenate(([0.0], np.cumsum(weights * values * values)))

    denom = inv_a2 * w_prefix + a2 * (w_total - w_prefix)
    candidates = (inv_a2 * ws_prefix + a2 * (ws_prefix[n] - ws_prefix)) / denom
    lower = np.concatenate(([-np.inf], values))
    upper = np.concatenate((values, [np.inf]))
    valid = (candidates > lower) & (candidates <= upper)
    hits = np.flatnonzero(valid)
    if hits.size == 0:
        raise RuntimeError("no self-consistent weighted split candidate")
    j = int(hits[0])
    mu = float(candidates[j])

    dev_left = wsq_prefix[j] - 2.0 * mu * ws_prefix[j] + w_prefix[j] * mu * mu
    dev_right = (
        (wsq_prefix[n] - wsq_prefix[j])
        - 2.0 * mu * (ws_prefix[n] - ws_prefix[j])
        + (w_total - w_prefix[j]) * mu * mu
    )
    var = (inv_a2 * dev_left + a2 * dev_right) / w_total
    if var <= 0.0:
        raise DegenerateDataError("zero weighted variance at the optimal split")
    dist = AsymmetricNormal(mu=mu, sigma=math.sqrt(var), p=p)
    ll = float(np.sum(weights * dist.log_pdf(values)))
    return dist, ll


def weighted_normal_hill_climb(
    values: np.ndarray,
    weights: np.ndarray,
    cfg: HillClimbConfig,
) -> Tuple[AsymmetricNormal, float]:
    """Weighted fit with the weight p optimized by hill climbing."""

    def objective(p: float) -> Tuple[float, AsymmetricNormal]:
        dist, ll = weighted_normal_fixed_p(values, weights, p)
        return ll, dist

    _, value, payload, _ = hill_climb(objective, cfg)
    assert isinstance(payload, AsymmetricNormal)
    return payload, value
