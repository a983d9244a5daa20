"""Hidden Markov models with symmetric or asymmetric normal emissions.

Inference runs in log space with log-sum-exp; missing observations
contribute no emission factor, so their state marginals are driven by
the transition structure alone.  Training follows a two-phase schedule:
Baum-Welch with every emission weight pinned (the symmetric problem)
until the likelihood settles, then hill-climbing refits of each state's
weight inside the responsibility-weighted M-step.  Initial estimates
come from a plain mixture fit whose weights seed both the initial state
distribution and every transition row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .distributions import AsymmetricNormal
from .estimation import (
    DegenerateDataError,
    HillClimbConfig,
    InsufficientDataError,
    weighted_normal_fixed_p,
    weighted_normal_hill_climb,
)

HmmFamily = Literal["symmetric", "asymmetric"]

# Coarser tolerance than standalone fitting: the weight refit runs once
# per EM iteration, so per-call precision matters less than total cost.
_M_STEP_CLIMB = HillClimbConfig(initial_step=0.1, tolerance=1e-3, shrink=0.5, max_iters=10_000)

_PHASE1_REL_TOL = 1e-6
_PHASE1_STREAK = 3


class NumericsError(RuntimeError):
    """Non-finite likelihood during training; carries the iteration dump."""

    def __init__(self, message: str, trace: Sequence[float]):
        super().__init__(message)
        self.trace = list(trace)


class InitializationError(RuntimeError):
    """Mixture initialization kept collapsing after repeated reseeds."""


@dataclass(frozen=True)
class ObservationSeries:
    """Time-indexed observations; NaN marks a missing slot."""

    values: np.ndarray

    @classmethod
    def from_list(cls, data: Sequence[Optional[float]]) -> "ObservationSeries":
        values = np.array([math.nan if v is None else float(v) for v in data], dtype=float)
        return cls(values=values)

    def __post_init__(self) -> None:
        observed = self.values[~np.isnan(self.values)]
        if observed.size == 0:
            raise ValueError("series must contain at least one observed value")
        if not np.all(np.isfinite(observed)):
            raise ValueError("observed values must be finite")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def observed_values(self) -> np.ndarray:
        return self.values[~np.isnan(self.values)]


@dataclass(frozen=True)
class HmmModel:
    pi: np.ndarray
    trans: np.ndarray
    emissions: Tuple[AsymmetricNormal, ...]

    def __post_init__(self) -> None:
        k = len(self.emissions)
        if k < 2:
            raise ValueError("need at least two states")
        if self.pi.shape != (k,) or self.trans.shape != (k, k):
            raise ValueError("pi/trans shapes do not match the number of states")
        if np.any(self.pi < 0.0) or np.any(self.trans < 0.0):
            raise ValueError("probabilities must be non-negative")
        if abs(float(np.sum(self.pi)) - 1.0) > 1e-12:
            raise ValueError("pi must sum to 1")
        if np.max(np.abs(np.sum(self.trans, axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to 1")

    @property
    def n_states(self) -> int:
        return len(self.emissions)

    def sorted_by_mode(self) -> "HmmModel":
        """Relabel states in increasing order of emission mode, for
        stable reporting."""
        order = np.argsort([e.mu for e in self.emissions], kind="stable")
        return HmmModel(
            pi=self.pi[order].copy(),
            trans=self.trans[np.ix_(order, order)].copy(),
            emissions=tuple(self.emissions[i] for i in order),
        )

    def to_dict(self) -> dict:
        return {
            "K": self.n_states,
            "pi": self.pi.tolist(),
            "trans": self.trans.tolist(),
            "emissions": [
                {"mu": e.mu, "sigma": e.sigma, "p": e.p} for e in self.emissions
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HmmModel":
        emissions = tuple(
            AsymmetricNormal(mu=float(e["mu"]), sigma=float(e["sigma"]), p=float(e["p"]))
            for e in data["emissions"]
        )
        return cls(
            pi=np.asarray(data["pi"], dtype=float),
            trans=np.asarray(data["trans"], dtype=float),
            emissions=emissions,
        )


@dataclass(frozen=True)
class PosteriorSummary:
    state_marginals: np.ndarray
    log_likelihood: float
    missing_mask: np.ndarray


def _emission_log_probs(model: HmmModel, obs: ObservationSeries) -> np.ndarray:
    """(T, K) emission log-likelihoods; missing rows are zero."""
    t_len = len(obs)
    logb = np.zeros((t_len, model.n_states))
    present = ~obs.missing_mask
    x = obs.values[present]
    for k, emission in enumerate(model.emissions):
        logb[present, k] = emission.log_pdf(x)
    return logb


def _forward_backward_arrays(
    model: HmmModel, obs: ObservationSeries
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    logb = _emission_log_probs(model, obs)
    t_len, k = logb.shape
    with np.errstate(divide="ignore"):
        log_pi = np.log(model.pi)
    trans = model.trans
    trans_t = trans.T.copy()

    # Max-shifted recursions in probability space; equivalent to per-step
    # log-sum-exp but without per-call overhead.
    la = np.empty((t_len, k))
    la[0] = log_pi + logb[0]
    with np.errstate(divide="ignore"):
        for t in range(1, t_len):
            prev = la[t - 1]
            m = prev.max()
            la[t] = logb[t] + m + np.log(trans_t @ np.exp(prev - m))

        lb = np.empty((t_len, k))
        lb[-1] = 0.0
        for t in range(t_len - 2, -1, -1):
            nxt = logb[t + 1] + lb[t + 1]
            m = nxt.max()
            lb[t] = m + np.log(trans @ np.exp(nxt - m))

    ll = float(logsumexp(la[-1]))
    if not math.isfinite(ll):
        raise NumericsError("non-finite data log-likelihood", trace=[])
    return la, lb, logb, ll


def forward_backward(model: HmmModel, obs: ObservationSeries) -> PosteriorSummary:
    """Smoothed state marginals and exact data log-likelihood."""
    la, lb, _, ll = _forward_backward_arrays(model, obs)
    log_post = la + lb
    log_post -= logsumexp(log_post, axis=1, keepdims=True)
    return PosteriorSummary(
        state_marginals=np.exp(log_post),
        log_likelihood=ll,
        missing_mask=obs.missing_mask.copy(),
    )


def _weighted_symmetric_normal(values: np.ndarray, weights: np.ndarray) -> AsymmetricNormal:
    w_total = float(np.sum(weights))
    if w_total <= 0.0:
        raise InsufficientDataError("no effective weight for emission update")
    mean = float(np.sum(weights * values)) / w_total
    var = float(np.sum(weights * (values - mean) ** 2)) / w_total
    if var <= 0.0:
        raise DegenerateDataError("zero weighted variance in emission update")
    return AsymmetricNormal(mu=mean, sigma=math.sqrt(var), p=0.5)


def _update_emission(
    values: np.ndarray,
    weights: np.ndarray,
    current: AsymmetricNormal,
    allow_asymmetry: bool,
) -> AsymmetricNormal:
    """Responsibility-weighted emission M-step.

    ``values`` must be sorted with ``weights`` aligned.  Without
    asymmetry, refits (mu, sigma) at the current weight.  With it, a
    hill climb over the weight is compared against the fixed-weight
    refit and the better expected likelihood wins, so EM stays monotone
    even when the climb's fresh start from 0.5 lands short of the
    state's current weight.
    """
    fixed, ll_fixed = weighted_normal_fixed_p(values, weights, current.p)
    if not allow_asymmetry:
        return fixed
    climbed, ll_climbed = weighted_normal_hill_climb(values, weights, _M_STEP_CLIMB)
    return climbed if ll_climbed >= ll_fixed else fixed


def mixture_init(
    obs: ObservationSeries,
    n_states: int,
    family: HmmFamily,
    rng: np.random.Generator,
    iters: int = 100,
    max_retries: int = 5,
) -> HmmModel:
    """Initialize an HMM from a mixture-model fit.

    Runs mixture EM for exactly ``iters`` iterations, then uses the
    mixture weights for the initial distribution and for every row of
    the transition matrix, so each step starts with the same prior over
    emissions.  Asymmetric runs keep every weight at 0.5 until the
    mixture likelihood settles, then open up the weight refits.
    """
    if n_states < 2:
        raise ValueError("need at least two states")
    x = np.sort(obs.observed_values)
    if x.size < 10 * n_states:
        raise InsufficientDataError("need at least 10 observations per state")
    spread = float(np.std(x))
    if spread == 0.0:
        raise DegenerateDataError("observed values are constant")

    last_error: Optional[Exception] = None
    for _ in range(max_retries):
        try:
            return _run_mixture_em(x, n_states, family, rng, iters, spread)
        except (DegenerateDataError, InsufficientDataError) as exc:
            last_error = exc
    raise InitializationError(f"mixture initialization failed after {max_retries} retries: {last_error}")


def _run_mixture_em(
    x: np.ndarray,
    n_states: int,
    family: HmmFamily,
    rng: np.random.Generator,
    iters: int,
    spread: float,
) -> HmmModel:
    quantiles = np.quantile(x, (np.arange(n_states) + 0.5) / n_states)
    means = quantiles + rng.normal(0.0, 0.05 * spread, size=n_states)
    emissions = [AsymmetricNormal(mu=float(m), sigma=spread, p=0.5) for m in means]
    weights = np.full(n_states, 1.0 / n_states)

    prev_ll = -math.inf
    streak = 0
    symmetric_phase = True
    for _ in range(iters):
        log_resp = np.log(weights)[None, :] + np.column_stack(
            [e.log_pdf(x) for e in emissions]
        )
        norm = logsumexp(log_resp, axis=1)
        ll = float(np.sum(norm))
        resp = np.exp(log_resp - norm[:, None])

        if family == "asymmetric" and symmetric_phase:
            if ll - prev_ll <= _PHASE1_REL_TOL * max(1.0, abs(ll)):
                streak += 1
                if streak >= _PHASE1_STREAK:
                    symmetric_phase = False
            else:
                streak = 0
        prev_ll = ll

        weights = np.mean(resp, axis=0)
        if np.any(weights < 1e-10):
            raise DegenerateDataError("mixture component collapsed")
        allow_asym = family == "asymmetric" and not symmetric_phase
        emissions = [
            _update_emission(x, resp[:, k], emissions[k], allow_asym)
            for k in range(n_states)
        ]

    weights = weights / np.sum(weights)
    return HmmModel(
        pi=weights.copy(),
        trans=np.tile(weights, (n_states, 1)),
        emissions=tuple(emissions),
    )


@dataclass(frozen=True)
class BaumWelchResult:
    model: HmmModel
    trace: Tuple[float, ...]
    phase1_iters: int
    converged: bool


def baum_welch(
    model: HmmModel,
    obs: ObservationSeries,
    family: HmmFamily,
    max_iters: int = 200,
    tol: float = 1e-6,
) -> BaumWelchResult:
    """EM training with the two-phase asymmetry schedule.

    Phase 1 keeps every emission weight fixed at its current value until
    the relative likelihood change stays below 1e-6 for three
    consecutive iterations (for symmetric models this is all there is);
    phase 2 adds the per-state weight hill climb to each M-step.  Stops
    when the relative change drops below ``tol`` in phase 2 or the
    iteration budget runs out.
    """
    k = model.n_states
    order = np.argsort(obs.values, kind="stable")  # NaN sorts last
    present_sorted = order[~np.isnan(obs.values[order])]
    x_sorted = obs.values[present_sorted]

    trace: List[float] = []
    phase1 = True
    phase1_iters = 0
    streak = 0
    converged = False
    prev_ll = -math.inf

    for _ in range(max_iters):
        la, lb, logb, ll = _forward_backward_arrays(model, obs)
        if not math.isfinite(ll):
            raise NumericsError("non-finite log-likelihood", trace)
        trace.append(ll)

        gain = ll - prev_ll
        small = gain <= _PHASE1_REL_TOL * max(1.0, abs(ll))
        if phase1:
            phase1_iters += 1
            if small:
                streak += 1
                if streak >= _PHASE1_STREAK:
                    if family == "symmetric":
                        converged = True
                        break
                    phase1 = False
                    streak = 0
            else:
                streak = 0
        elif gain <= tol * max(1.0, abs(ll)):
            converged = True
            break
        prev_ll = ll

        log_post = la + lb
        log_post -= logsumexp(log_post, axis=1, keepdims=True)
        gamma = np.exp(log_post)

        # Expected transition counts, with a per-step shift to keep the
        # exponentials bounded.
        m = logsumexp(la, axis=1)
        left = np.exp(la[:-1] - m[:-1, None])
        right = np.exp(logb[1:] + lb[1:] + m[:-1, None] - ll)
        counts = model.trans * (left.T @ right)

        pi = gamma[0] / np.sum(gamma[0])
        row_sums = np.sum(counts, axis=1, keepdims=True)
        if np.any(row_sums <= 0.0):
            raise NumericsError("empty transition row in M-step", trace)
        trans = counts / row_sums

        emissions = []
        resp_sorted = gamma[present_sorted]
        for state in range(k):
            emissions.append(
                _update_emission(
                    x_sorted,
                    resp_sorted[:, state],
                    model.emissions[state],
                    allow_asymmetry=(family == "asymmetric" and not phase1),
                )
            )
        model = HmmModel(pi=pi, trans=trans, emissions=tuple(emissions))

    return BaumWelchResult(
        model=model,
        trace=tuple(trace),
        phase1_iters=phase1_iters,
        converged=converged,
    )


def transition_entropy(model: HmmModel) -> np.ndarray:
    """Shannon entropy (bits) of each transition row, with 0 log 0 = 0."""
    rows = model.trans
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(rows > 0.0, rows * np.log2(rows), 0.0)
    return -np.sum(terms, axis=1)


@dataclass(frozen=True)
class EntropyReport:
    normalized_entropies: np.ndarray
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray
    quantiles: np.ndarray  # percentiles 1..99


def state_entropy_report(
    summary: PosteriorSummary, include_missing: bool = True
) -> EntropyReport:
    """Per-time normalized entropy of the smoothed state marginals.

    Entropy is divided by log2(K) so values live in [0, 1]; the
    histogram uses 20 equal bins on [0, 1] and the quantile vector
    (percentiles 1..99) supports QQ plotting against another model.
    """
    marginals = summary.state_marginals
    k = marginals.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(marginals > 0.0, marginals * np.log2(marginals), 0.0)
    entropies = -np.sum(terms, axis=1) / math.log2(k)
    if not include_missing:
        entropies = entropies[~summary.missing_mask]
    counts, edges = np.histogram(entropies, bins=20, range=(0.0, 1.0))
    quantiles = np.percentile(entropies, np.arange(1, 100))
    return EntropyReport(
        normalized_entropies=entropies,
        histogram_counts=counts,
        histogram_edges=edges,
        quantiles=quantiles,
    )
