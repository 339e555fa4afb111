"""Probability and binary hypothesis-testing primitives.

Everything here is a pure function of immutable values. Distributions are
finite: Poisson laws are truncated and their tail mass folded into the last
bin, so the optimal equal-prior test can always be evaluated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from minabs.errors import DomainError

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class DiscreteDistribution:
    """A finite distribution on strictly increasing integer outcomes."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=float)
        if support.ndim != 1 or support.shape != probs.shape:
            raise DomainError("support and probs must be 1-d arrays of equal length")
        if support.size and np.any(np.diff(support) <= 0):
            raise DomainError("support must be strictly increasing")
        if np.any(probs < 0):
            raise DomainError("probabilities must be non-negative")
        if support.size and abs(probs.sum() - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {probs.sum()!r}, not 1")
        support.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    @property
    def variance(self) -> float:
        centred = self.support - self.mean
        return float(np.dot(centred * centred, self.probs))

    def pmf(self, outcomes) -> np.ndarray:
        """Probabilities of arbitrary integer outcomes (zero off the support)."""
        outcomes = np.asarray(outcomes, dtype=np.int64)
        idx = np.searchsorted(self.support, outcomes)
        idx_clipped = np.minimum(idx, self.support.size - 1)
        hit = (idx < self.support.size) & (self.support[idx_clipped] == outcomes)
        return np.where(hit, self.probs[idx_clipped], 0.0)


@dataclass(frozen=True)
class BayesTestResult:
    """Equal-prior likelihood-ratio rule for two hypotheses labelled 1 and 2.

    ``decision[i]`` is the hypothesis chosen when ``support[i]`` is observed.
    ``threshold`` is set only when the rule is monotone in the outcome; then
    outcomes ``<= threshold`` go to ``low_hypothesis`` and the rest to the
    other hypothesis.
    """

    support: np.ndarray
    decision: np.ndarray
    error_prob: float
    threshold: Optional[int] = None
    low_hypothesis: Optional[int] = None

    def decide(self, outcome: int) -> int:
        """Hypothesis chosen for ``outcome``; outcomes off the support clamp to the ends."""
        idx = int(np.searchsorted(self.support, outcome))
        if idx < self.support.size and self.support[idx] == outcome:
            return int(self.decision[idx])
        idx = min(max(idx, 0), self.support.size - 1)
        return int(self.decision[idx])


def _erf_initial_guess(p: float) -> float:
    # Winitzki's closed-form approximation, relative error ~2e-3.
    a = 0.147
    ln = math.log1p(-p * p)
    t = 2.0 / (math.pi * a) + ln / 2.0
    return math.copysign(math.sqrt(math.sqrt(t * t - ln / a) - t), p)


def erf_inverse(p: float, tol: float = 1e-12) -> float:
    """Inverse error function on (-1, 1).

    Newton iteration on ``erf`` seeded by a rational approximation. Used for
    ``gamma(P_E) = erf_inverse(1 - 2 P_E)``.
    """
    p = float(p)
    if not -1.0 < p < 1.0:
        raise DomainError(f"erf_inverse needs |p| < 1, got {p!r}")
    if p == 0.0:
        return 0.0
    x = _erf_initial_guess(p)
    # near +-1 the residual is taken on erfc, where 1 - |p| is exact
    q = 1.0 - abs(p)
    sign = math.copysign(1.0, p)
    for _ in range(50):
        if q < 0.5:
            resid = q - math.erfc(sign * x)
            step = sign * resid / (_TWO_OVER_SQRT_PI * math.exp(-x * x))
        else:
            step = (math.erf(x) - p) / (_TWO_OVER_SQRT_PI * math.exp(-x * x))
        x -= step
        if abs(step) <= tol * max(1.0, abs(x)):
            break
    return x


def gamma_pe(pe: float) -> float:
    """``erf_inverse(1 - 2 pe)``: the Gaussian separation needed for error ``pe``."""
    return erf_inverse(1.0 - 2.0 * pe)


def binomial(n: int, p: float) -> DiscreteDistribution:
    """Binomial(n, p) on outcomes 0..n."""
    if n < 0 or int(n) != n:
        raise DomainError(f"n must be a non-negative integer, got {n!r}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    n = int(n)
    support = np.arange(n + 1)
    probs = stats.binom.pmf(support, n, p)
    return DiscreteDistribution(support, probs / probs.sum())


def poisson(mean: float) -> DiscreteDistribution:
    """Poisson law truncated at ``mean + 12 sqrt(mean)``, tail folded into the last bin."""
    if mean < 0:
        raise DomainError(f"Poisson mean must be non-negative, got {mean!r}")
    if mean == 0:
        return DiscreteDistribution(np.array([0]), np.array([1.0]))
    cutoff = int(math.ceil(mean + 12.0 * math.sqrt(mean)))
    support = np.arange(cutoff + 1)
    probs = stats.poisson.pmf(support, mean)
    probs[-1] += stats.poisson.sf(cutoff, mean)
    return DiscreteDistribution(support, probs / probs.sum())


def optimal_binary_test(d1: DiscreteDistribution, d2: DiscreteDistribution) -> BayesTestResult:
    """Minimum-error equal-prior test between ``d1`` (hypothesis 1) and ``d2``.

    Ties in the likelihood ratio go to hypothesis 1. Outcomes with zero
    probability under both laws take the decision of the nearest outcome
    that can occur, so monotone rules keep a single threshold.
    """
    support = np.union1d(d1.support, d2.support)
    if support.size == 0:
        raise DomainError("cannot test distributions with empty support")
    p1 = d1.pmf(support)
    p2 = d2.pmf(support)
    decision = np.where(p2 > p1, 2, 1).astype(np.int8)
    # outcomes impossible under both laws copy the nearest possible outcome's decision
    live = np.flatnonzero((p1 > 0) | (p2 > 0))
    if 0 < live.size < support.size:
        nearest = live[np.clip(np.searchsorted(live, np.arange(support.size)), 0, live.size - 1)]
        left = live[np.clip(np.searchsorted(live, np.arange(support.size)) - 1, 0, live.size - 1)]
        pick = np.where(np.abs(left - np.arange(support.size)) < np.abs(nearest - np.arange(support.size)), left, nearest)
        decision = decision[pick]
    error = 0.5 * float(np.minimum(p1, p2).sum())
    threshold, low = _monotone_threshold(support, decision)
    decision.setflags(write=False)
    return BayesTestResult(support, decision, min(error, 0.5), threshold, low)


def _monotone_threshold(support: np.ndarray, decision: np.ndarray):
    changes = np.flatnonzero(np.diff(decision))
    if changes.size == 0:
        return int(support[-1]), int(decision[0])
    if changes.size == 1:
        i = int(changes[0])
        return int(support[i]), int(decision[0])
    return None, None


def gaussian_error_prob(gap: float, sigma: float, n: int) -> float:
    """Gaussian-approximation error of the midpoint rule after ``n`` trials.

    ``gap`` and ``sigma`` are per-trial; the means differ by ``n*gap`` and the
    common standard deviation is ``sigma*sqrt(n)``.
    """
    if n <= 0:
        return 0.5
    return 0.5 * math.erfc(n * gap / (math.sqrt(8.0) * sigma * math.sqrt(n)))


def gaussian_trial_count(mu_gap_per_trial: float, sigma_per_trial: float, target_pe: float) -> int:
    """Smallest N with ``N*gap / (2*sigma*sqrt(N)) >= sqrt(2)*gamma(target_pe)``."""
    if not 0.0 < target_pe < 0.5:
        raise DomainError(f"target_pe must lie in (0, 1/2), got {target_pe!r}")
    if mu_gap_per_trial <= 0 or sigma_per_trial <= 0:
        raise DomainError("gap and sigma must be positive")
    g = gamma_pe(target_pe)
    n_real = 8.0 * sigma_per_trial**2 * g * g / mu_gap_per_trial**2
    # guard against 2.0000000000000004 -> 3
    return max(1, math.ceil(n_real * (1.0 - 1e-12)))
