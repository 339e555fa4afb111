"""Single-pixel protocols: transmission counting and the k-pass interferometer.

Each protocol has an analytic planner, which picks the photon budget for a
target error probability, and a seeded Monte Carlo executor. Trials draw
their randomness from ``SeedSequence([seed, *stream])`` so a batch of trials
gives the same results however it is split across workers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Union

import numpy as np
from scipy import stats

from minabs.domain import TwoObjectTask
from minabs.errors import CountingFailsError, DomainError, RegimeError
from minabs.stat_kernel import (
    BayesTestResult,
    binomial,
    gaussian_trial_count,
    optimal_binary_test,
    poisson,
)

Source = Literal["fock", "poisson"]


def trial_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for one trial, keyed by the master seed and trial coordinates."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


@dataclass(frozen=True)
class TrialOutcome:
    true_object: int
    guessed: int
    absorbed: int
    detected: int

    @property
    def correct(self) -> bool:
        return self.true_object == self.guessed


# -- counting -----------------------------------------------------------------


@dataclass(frozen=True)
class CountingPlan:
    """Photon budget and decision rule for transmission counting.

    ``N`` is the number of photons sent (Fock source) or the mean photon
    number of the coherent pulse (Poisson source). The rule guesses
    ``test.low_hypothesis`` when at most ``threshold`` photons are transmitted.
    """

    N: int
    threshold: int
    predicted_pe: float
    predicted_nabs: float
    source: str
    test: BayesTestResult

    def decide(self, transmitted: int) -> int:
        return self.test.decide(transmitted)


def _transmission_distribution(t: float, N: int, source: str):
    if source == "fock":
        return binomial(N, t)
    if source == "poisson":
        return poisson(t * N)
    raise DomainError(f"unknown source {source!r}")


def plan_counting(task: TwoObjectTask, target_pe: float, source: Source = "fock") -> CountingPlan:
    """Choose the photon number for counting transmitted photons.

    N follows from the Gaussian criterion on the transmission counts (binomial
    variance ``|alpha|^2 beta^2`` per photon for a Fock source, Poisson
    variance ``|alpha|^2`` for a coherent one). The threshold and the reported
    error come from the exact likelihood-ratio test at that N.
    """
    if source not in ("fock", "poisson"):
        raise DomainError(f"unknown source {source!r}")
    t1, t2 = abs(task.alpha1) ** 2, abs(task.alpha2) ** 2
    if math.isclose(t1, t2, rel_tol=1e-12, abs_tol=1e-15):
        raise CountingFailsError("counting fails: |alpha1| == |alpha2|, transmission carries no information")
    if not 0.0 < target_pe <= 0.5:
        raise DomainError(f"target_pe must lie in (0, 1/2], got {target_pe!r}")

    beta_sq = task.beta_mean**2
    if target_pe >= 0.5:
        N = 0
    else:
        mean_t = abs(task.alpha_mean) ** 2
        var = mean_t * beta_sq if source == "fock" else mean_t
        N = gaussian_trial_count(abs(t2 - t1), math.sqrt(var), target_pe)
    test = optimal_binary_test(
        _transmission_distribution(t1, N, source),
        _transmission_distribution(t2, N, source),
    )
    threshold = test.threshold if test.threshold is not None else int(round((t1 + t2) * N / 2))
    return CountingPlan(N, threshold, test.error_prob, beta_sq * N, source, test)


def run_counting(plan: CountingPlan, task: TwoObjectTask, true_object: int, seed: Union[int, Sequence[int]]) -> TrialOutcome:
    """Send the planned photons through object ``true_object`` and apply the plan's rule."""
    if true_object not in (1, 2):
        raise DomainError("true_object must be 1 or 2")
    rng = trial_rng(*_seed_tuple(seed))
    alpha = task.alpha1 if true_object == 1 else task.alpha2
    t = abs(alpha) ** 2
    if plan.source == "fock":
        transmitted = int(rng.binomial(plan.N, min(t, 1.0)))
        absorbed = plan.N - transmitted
    else:
        transmitted = int(rng.poisson(t * plan.N))
        absorbed = int(rng.poisson(max(0.0, 1.0 - t) * plan.N))
    return TrialOutcome(true_object, plan.decide(transmitted), absorbed, transmitted)


def _seed_tuple(seed) -> tuple[int, ...]:
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


# -- interferometer -----------------------------------------------------------


def detection_probability(alpha: complex, k: int) -> float:
    """Probability that a photon surviving ``k`` passes is detected in arm 0."""
    ak = complex(alpha) ** k
    return abs(1 + 1j * ak) ** 2 / (2.0 * (1.0 + abs(ak) ** 2))


def absorption_per_photon(alpha: complex, k: int) -> float:
    """Probability a launched photon is absorbed: half the photons take the object arm."""
    return 0.5 * (1.0 - abs(complex(alpha)) ** (2 * k))


@dataclass(frozen=True)
class InterferometerPlan:
    """k-pass Mach-Zehnder plan for a phase-only task.

    ``alpha1``/``alpha2`` are the transparencies after removing the global
    phase, so their mean is real and positive. ``n_detected`` is the number of
    surviving photons the Gaussian criterion asks for; ``N`` launched photons
    deliver that many on average.
    """

    k: int
    N: int
    alpha1: complex
    alpha2: complex
    chi1: float
    chi2: float
    n_detected: int
    predicted_nabs: float
    predicted_pe: Optional[float] = None

    @property
    def absorption_prob(self) -> float:
        return absorption_per_photon(self.alpha1, self.k)

    @property
    def survival_prob(self) -> float:
        return 1.0 - self.absorption_prob


def remove_global_phase(task: TwoObjectTask) -> tuple[complex, complex]:
    """Rotate both transparencies so that their mean is real and non-negative."""
    rot = cmath.exp(-1j * cmath.phase(task.alpha_mean)) if task.alpha_mean else 1.0
    return task.alpha1 * rot, task.alpha2 * rot


def auto_passes(task: TwoObjectTask) -> int:
    """``k = round(1/delta)`` with ``|alpha| = 1 - delta``."""
    delta = 1.0 - abs(task.alpha1)
    if delta <= 0:
        raise RegimeError("auto k needs |alpha| < 1")
    return max(1, int(round(1.0 / delta)))


def make_interferometer_plan(alpha1: complex, alpha2: complex, k: int, N: int, n_detected: Optional[int] = None) -> InterferometerPlan:
    """Assemble a plan with an explicit photon budget."""
    chi1, chi2 = detection_probability(alpha1, k), detection_probability(alpha2, k)
    nabs = N * absorption_per_photon(alpha1, k)
    n_det = n_detected if n_detected is not None else int(round(N * (1 - absorption_per_photon(alpha1, k))))
    return InterferometerPlan(k, N, complex(alpha1), complex(alpha2), chi1, chi2, n_det, nabs)


def plan_interferometer(task: TwoObjectTask, k: Union[int, Literal["auto"]], target_pe: float, exact_pe: bool = True) -> InterferometerPlan:
    """Photon budget for telling apart two objects that differ only in phase.

    The Gaussian criterion uses the arm-0 frequency of surviving photons,
    gap ``|chi2 - chi1|`` and ``sigma = 1/2``; it fixes the number of detected
    photons. Launched photons are that number divided by the survival
    probability ``(1 + |alpha|^(2k))/2``.
    """
    if not math.isclose(abs(task.alpha1), abs(task.alpha2), rel_tol=1e-12, abs_tol=1e-15):
        raise RegimeError("interferometer planning needs |alpha1| == |alpha2|; use counting")
    if task.alpha1 == task.alpha2:
        raise DomainError("objects are identical")
    if not 0.0 < target_pe < 0.5:
        raise DomainError(f"target_pe must lie in (0, 1/2), got {target_pe!r}")
    a1, a2 = remove_global_phase(task)
    if k == "auto":
        k = auto_passes(task)
    k = int(k)
    if k < 1:
        raise DomainError("k must be a positive integer")
    chi1, chi2 = detection_probability(a1, k), detection_probability(a2, k)
    gap = abs(chi2 - chi1)
    if gap == 0.0:
        raise RegimeError(f"arm-0 statistics coincide at k={k}; choose another k")
    n_det = gaussian_trial_count(gap, 0.5, target_pe)
    survival = 1.0 - absorption_per_photon(a1, k)
    N = math.ceil(n_det / survival)
    plan = InterferometerPlan(k, N, a1, a2, chi1, chi2, n_det, N * absorption_per_photon(a1, k))
    if exact_pe:
        plan = InterferometerPlan(**{**plan.__dict__, "predicted_pe": interferometer_error(plan)})
    return plan


def _conditional_error(n: int, p1: float, p2: float) -> float:
    """Exact equal-prior test error between Binomial(n, p1) and Binomial(n, p2)."""
    if n == 0:
        return 0.5
    mid = 0.5 * (p1 + p2) * n
    spread = 14.0 * math.sqrt(n * 0.25) + 2
    x = np.arange(max(0, int(mid - spread)), min(n, int(mid + spread)) + 1)
    inside = 0.5 * float(np.minimum(stats.binom.pmf(x, n, p1), stats.binom.pmf(x, n, p2)).sum())
    return inside


def interferometer_error(plan: InterferometerPlan) -> float:
    """Exact error of the optimal test on the (absorbed, arm 0, arm 1) counts.

    Absorption is equally likely under both objects, so the optimal rule is a
    likelihood-ratio test on arm-0 counts given the number of survivors; the
    error is averaged over the binomial number of survivors.
    """
    s = plan.survival_prob
    mean = plan.N * s
    sd = math.sqrt(plan.N * s * (1 - s))
    lo, hi = max(0, int(mean - 12 * sd) - 1), min(plan.N, int(mean + 12 * sd) + 1)
    ns = np.arange(lo, hi + 1)
    w = stats.binom.pmf(ns, plan.N, s)
    errs = np.array([_conditional_error(int(n), plan.chi1, plan.chi2) for n in ns])
    return float(np.dot(w, errs) / w.sum())


def _interferometer_decision(arm0: int, arm1: int, chi1: float, chi2: float) -> int:
    llr = arm0 * (math.log(chi2) - math.log(chi1)) + arm1 * (math.log1p(-chi2) - math.log1p(-chi1))
    return 2 if llr > 0 else 1


def run_interferometer(plan: InterferometerPlan, true_object: int, seed: Union[int, Sequence[int]]) -> TrialOutcome:
    """Launch ``plan.N`` photons one by one and decide from the detector counts.

    Each photon is absorbed with probability ``(1 - |alpha|^(2k))/2``;
    survivors reach arm 0 with probability ``chi_i``. The decision is the
    likelihood-ratio rule on the full (absorbed, arm 0, arm 1) counts, which
    reduces to the arm-0 count given the survivors.
    """
    if true_object not in (1, 2):
        raise DomainError("true_object must be 1 or 2")
    rng = trial_rng(*_seed_tuple(seed))
    chi = plan.chi1 if true_object == 1 else plan.chi2
    p_abs = plan.absorption_prob
    surv = 1.0 - p_abs
    absorbed, arm0, arm1 = (int(v) for v in rng.multinomial(plan.N, [p_abs, surv * chi, surv * (1.0 - chi)]))
    if plan.chi1 == plan.chi2:
        guess = 1
    else:
        guess = _interferometer_decision(arm0, arm1, plan.chi1, plan.chi2)
    return TrialOutcome(true_object, guess, absorbed, arm0)


# -- batch helpers --------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloSummary:
    trials: int
    error_rate: float
    error_se: float
    mean_absorbed: float
    absorbed_se: float

    @classmethod
    def from_outcomes(cls, outcomes: Sequence[TrialOutcome]) -> "MonteCarloSummary":
        n = len(outcomes)
        if n == 0:
            return cls(0, math.nan, math.nan, math.nan, math.nan)
        wrong = np.array([not o.correct for o in outcomes], dtype=float)
        absorbed = np.array([o.absorbed for o in outcomes], dtype=float)
        err = float(wrong.mean())
        se_abs = float(absorbed.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        return cls(n, err, math.sqrt(max(err * (1 - err), 1e-300) / n), float(absorbed.mean()), se_abs)


def alternating_object(trial: int) -> int:
    """Balanced assignment of the true object: even trials use object 1, odd ones object 2."""
    return 1 + (trial % 2)


def simulate_counting(plan: CountingPlan, task: TwoObjectTask, trials: int, seed: int, stream: Sequence[int] = ()) -> MonteCarloSummary:
    outcomes = [run_counting(plan, task, alternating_object(i), (seed, *stream, i)) for i in range(trials)]
    return MonteCarloSummary.from_outcomes(outcomes)


def simulate_interferometer(plan: InterferometerPlan, trials: int, seed: int, stream: Sequence[int] = ()) -> MonteCarloSummary:
    outcomes = [run_interferometer(plan, alternating_object(i), (seed, *stream, i)) for i in range(trials)]
    return MonteCarloSummary.from_outcomes(outcomes)
