"""Multi-pixel protocols: faint Hadamard images and amplitude-damped Grover search.

Rows, pixels and modes are indexed from 0; row 0 of the Sylvester matrix is
the all-ones row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import rel_entr

from minabs.domain import ImageSet
from minabs.errors import DomainError, PreconditionError, ResourceError
from minabs.single_pixel import trial_rng

MAX_HADAMARD_EXPONENT = 14
MAX_GROVER_PASSAGES = 10_000_000
MAX_GROVER_EXPONENT = 20


def sylvester_hadamard(m: int) -> np.ndarray:
    """``2^m x 2^m`` Sylvester Hadamard matrix with entries +-1."""
    if m < 0:
        raise DomainError("exponent must be non-negative")
    if m > MAX_HADAMARD_EXPONENT:
        raise ResourceError(f"Hadamard order 2^{m} exceeds the memory budget")
    h = np.ones((1, 1), dtype=np.int8)
    base = np.array([[1, 1], [1, -1]], dtype=np.int8)
    for _ in range(m):
        h = np.kron(h, base)
    return h


@dataclass(frozen=True)
class HadamardInstance:
    """Faint image ``alpha_i^p = alpha + eps * H[p, i]`` hiding row ``p``."""

    m: int
    p: int
    alpha: float
    eps: float
    H: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        H = sylvester_hadamard(self.m)
        H.setflags(write=False)
        object.__setattr__(self, "H", H)
        if not 0 <= self.p < self.M:
            raise DomainError(f"row {self.p} outside 0..{self.M - 1}")
        if self.alpha - abs(self.eps) < 0 or self.alpha + abs(self.eps) > 1:
            raise DomainError("transparencies alpha +- eps must lie in [0, 1]")

    @property
    def M(self) -> int:
        return 1 << self.m

    @property
    def transparencies(self) -> np.ndarray:
        """Pixel transparencies of the hidden image."""
        return self.alpha + self.eps * self.H[self.p].astype(float)

    def image_set(self) -> ImageSet:
        return ImageSet(self.alpha + self.eps * self.H.astype(float))

    @property
    def beta_sq(self) -> float:
        return 1.0 - self.alpha**2


# -- collective (van Dam) algorithm -----------------------------------------------


def collective_post_state(inst: HadamardInstance) -> tuple[float, np.ndarray]:
    """Survival probability and the normalised mode amplitudes after ``H/sqrt(M)``.

    The photon starts uniform over the pixels, crosses each with amplitude
    ``alpha_i^p`` and is then rotated by the normalised Hadamard transform.
    """
    M = inst.M
    psi = np.full(M, 1.0 / math.sqrt(M)) * inst.transparencies
    survival = float(np.dot(psi, psi))
    out = (inst.H @ psi) / math.sqrt(M)
    return survival, out / math.sqrt(survival)


@dataclass(frozen=True)
class CollectiveRun:
    survived: bool
    measured_mode: Optional[int]
    absorbed: int


def collective_run(inst: HadamardInstance, seed: Union[int, Sequence[int]]) -> CollectiveRun:
    """One photon through all pixels at once, followed by the Hadamard measurement."""
    if inst.p == 0:
        raise PreconditionError("the collective algorithm assumes the hidden row is not the all-ones row")
    rng = trial_rng(*_as_tuple(seed))
    survival, amps = collective_post_state(inst)
    if rng.random() >= survival:
        return CollectiveRun(False, None, 1)
    probs = np.abs(amps) ** 2
    mode = int(rng.choice(inst.M, p=probs / probs.sum()))
    return CollectiveRun(True, mode, 0)


def _as_tuple(seed) -> tuple[int, ...]:
    return tuple(int(s) for s in seed) if isinstance(seed, (tuple, list)) else (int(seed),)


def collective_runs_required(inst: HadamardInstance, target_pe: float) -> int:
    """Surviving runs needed so that row ``p`` is missed with probability at most ``target_pe``."""
    if not 0.0 < target_pe < 1.0:
        raise DomainError("target_pe must lie in (0, 1)")
    q = inst.eps**2 / (inst.alpha**2 + inst.eps**2)
    if q == 0.0:
        raise DomainError("eps = 0: the hidden row is never revealed")
    if q >= 1.0:
        return 1
    return max(1, math.ceil(math.log(target_pe) / math.log1p(-q) * (1 - 1e-12)))


@dataclass(frozen=True)
class CollectivePlan:
    runs: int
    miss_prob: float
    error_prob: float
    expected_absorbed: float
    expected_launched: float


def plan_collective(inst: HadamardInstance, target_pe: float, runs: Optional[int] = None) -> CollectivePlan:
    """Exact error and mean absorption of the stop-at-first-hit collective strategy.

    Runs are counted as surviving photons; absorbed photons are relaunched.
    On a miss the guess is uniform over the ``M - 1`` rows other than row 0.
    """
    runs = collective_runs_required(inst, target_pe) if runs is None else int(runs)
    s = inst.alpha**2 + inst.eps**2
    q = inst.eps**2 / s
    miss = (1.0 - q) ** runs
    error = miss * (1.0 - 1.0 / (inst.M - 1))
    survivals = (1.0 - miss) / q
    launched = survivals / s
    return CollectivePlan(runs, miss, error, launched - survivals, launched)


@dataclass(frozen=True)
class Identification:
    guess: int
    runs: int
    absorbed: int

    def correct(self, inst: HadamardInstance) -> bool:
        return self.guess == inst.p


def collective_identify(
    inst: HadamardInstance,
    target_pe: float,
    seed: Union[int, Sequence[int]],
    runs: Optional[int] = None,
    method: str = "fast",
) -> Identification:
    """Repeat the collective run until a mode other than 0 fires or the run budget is spent.

    ``method="sequential"`` literally repeats :func:`collective_run`;
    ``"fast"`` draws the same stopping time in closed form (geometric number
    of survivals until the first hit, negative-binomial absorptions).
    ``runs`` in the result counts surviving photons.
    """
    if inst.p == 0:
        raise PreconditionError("the collective algorithm assumes the hidden row is not the all-ones row")
    budget = collective_runs_required(inst, target_pe) if runs is None else int(runs)
    seed = _as_tuple(seed)
    rng = trial_rng(*seed)
    if method == "sequential":
        survived = absorbed = 0
        i = 0
        while survived < budget:
            r = collective_run(inst, (*seed, i))
            i += 1
            absorbed += r.absorbed
            if r.survived:
                survived += 1
                if r.measured_mode != 0:
                    return Identification(r.measured_mode, survived, absorbed)
        return Identification(_miss_guess(inst, rng), survived, absorbed)
    if method != "fast":
        raise DomainError(f"unknown method {method!r}")
    s = inst.alpha**2 + inst.eps**2
    q = inst.eps**2 / s
    first_hit = int(rng.geometric(q)) if q > 0 else budget + 1
    survived = min(first_hit, budget)
    absorbed = int(rng.negative_binomial(survived, s)) if s < 1 else 0
    if first_hit <= budget:
        return Identification(inst.p, survived, absorbed)
    return Identification(_miss_guess(inst, rng), survived, absorbed)


def _miss_guess(inst: HadamardInstance, rng: np.random.Generator) -> int:
    return int(rng.integers(1, inst.M)) if inst.M > 1 else 0


# -- individual-pixel classifier --------------------------------------------------


def row_scores(inst: HadamardInstance, transmitted: np.ndarray, N: int) -> np.ndarray:
    """``S_q = sum_i H[q, i] n_i``, with ``N alpha^2`` subtracted for the all-ones row."""
    scores = inst.H.astype(float) @ np.asarray(transmitted, dtype=float)
    scores[0] -= N * inst.alpha**2
    return scores


def individual_identify(inst: HadamardInstance, N: int, seed: Union[int, Sequence[int]]) -> Identification:
    """Send ``N/M`` photons through every pixel separately and pick the best-scoring row."""
    if N % inst.M:
        raise DomainError(f"N={N} is not a multiple of M={inst.M}")
    rng = trial_rng(*_as_tuple(seed))
    per_pixel = N // inst.M
    t = inst.transparencies**2
    n = rng.binomial(per_pixel, t)
    guess = int(np.argmax(row_scores(inst, n, N)))
    return Identification(guess, N, int(N - n.sum()))


def individual_error_model(inst: HadamardInstance, N: int) -> float:
    """Gaussian approximation to the error of :func:`individual_identify`.

    Scores are treated as independent normals with the exact means and
    variances of the row sums.
    """
    per_pixel = N / inst.M
    t = inst.transparencies**2
    var_n = per_pixel * t * (1 - t)
    Hf = inst.H.astype(float)
    means = Hf @ (per_pixel * t)
    means[0] -= N * inst.alpha**2
    sds = np.sqrt((Hf**2) @ var_n)
    others = [q for q in range(inst.M) if q != inst.p]
    mu_p, sd_p = means[inst.p], sds[inst.p]

    def integrand(z):
        x = mu_p + sd_p * z
        return stats.norm.pdf(z) * np.prod(stats.norm.cdf((x - means[others]) / sds[others]))

    ok, _ = integrate.quad(integrand, -12, 12, limit=200, points=[0.0])
    return float(min(max(1.0 - ok, 0.0), 1.0))


def individual_photons_for_error(inst: HadamardInstance, target_pe: float) -> int:
    """Smallest multiple of M photons whose modelled error is at most ``target_pe``."""
    M = inst.M

    def excess(blocks: float) -> float:
        return individual_error_model(inst, int(round(blocks)) * M) - target_pe

    hi = 1
    while excess(hi) > 0:
        hi *= 2
        if hi > 1e9:
            raise ResourceError("photon budget exceeds 1e9 per pixel")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi * M


def individual_absorption_floor(inst: HadamardInstance) -> float:
    """``beta^4 log2(M) / (4 eps^2)``: information-counting floor for pixel-by-pixel protocols."""
    return inst.beta_sq**2 * math.log2(inst.M) / (4.0 * inst.eps**2)


# -- mutual information -------------------------------------------------------------


def pixel_mutual_information(inst: HadamardInstance, pixel: int, priors: Optional[Sequence[float]] = None) -> tuple[float, float]:
    """Bits learned about the row from one photon's fate at ``pixel``.

    Returns ``(exact, approx)``: the exact mutual information of the joint
    law of (transmitted/absorbed, row) and its second-order expansion
    ``2 eps^2/(beta^2 ln 2) * Var_pi(H[., pixel])``.
    """
    M = inst.M
    pi = np.full(M, 1.0 / M) if priors is None else np.asarray(priors, dtype=float)
    if pi.shape != (M,) or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
        raise DomainError("priors must be M non-negative numbers summing to 1")
    if not 0 <= pixel < M:
        raise DomainError(f"pixel {pixel} outside 0..{M - 1}")
    col = inst.H[:, pixel].astype(float)
    pi = pi / pi.sum()
    if np.all(col == col[0]):
        return 0.0, 0.0
    t = (inst.alpha + inst.eps * col) ** 2
    t_bar = float(np.dot(pi, t))
    # KL form avoids the cancellation of the three-entropy difference
    exact = float(np.dot(pi, rel_entr(t, t_bar) + rel_entr(1 - t, 1 - t_bar))) / math.log(2)
    variance = float(np.dot(pi, (col - np.dot(pi, col)) ** 2))
    approx = 2 * inst.eps**2 / (inst.beta_sq * math.log(2)) * variance
    return max(exact, 0.0), float(approx)


def mutual_information_cap(inst: HadamardInstance) -> float:
    """``2 eps^2 / (beta^2 ln 2)`` bits per photon."""
    return 2 * inst.eps**2 / (inst.beta_sq * math.log(2))


# -- amplitude-damped Grover --------------------------------------------------------


@dataclass(frozen=True)
class GroverInstance:
    """M pixels, one marked pixel ``x0``, absorption probability ``beta2`` per passage.

    ``phase`` is the phase the marked pixel imprints per passage: ``pi`` for
    the exact oracle, or a small ``eps`` in which case each oracle call is
    ``round(pi/eps)`` consecutive passages.
    """

    m: int
    x0: int
    beta2: float
    phase: float = math.pi

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("need m >= 1")
        if self.m > MAX_GROVER_EXPONENT:
            raise ResourceError(f"state vector of 2^{self.m} amplitudes exceeds the memory budget")
        if not 0 <= self.x0 < self.M:
            raise DomainError(f"marked pixel {self.x0} outside 0..{self.M - 1}")
        if not 0.0 <= self.beta2 < 1.0:
            raise DomainError("beta2 must lie in [0, 1)")
        if not 0.0 < self.phase <= math.pi:
            raise DomainError("phase must lie in (0, pi]")

    @property
    def M(self) -> int:
        return 1 << self.m

    @property
    def passages_per_call(self) -> int:
        return 1 if self.phase == math.pi else max(1, int(round(math.pi / self.phase)))

    @property
    def oracle_phase(self) -> float:
        """Total phase imprinted on the marked pixel by one oracle call."""
        return self.phase * self.passages_per_call


def grover_iterations(M: int) -> int:
    """Iteration count maximising the ideal success probability."""
    theta = math.asin(1.0 / math.sqrt(M))
    return max(0, int(round(math.pi / (4 * theta) - 0.5)))


def ideal_grover_state(inst: GroverInstance, iterations: int) -> np.ndarray:
    """Undamped state after ``iterations`` oracle + diffusion rounds."""
    M = inst.M
    psi = np.full(M, 1.0 / math.sqrt(M), dtype=complex)
    mark = complex(math.cos(inst.oracle_phase), math.sin(inst.oracle_phase))
    for _ in range(iterations):
        psi[inst.x0] *= mark
        psi = 2 * psi.mean() - psi
    return psi


@dataclass(frozen=True)
class GroverResult:
    iterations: int
    passages: int
    success_prob: float
    survival_prob: float
    ideal_success: float
    survival_approx: float
    individual_survival: float


def grover_damped(inst: GroverInstance, iterations: Optional[int] = None) -> GroverResult:
    """Success and survival probabilities of Grover search with per-passage damping.

    Damping multiplies every amplitude by ``sqrt(1 - beta2)`` at each passage,
    so it commutes with the ideal dynamics and
    ``success = (1 - beta2)^passages * ideal_success``.
    """
    T = grover_iterations(inst.M) if iterations is None else int(iterations)
    if T < 0:
        raise DomainError("iterations must be non-negative")
    passages = T * inst.passages_per_call
    if passages > MAX_GROVER_PASSAGES:
        raise ResourceError(f"{passages} passages exceed the limit of {MAX_GROVER_PASSAGES}")
    survival = (1.0 - inst.beta2) ** passages
    ideal = float(abs(ideal_grover_state(inst, T)[inst.x0]) ** 2)
    return GroverResult(
        T,
        passages,
        survival * ideal,
        survival,
        ideal,
        math.exp(-inst.beta2 * passages),
        (1.0 - inst.beta2) ** inst.M,
    )


def grover_density_evolution(inst: GroverInstance, iterations: int) -> tuple[float, float]:
    """Reference evolution of the photon density matrix with an explicit absorbed level.

    The photon lives on ``M`` pixel modes plus one "absorbed" level; each
    passage applies the amplitude-damping channel and the per-passage phase.
    Returns ``(success, survival)``.
    """
    M = inst.M
    if M > 64:
        raise ResourceError("density evolution is meant for small M")
    dim = M + 1
    psi0 = np.zeros(dim, dtype=complex)
    psi0[:M] = 1.0 / math.sqrt(M)
    rho = np.outer(psi0, psi0.conj())
    keep = np.eye(dim, dtype=complex)
    keep[:M, :M] *= math.sqrt(1.0 - inst.beta2)
    jumps = []
    for i in range(M):
        k = np.zeros((dim, dim), dtype=complex)
        k[M, i] = math.sqrt(inst.beta2)
        jumps.append(k)
    phase = np.eye(dim, dtype=complex)
    phase[inst.x0, inst.x0] = complex(math.cos(inst.phase), math.sin(inst.phase))
    diffusion = np.eye(dim, dtype=complex)
    diffusion[:M, :M] = 2.0 / M - np.eye(M)
    for _ in range(iterations):
        for _ in range(inst.passages_per_call):
            rho = keep @ rho @ keep.conj().T + sum(k @ rho @ k.conj().T for k in jumps)
            rho = phase @ rho @ phase.conj().T
        rho = diffusion @ rho @ diffusion.conj().T
    survival = float(np.trace(rho[:M, :M]).real)
    return float(rho[inst.x0, inst.x0].real), survival


def sample_grover(inst: GroverInstance, trials: int, seed: int, iterations: Optional[int] = None) -> tuple[float, float]:
    """Monte Carlo success and survival frequencies over seeded trials."""
    res = grover_damped(inst, iterations)
    psi = ideal_grover_state(inst, res.iterations)
    probs = np.abs(psi) ** 2
    probs /= probs.sum()
    hits = survived = 0
    for i in range(trials):
        rng = trial_rng(seed, i)
        if rng.random() < res.survival_prob:
            survived += 1
            hits += int(rng.choice(inst.M, p=probs)) == inst.x0
    return hits / trials if trials else math.nan, survived / trials if trials else math.nan
