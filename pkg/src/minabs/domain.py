"""Discrimination tasks and the closed-form absorption bounds.

A pixel is described by its transparency ``alpha``, the complex amplitude for
a photon to cross it unabsorbed. Two-object tasks are parametrised by the mean
transparency and the half-difference ``epsilon``:
``alpha1 = alpha - epsilon`` and ``alpha2 = alpha + epsilon``.

The bounds are leading-order evaluators. The additive O(1) term of the
single-pixel bound is not known in closed form and is reported as zero;
comparisons against simulations therefore allow a slack of one photon plus
one percent (see :data:`BOUND_SLACK_PHOTONS`, :data:`BOUND_SLACK_REL`).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from minabs.errors import DomainError, PreconditionError

BOUND_SLACK_PHOTONS = 1.0
BOUND_SLACK_REL = 0.01

_AMP_TOL = 1e-12


def bound_slack(bound: float) -> float:
    """Allowed shortfall of a simulated mean absorption below ``bound``."""
    return BOUND_SLACK_PHOTONS + BOUND_SLACK_REL * bound


def _check_amplitude(alpha: complex, name: str = "alpha") -> complex:
    alpha = complex(alpha)
    if abs(alpha) > 1.0 + _AMP_TOL:
        raise DomainError(f"|{name}| = {abs(alpha)!r} exceeds 1")
    return alpha


def _absorption_magnitude(alpha: complex) -> float:
    return math.sqrt(max(0.0, 1.0 - abs(alpha) ** 2))


@dataclass(frozen=True)
class Transparency:
    """One pixel: transmission amplitude ``alpha`` and absorption magnitude ``|beta|``."""

    alpha: complex
    beta_mag: float = field(init=False)

    def __post_init__(self):
        alpha = _check_amplitude(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta_mag", _absorption_magnitude(alpha))

    @property
    def transmission(self) -> float:
        return abs(self.alpha) ** 2


@dataclass(frozen=True)
class TwoObjectTask:
    alpha1: complex
    alpha2: complex
    alpha_mean: complex
    epsilon: complex
    beta_mean: float
    closeness_ok: bool

    @property
    def beta1(self) -> float:
        return _absorption_magnitude(self.alpha1)

    @property
    def beta2(self) -> float:
        return _absorption_magnitude(self.alpha2)

    @property
    def closeness_ratio(self) -> float:
        """``|epsilon| / (beta^2 / 2|alpha|)``; closeness holds when this is below 1."""
        limit = self.beta_mean**2 / (2.0 * abs(self.alpha_mean)) if self.alpha_mean else math.inf
        if limit == 0:
            return math.inf if self.epsilon else 0.0
        return abs(self.epsilon) / limit


def make_task(alpha1: complex, alpha2: complex) -> TwoObjectTask:
    """Build the two-object task for transparencies ``alpha1`` and ``alpha2``."""
    alpha1 = _check_amplitude(alpha1, "alpha1")
    alpha2 = _check_amplitude(alpha2, "alpha2")
    alpha_mean = (alpha1 + alpha2) / 2
    epsilon = (alpha2 - alpha1) / 2
    beta_mean = _absorption_magnitude(alpha_mean)
    if alpha_mean == 0:
        close = True
    else:
        close = abs(epsilon) < beta_mean**2 / (2.0 * abs(alpha_mean))
    return TwoObjectTask(alpha1, alpha2, alpha_mean, epsilon, beta_mean, bool(close))


def aligned_overlap_factor(task: TwoObjectTask) -> tuple[float, float]:
    """Per-photon overlap ``conj(a1) a2 + conj(b1) b2`` with the absorption phase aligned.

    The relative phase ``phi`` of the absorption amplitudes is chosen in
    [-pi/2, pi/2] so that the overlap is real; the cosine branch maximises it.
    Returns ``(phi, factor)``; ``factor = 1 - 2|eps|^2/beta^2 + O(eps^4)``.
    """
    if not task.closeness_ok:
        raise PreconditionError("aligned_overlap_factor requires a task satisfying closeness")
    s1s2 = _absorption_magnitude(task.alpha1) * _absorption_magnitude(task.alpha2)
    cross = task.alpha1.conjugate() * task.alpha2
    if cross.imag == 0.0:
        return 0.0, cross.real + s1s2
    if s1s2 == 0.0:
        raise PreconditionError("phase difference cannot be cancelled when an object is transparent")
    sin_phi = -cross.imag / s1s2
    if abs(sin_phi) > 1.0:
        raise PreconditionError(f"no real alignment phase exists (sin(phi) = {sin_phi!r})")
    phi = math.asin(sin_phi)
    return phi, cross.real + s1s2 * math.cos(phi)


def overlap_factor(task: TwoObjectTask, phi: float = 0.0) -> complex:
    """``conj(a1) a2 + exp(i phi) |b1 b2|`` for an explicit absorption phase."""
    s1s2 = _absorption_magnitude(task.alpha1) * _absorption_magnitude(task.alpha2)
    return task.alpha1.conjugate() * task.alpha2 + cmath.exp(1j * phi) * s1s2


def helstrom_error(f: float) -> float:
    """Minimum error for two equiprobable pure states with overlap ``f``."""
    if not 0.0 <= f <= 1.0:
        if -1e-12 < f < 0.0 or 1.0 < f < 1.0 + 1e-12:
            f = min(max(f, 0.0), 1.0)
        else:
            raise DomainError(f"overlap must lie in [0, 1], got {f!r}")
    return 0.5 * (1.0 - math.sqrt(1.0 - f * f))


def helstrom_overlap(pe: float) -> float:
    """Inverse of :func:`helstrom_error`: ``2 sqrt(pe (1 - pe))``."""
    if not 0.0 <= pe <= 0.5:
        raise DomainError(f"error probability must lie in [0, 1/2], got {pe!r}")
    return 2.0 * math.sqrt(pe * (1.0 - pe))


def _leading_bound(beta_sq: float, eps_abs: float, pe: float) -> float:
    if not 0.0 <= pe <= 0.5:
        raise DomainError(f"error probability must lie in [0, 1/2], got {pe!r}")
    one_minus_f = 1.0 - helstrom_overlap(pe)
    if eps_abs == 0.0:
        return math.inf if one_minus_f > 0 else 0.0
    return beta_sq * beta_sq * one_minus_f / (2.0 * eps_abs * eps_abs)


def single_pixel_bound(task: TwoObjectTask, pe: float) -> float:
    """Leading term of the lower bound on the mean absorbed photons, ``(N1 + N2)/2``.

    Returns ``beta^4 (1 - 2 sqrt(pe(1-pe))) / (2|eps|^2)``; ``inf`` when the
    objects are identical and ``pe < 1/2``.
    """
    if not task.closeness_ok:
        raise PreconditionError("single_pixel_bound requires a task satisfying closeness")
    return _leading_bound(task.beta_mean**2, abs(task.epsilon), pe)


@dataclass(frozen=True)
class ImageSet:
    """``L`` images over ``M`` pixels; ``images[p, i]`` is the transparency of pixel i in image p."""

    images: np.ndarray

    def __post_init__(self):
        images = np.atleast_2d(np.asarray(self.images, dtype=complex))
        if images.ndim != 2:
            raise DomainError("images must be an (L, M) array")
        if np.any(np.abs(images) > 1.0 + _AMP_TOL):
            raise DomainError("every transparency must have modulus <= 1")
        images.setflags(write=False)
        object.__setattr__(self, "images", images)

    @property
    def num_images(self) -> int:
        return self.images.shape[0]

    @property
    def num_pixels(self) -> int:
        return self.images.shape[1]

    def pixel_epsilons(self, p: int, q: int) -> np.ndarray:
        """``(alpha_i^p - alpha_i^q) / 2`` for every pixel i."""
        return (self.images[p] - self.images[q]) / 2

    def pair_epsilon(self, p: int, q: int) -> float:
        return float(np.max(np.abs(self.pixel_epsilons(p, q))))

    def max_epsilon(self) -> float:
        half = self.images[:, None, :] - self.images[None, :, :]
        return float(np.max(np.abs(half)) / 2)

    @property
    def beta(self) -> float:
        """Absorption magnitude of the mean transparency over all pixels and images."""
        return _absorption_magnitude(self.images.mean())

    @property
    def beta_abs_mean(self) -> float:
        """Arithmetic mean of ``|beta_i^p|``; agrees with :attr:`beta` to leading order."""
        return float(np.mean(np.sqrt(np.clip(1.0 - np.abs(self.images) ** 2, 0.0, None))))


def multi_pixel_bound(images: ImageSet, p: Optional[int], q: Optional[int], pe: float) -> float:
    """Lower bound on ``(N_p + N_q)/2`` for telling image ``p`` from image ``q``.

    With ``p`` and ``q`` both ``None`` the all-pairs variant is returned, using
    the largest pixel half-difference over every pair of images.
    """
    if (p is None) != (q is None):
        raise DomainError("give both p and q, or neither for the all-pairs bound")
    eps = images.max_epsilon() if p is None else images.pair_epsilon(p, q)
    return _leading_bound(images.beta**2, eps, pe)


def afm_repeat_bound(task: TwoObjectTask) -> tuple[float, float]:
    """Absorptions incurred by repeating an absorption-free protocol until it succeeds.

    Returns ``(eta, nbar_lower)`` with ``eta = |b1 b2| / |1 - conj(a1) a2|``
    and ``nbar_lower = eta / (1 - eta)``; one of the objects absorbs at least
    ``nbar_lower`` photons on average.
    """
    if task.alpha1 == task.alpha2:
        raise PreconditionError("afm_repeat_bound needs distinct transparencies")
    denom = abs(1.0 - task.alpha1.conjugate() * task.alpha2)
    if denom == 0.0:
        raise PreconditionError("1 - conj(alpha1) alpha2 vanishes")
    eta = task.beta1 * task.beta2 / denom
    if eta >= 1.0:
        return eta, math.inf
    return eta, eta / (1.0 - eta)


def repeat_until_no_absorption(p_abs: float) -> float:
    """Mean number of absorbing runs before the first clean run: ``P / (1 - P)``."""
    if not 0.0 <= p_abs < 1.0:
        raise DomainError(f"absorption probability must lie in [0, 1), got {p_abs!r}")
    return p_abs / (1.0 - p_abs)
