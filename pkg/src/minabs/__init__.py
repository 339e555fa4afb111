"""Simulation and verification of minimal absorption measurement protocols.

Single-pixel and multi-pixel discrimination tasks where the figure of merit is
the mean number of photons absorbed by the object, together with the closed
form lower bounds and an exact Fock-space engine that audits them.
"""

from minabs.domain import (
    ImageSet,
    Transparency,
    TwoObjectTask,
    afm_repeat_bound,
    aligned_overlap_factor,
    helstrom_error,
    make_task,
    multi_pixel_bound,
    single_pixel_bound,
)
from minabs.errors import (
    CountingFailsError,
    DomainError,
    PreconditionError,
    RegimeError,
    ResourceError,
)
from minabs.stat_kernel import (
    BayesTestResult,
    DiscreteDistribution,
    binomial,
    erf_inverse,
    gamma_pe,
    gaussian_trial_count,
    optimal_binary_test,
    poisson,
)

__version__ = "0.1.0"

__all__ = [
    "BayesTestResult",
    "CountingFailsError",
    "DiscreteDistribution",
    "DomainError",
    "ImageSet",
    "PreconditionError",
    "RegimeError",
    "ResourceError",
    "Transparency",
    "TwoObjectTask",
    "afm_repeat_bound",
    "aligned_overlap_factor",
    "binomial",
    "erf_inverse",
    "gamma_pe",
    "gaussian_trial_count",
    "helstrom_error",
    "make_task",
    "multi_pixel_bound",
    "optimal_binary_test",
    "poisson",
    "single_pixel_bound",
]
