import math

import numpy as np
import pytest
from scipy import stats

from minabs import CountingFailsError, DomainError, RegimeError, gamma_pe, make_task
from minabs.single_pixel import (
    absorption_per_photon,
    auto_passes,
    detection_probability,
    interferometer_error,
    make_interferometer_plan,
    plan_counting,
    plan_interferometer,
    remove_global_phase,
    run_counting,
    run_interferometer,
    simulate_counting,
    simulate_interferometer,
)


def phase_task(alpha, eps):
    eta = math.asin(eps / alpha)
    return make_task(alpha * np.exp(-1j * eta), alpha * np.exp(1j * eta))


def test_counting_plan_reference():
    task = make_task(0.59, 0.61)
    plan = plan_counting(task, 0.1)
    assert plan.N == 2628
    assert plan.predicted_nabs == pytest.approx(0.64 * 2628)
    assert plan.test.low_hypothesis == 1
    # independent error: binomial tails on either side of the threshold
    t = plan.threshold
    err = 0.5 * (stats.binom.sf(t, plan.N, 0.59**2) + stats.binom.cdf(t, plan.N, 0.61**2))
    assert plan.predicted_pe == pytest.approx(err, abs=1e-12)
    assert plan.predicted_pe <= 0.1 + 1e-3


def test_counting_absorption_scales_as_inverse_eps_squared():
    products = []
    for eps in (0.02, 0.01, 0.005):
        plan = plan_counting(make_task(0.6 - eps, 0.6 + eps), 0.1)
        products.append(plan.predicted_nabs * eps**2)
        assert plan.predicted_nabs == pytest.approx(0.64**2 * gamma_pe(0.1) ** 2 / (2 * eps**2), rel=0.02)
    assert max(products) / min(products) < 1.02


def test_counting_failures_and_edges():
    with pytest.raises(CountingFailsError):
        plan_counting(phase_task(0.7, 0.01), 0.1)
    with pytest.raises(DomainError):
        plan_counting(make_task(0.59, 0.61), 0.0)
    with pytest.raises(DomainError):
        plan_counting(make_task(0.59, 0.61), 0.1, source="thermal")
    half = plan_counting(make_task(0.59, 0.61), 0.5)
    assert half.N == 0 and half.predicted_nabs == 0.0


def test_poisson_source_needs_more_photons():
    task = make_task(0.59, 0.61)
    fock, coh = plan_counting(task, 0.1), plan_counting(task, 0.1, "poisson")
    assert coh.N > fock.N
    assert coh.N == pytest.approx(fock.N / 0.64, rel=1e-3)
    mc = simulate_counting(coh, task, 2000, seed=3)
    assert abs(mc.mean_absorbed - coh.predicted_nabs) < 4 * mc.absorbed_se


def test_counting_trials_are_seeded():
    task = make_task(0.59, 0.61)
    plan = plan_counting(task, 0.1)
    assert run_counting(plan, task, 1, (5, 0, 3)) == run_counting(plan, task, 1, (5, 0, 3))
    draws = {run_counting(plan, task, 1, (5, 0, i)).detected for i in range(20)}
    assert len(draws) > 10
    with pytest.raises(DomainError):
        run_counting(plan, task, 3, 1)


def test_counting_monte_carlo_matches_plan():
    task = make_task(0.59, 0.61)
    plan = plan_counting(task, 0.1)
    mc = simulate_counting(plan, task, 4000, seed=9)
    assert abs(mc.error_rate - plan.predicted_pe) < 3 * mc.error_se
    assert abs(mc.mean_absorbed - plan.predicted_nabs) < 3 * mc.absorbed_se


def _mz_detection(alpha, k):
    """Arm-0 probability of a surviving photon from explicit beam-splitter matrices, biased to half fringe."""
    bs = np.array([[1, 1j], [1j, 1]]) / math.sqrt(2)
    obj = np.diag([alpha**k, 1j])  # pi/2 bias plate in the reference arm
    out = bs @ obj @ bs @ np.array([1.0, 0.0])
    probs = np.abs(out) ** 2
    return probs[0] / probs.sum(), 1 - probs.sum()


@pytest.mark.parametrize("alpha,k", [(0.8, 1), (0.8 * np.exp(0.3j), 1), (0.95 * np.exp(-0.02j), 20), (1j, 3)])
def test_detection_probability_matches_beam_splitter_model(alpha, k):
    chi, lost = _mz_detection(alpha, k)
    assert detection_probability(alpha, k) == pytest.approx(chi, abs=1e-14)
    assert absorption_per_photon(alpha, k) == pytest.approx(lost, abs=1e-14)


def test_interferometer_reference():
    task = phase_task(0.8, 0.01)
    plan = plan_interferometer(task, 1, 0.1)
    expected = gamma_pe(0.1) ** 2 * 0.36 * 1.64 / (2 * 0.01**2)
    assert plan.predicted_nabs == pytest.approx(expected, rel=0.05)
    assert plan.absorption_prob == pytest.approx(0.18)
    assert plan.predicted_pe == pytest.approx(0.1, abs=0.002)
    a1, a2 = remove_global_phase(task)
    assert (a1 + a2).imag == pytest.approx(0, abs=1e-15)


def test_interferometer_error_matches_trinomial_enumeration():
    plan = make_interferometer_plan(0.8 * np.exp(-0.2j), 0.8 * np.exp(0.2j), 1, 30)
    pa = plan.absorption_prob
    total = 0.0
    for a in range(31):
        for n0 in range(31 - a):
            n1 = 30 - a - n0
            coeff = math.factorial(30) / (math.factorial(a) * math.factorial(n0) * math.factorial(n1))
            p = [coeff * pa**a * ((1 - pa) * c) ** n0 * ((1 - pa) * (1 - c)) ** n1 for c in (plan.chi1, plan.chi2)]
            total += 0.5 * min(p)
    assert interferometer_error(plan) == pytest.approx(total, abs=1e-12)


def test_auto_passes_and_absorption_limit():
    for delta, k in ((0.1, 10), (0.05, 20), (0.025, 40)):
        task = phase_task(1 - delta, 1e-3)
        assert auto_passes(task) == k
        plan = plan_interferometer(task, "auto", 0.1, exact_pe=False)
        assert plan.k == k
        assert plan.absorption_prob == pytest.approx(0.5 * (1 - (1 - delta) ** (2 * k)))
    assert absorption_per_photon(0.95, 20) == pytest.approx(0.4357, abs=1e-4)
    with pytest.raises(RegimeError):
        auto_passes(phase_task(1.0, 1e-3))


def test_interferometer_regimes():
    with pytest.raises(RegimeError):
        plan_interferometer(make_task(0.59, 0.61), 1, 0.1)
    with pytest.raises(DomainError):
        plan_interferometer(phase_task(0.8, 0.01), 0, 0.1)


def test_interferometer_monte_carlo():
    plan = plan_interferometer(phase_task(0.8, 0.02), 1, 0.1)
    mc = simulate_interferometer(plan, 3000, seed=4)
    assert abs(mc.error_rate - plan.predicted_pe) < 3 * mc.error_se
    assert abs(mc.mean_absorbed - plan.predicted_nabs) < 3 * mc.absorbed_se
    assert run_interferometer(plan, 2, (1, 2)) == run_interferometer(plan, 2, (1, 2))
