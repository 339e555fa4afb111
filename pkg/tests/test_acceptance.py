"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed even
under output capture), or directly with ``python3 tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest

from minabs import CountingFailsError, ImageSet, gamma_pe, make_task
from minabs.cli import main as cli_main
from minabs.domain import afm_repeat_bound, aligned_overlap_factor, bound_slack, multi_pixel_bound
from minabs.fock_engine import audit_campaign, closed_form_overlap
from minabs.multi_pixel import (
    GroverInstance,
    HadamardInstance,
    collective_identify,
    collective_post_state,
    collective_runs_required,
    grover_damped,
    grover_density_evolution,
    individual_absorption_floor,
    individual_identify,
    individual_photons_for_error,
    mutual_information_cap,
    pixel_mutual_information,
    plan_collective,
)
from minabs.single_pixel import (
    plan_counting,
    plan_interferometer,
    simulate_counting,
    simulate_interferometer,
    trial_rng,
)

PE = 0.1
_RESULTS = {}


@pytest.fixture
def verdict(request):
    """Yield a recorder; on teardown print one line for the criterion."""
    capman = request.config.pluginmanager.getplugin("capturemanager")
    box = {}

    def record(number, ok, detail):
        box.update(number=number, ok=bool(ok), detail=detail)
        return bool(ok)

    yield record
    if box:
        line = f"criterion {box['number']:>2}: {'PASS' if box['ok'] else 'FAIL'}  {box['detail']}"
        _RESULTS[box["number"]] = box["ok"]
        if capman is not None:
            with capman.global_and_fixture_disabled():
                print("\n" + line)
        else:
            print(line)


def phase_task(alpha, eps):
    eta = math.asin(eps / alpha)
    return make_task(alpha * complex(math.cos(eta), -math.sin(eta)), alpha * complex(math.cos(eta), math.sin(eta)))


def test_criterion_01_counting(verdict):
    g2 = gamma_pe(PE) ** 2
    beta4 = (1 - 0.6**2) ** 2
    lines, ok, products = [], True, []
    for i, eps in enumerate((0.02, 0.01, 0.005)):
        task = make_task(0.6 - eps, 0.6 + eps)
        plan = plan_counting(task, PE)
        formula = beta4 * g2 / (2 * eps**2)
        rel = abs(plan.predicted_nabs / formula - 1)
        mc = simulate_counting(plan, task, 10_000, seed=2024, stream=(i,))
        err_ok = mc.error_rate <= PE + 3 * mc.error_se
        abs_ok = abs(mc.mean_absorbed - plan.predicted_nabs) <= 3 * mc.absorbed_se
        ok &= rel <= 0.02 and err_ok and abs_ok
        products.append(plan.predicted_nabs * eps**2)
        lines.append(f"eps={eps}: plan {plan.predicted_nabs:.1f} vs {formula:.1f}, mc err {mc.error_rate:.4f}")
    spread = max(products) / min(products) - 1
    ok &= spread <= 0.02
    assert verdict(1, ok, "; ".join(lines) + f"; N*eps^2 spread {spread:.2%}")


def test_criterion_02_phase_only_counting_fails(verdict):
    task = make_task(0.7 * complex(math.cos(0.01), -math.sin(0.01)), 0.7 * complex(math.cos(0.01), math.sin(0.01)))
    raised = 0
    for _ in range(3):
        try:
            plan_counting(task, PE)
        except CountingFailsError:
            raised += 1
    assert verdict(2, raised == 3, f"CountingFailsError raised {raised}/3 times")


def test_criterion_03_interferometer(verdict):
    g2 = gamma_pe(PE) ** 2
    plan = plan_interferometer(phase_task(0.8, 0.01), 1, PE)
    formula = g2 * 0.36 * 1.64 / (2 * 0.01**2)
    ok = abs(plan.predicted_nabs / formula - 1) <= 0.05
    parts = [f"k=1 plan {plan.predicted_nabs:.1f} vs {formula:.1f}"]
    mc = simulate_interferometer(plan, 2000, seed=77)
    parts.append(f"mc err {mc.error_rate:.3f}")
    ratios, per_photon = [], []
    for delta in (0.1, 0.05, 0.025):
        a = 1 - delta
        p = plan_interferometer(phase_task(a, 1e-3), "auto", PE, exact_pe=False)
        ratios.append(p.predicted_nabs / delta**2)
        target = 0.5 * (1 - a ** (2 * p.k))
        ok &= abs(p.absorption_prob / target - 1) <= 0.02
        per_photon.append(p.absorption_prob)
    scale = max(ratios) / min(ratios) - 1
    ok &= scale <= 0.20
    limit = 0.5 * (1 - math.exp(-2))
    ok &= abs(per_photon[0] - limit) > abs(per_photon[-1] - limit)
    parts.append(f"nabs/delta^2 spread {scale:.1%}; per-photon {', '.join(f'{x:.4f}' for x in per_photon)} -> {limit:.4f}")
    assert verdict(3, ok, "; ".join(parts))


def test_criterion_04_bound_audit(verdict):
    task = make_task(0.6, 0.62)
    res = audit_campaign(task, 1000, seed=4)
    rng = np.random.default_rng(44)
    worst = 0.0
    for _ in range(1000):
        z = rng.uniform(0, 1, 2) ** 0.5 * np.exp(2j * np.pi * rng.uniform(size=2))
        t = make_task(z[0], z[1])
        phi = rng.uniform(-np.pi, np.pi)
        for l in range(5):
            explicit, closed = closed_form_overlap(t, l, phi)
            worst = max(worst, abs(explicit - closed))
    ok = res.passed and res.max_norm_error < 1e-9 and worst <= 1e-12
    detail = f"failures {res.failures}; norm drift {res.max_norm_error:.1e}; closed-form gap {worst:.1e}"
    assert verdict(4, ok, detail)


def test_criterion_05_alignment_remainder(verdict):
    """Halving |eps| must shrink the remainder by a factor in [6, 10].

    The aligned factor is even in eps (swapping the objects maps eps to -eps
    and leaves it unchanged), so the remainder is quartic and shrinks by ~16.
    This criterion is expected to fail; see the decisions ledger.
    """
    rng = np.random.default_rng(5)
    shrinks = []
    while len(shrinks) < 100:
        a = rng.uniform(0.3, 0.8) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        beta2 = 1 - abs(a) ** 2
        direction = np.exp(1j * rng.uniform(0, 2 * np.pi))
        eps = 0.05 * beta2 * direction
        rem = []
        for e in (eps, eps / 2):
            task = make_task(a - e, a + e)
            _, factor = aligned_overlap_factor(task)
            rem.append(abs(factor - (1 - 2 * abs(e) ** 2 / task.beta_mean**2)))
        shrinks.append(rem[0] / rem[1])
    lo, hi = min(shrinks), max(shrinks)
    ok = 6 <= lo and hi <= 10
    assert verdict(5, ok, f"shrink factor range [{lo:.2f}, {hi:.2f}] (required within [6, 10])")


def test_criterion_06_hadamard_collective(verdict):
    inst = HadamardInstance(3, 5, 0.6, 0.01)
    _, amps = collective_post_state(inst)
    norm = math.hypot(0.6, 0.01)
    expected = np.zeros(8)
    expected[0], expected[5] = 0.6 / norm, 0.01 / norm
    amp_err = float(np.max(np.abs(amps - expected)))
    plan = plan_collective(inst, PE)
    trials = 4000
    results = [collective_identify(inst, PE, (6, i)) for i in range(trials)]
    err = np.mean([not r.correct(inst) for r in results])
    absorbed = np.array([r.absorbed for r in results], dtype=float)
    bound = max(multi_pixel_bound(inst.image_set(), None, None, PE), multi_pixel_bound(ImageSet([[0.59], [0.61]]), 0, 1, PE))
    ok = amp_err < 1e-12 and plan.error_prob <= PE and err <= PE
    ok &= plan.expected_absorbed >= bound - bound_slack(bound) and absorbed.mean() >= bound - bound_slack(bound)
    detail = (f"amp err {amp_err:.1e}; runs {plan.runs}; error planned {plan.error_prob:.4f} mc {err:.4f}; "
              f"absorbed planned {plan.expected_absorbed:.0f} mc {absorbed.mean():.0f} >= bound {bound:.1f}")
    assert verdict(6, ok, detail)


def test_criterion_07_log_m_gain(verdict):
    trials = 2000
    Ms, ratios, ok = [], [], True
    notes = []
    for m in range(3, 8):
        inst = HadamardInstance(m, 1, 0.6, 0.01)
        M = inst.M
        N = individual_photons_for_error(inst, PE)
        ind = [individual_identify(inst, N, (7, m, i)) for i in range(trials)]
        ind_err = np.mean([not r.correct(inst) for r in ind])
        ind_abs = np.mean([r.absorbed for r in ind])
        runs = collective_runs_required(inst, PE / (1 - 1 / (M - 1)))
        plan = plan_collective(inst, PE, runs)
        col = [collective_identify(inst, PE, (70, m, i), runs=runs) for i in range(trials)]
        col_err = np.mean([not r.correct(inst) for r in col])
        se = math.sqrt(PE * (1 - PE) / trials)
        ok &= abs(ind_err - PE) <= 3 * se and abs(col_err - PE) <= 3 * se
        floor = individual_absorption_floor(inst)
        ok &= ind_abs >= 0.9 * floor
        Ms.append(M)
        ratios.append(ind_abs / plan.expected_absorbed)
        notes.append(f"M={M}: err {ind_err:.3f}/{col_err:.3f} ratio {ratios[-1]:.2f}")
    x = np.log2(Ms)
    y = np.array(ratios)
    a = float(x @ y / (x @ x))
    resid = np.abs(y - a * x) / (a * x)
    ok &= a > 0 and resid.max() < 0.30
    assert verdict(7, ok, f"a={a:.4f}, max residual {resid.max():.1%}; " + "; ".join(notes))


def test_criterion_08_mutual_information(verdict):
    rng = np.random.default_rng(8)
    ok = True
    worst_cap, ratios = 0.0, []
    for m in (2, 3, 4):
        inst = HadamardInstance(m, 1, 0.6, 1e-3)
        cap = mutual_information_cap(inst)
        priors = [None] + [rng.dirichlet(np.ones(inst.M)) for _ in range(3)]
        for pr in priors:
            for pixel in range(inst.M):
                exact, approx = pixel_mutual_information(inst, pixel, pr)
                worst_cap = max(worst_cap, exact / cap)
                if approx > 0:
                    ratios.append(exact / approx)
    ok = worst_cap <= 1.05 and max(abs(r - 1) for r in ratios) <= 0.01
    trend = []
    for eps in (1e-1, 1e-2, 1e-3):
        exact, approx = pixel_mutual_information(HadamardInstance(3, 1, 0.6, eps), 1)
        trend.append(abs(exact / approx - 1))
    ok &= trend[0] > trend[1] > trend[2]
    detail = f"max I/cap {worst_cap:.6f}; max |exact/approx - 1| {max(abs(r - 1) for r in ratios):.1e}; trend {[f'{t:.1e}' for t in trend]}"
    assert verdict(8, ok, detail)


def test_criterion_09_grover(verdict):
    worst = 0.0
    for m in (1, 2, 3, 4):
        for beta2 in (0.0, 1e-3, 0.02, 0.1):
            for phase in (math.pi, 0.3):
                inst = GroverInstance(m, (3 * m) % (1 << m), beta2, phase)
                res = grover_damped(inst)
                succ, surv = grover_density_evolution(inst, res.iterations)
                worst = max(worst, abs(res.success_prob - succ), abs(res.survival_prob - surv),
                            abs(res.success_prob - res.survival_prob * res.ideal_success))
    big = grover_damped(GroverInstance(10, 17, 1e-4))
    ind = math.exp(-1e-4 * 1024)
    ok = worst <= 1e-12 and big.survival_prob >= 0.99 and abs(big.individual_survival - ind) < 1e-3
    detail = f"oracle gap {worst:.1e}; M=1024 survival {big.survival_prob:.4f} vs individual {big.individual_survival:.4f}"
    assert verdict(9, ok, detail)


def test_criterion_10_afm_repeat(verdict):
    a = 0.6
    beta2 = 1 - a * a
    eps = beta2 / 100
    task = make_task(a - eps, a + eps)
    _, nbar = afm_repeat_bound(task)
    approx = task.beta_mean**4 / (2 * eps**2)
    rel = abs(nbar / approx - 1)
    eta0, nbar0 = afm_repeat_bound(make_task(0.6, 0.62))
    rel0 = abs(nbar0 / 1971.29205 - 1)
    trials = 10_000
    counts = np.array([trial_rng(10, i).geometric(1 - eta0) - 1 for i in range(trials)], dtype=float)
    se = counts.std(ddof=1) / math.sqrt(trials)
    mc_ok = abs(counts.mean() - nbar0) <= 3 * se
    ok = rel <= 0.005 and rel0 <= 0.005 and mc_ok
    detail = (f"eps=beta^2/100: {nbar:.1f} vs {approx:.1f} ({rel:.2%}); task(0.6,0.62): {nbar0:.1f}; "
              f"mc {counts.mean():.1f} +- {se:.1f}")
    assert verdict(10, ok, detail)


def test_criterion_11_reproducibility(verdict, tmp_path):
    runs = [
        ["count", "--trials", "400"],
        ["interf", "--trials", "200"],
        ["hadamard", "--trials", "100"],
        ["grover", "--trials", "100", "--m", "6"],
        ["afm", "--trials", "300"],
        ["bound-audit", "--trials", "40"],
    ]
    same = 0
    for i, args in enumerate(runs):
        texts = []
        for j, workers in enumerate(("1", "1", "3")):
            out = tmp_path / f"r{i}_{j}.json"
            code = cli_main([*args, "--seed", "11", "--format", "json", "--workers", workers, "--out", str(out)])
            assert code == 0
            texts.append(out.read_bytes())
        same += texts[0] == texts[1] == texts[2]
    assert verdict(11, same == len(runs), f"{same}/{len(runs)} experiments byte-identical across reruns and worker counts")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
