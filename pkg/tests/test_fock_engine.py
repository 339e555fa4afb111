import math

import numpy as np
import pytest

from minabs import DomainError, PreconditionError, ResourceError, make_task
from minabs.domain import Transparency, aligned_overlap_factor
from minabs.fock_engine import (
    JointState,
    ProtocolScript,
    audit_campaign,
    audit_trace,
    branch_overlap,
    check_unitary,
    closed_form_overlap,
    format_script,
    interaction_step,
    parse_script,
    random_state,
    random_unitary,
    run_scripted_protocol,
    unitary_step,
)


def _interaction_oracle(psi, alpha, beta, levels, stage, num_interactions):
    """Apply one interaction with explicit loops over basis labels."""
    out = np.zeros_like(psi)
    for idx in np.ndindex(*psi.shape):
        amp = psi[idx]
        if amp == 0:
            continue
        k, l, rec = idx[0], idx[1], list(idx[2:])
        assert rec[stage] == 0
        for m in range(l + 1):
            new = list(rec)
            new[stage] = l - m
            out[(k, m, *new)] += amp * math.sqrt(math.comb(l, m)) * alpha**m * beta ** (l - m)
    return out


@pytest.mark.parametrize("alpha", [0.6, 0.3 + 0.5j, 1.0, 0.0])
def test_interaction_matches_loop_oracle(alpha):
    rng = np.random.default_rng(3)
    obj = Transparency(alpha)
    psi0 = random_state((2, 4), rng)
    state = JointState.initial(psi0, 2)
    s1 = interaction_step(state, obj)
    expected = _interaction_oracle(state.amplitudes, obj.alpha, obj.beta_mag, 4, 0, 2)
    np.testing.assert_allclose(s1.amplitudes, expected, atol=1e-14)
    assert s1.norm == pytest.approx(1.0, abs=1e-13)
    s2 = interaction_step(s1, obj, beta=obj.beta_mag * 1j)
    expected = _interaction_oracle(s1.amplitudes, obj.alpha, obj.beta_mag * 1j, 4, 1, 2)
    np.testing.assert_allclose(s2.amplitudes, expected, atol=1e-14)


def test_single_interaction_absorption_is_binomial():
    psi0 = np.zeros((1, 6))
    psi0[0, 5] = 1.0
    state = interaction_step(JointState.initial(psi0, 1), Transparency(0.7))
    for m in range(6):
        p = abs(state.amplitude(0, m, (5 - m,))) ** 2
        assert p == pytest.approx(math.comb(5, m) * 0.49**m * 0.51 ** (5 - m), rel=1e-12)
    assert state.mean_absorbed() == pytest.approx(5 * 0.51)
    labels = list(state.labels(atol=1e-15))
    assert len(labels) == 6 and all(len(rec) == 1 for _, _, rec, _ in labels)


def test_interaction_preconditions():
    state = JointState.initial(np.array([[1.0, 0.0]]), 1)
    s1 = interaction_step(state, Transparency(0.5))
    with pytest.raises(PreconditionError):
        interaction_step(s1, Transparency(0.5))
    with pytest.raises(DomainError):
        interaction_step(state, Transparency(0.5), beta=0.1)


def test_unitary_step_matches_kron_with_identity():
    rng = np.random.default_rng(4)
    psi0 = random_state((2, 3), rng)
    state = interaction_step(JointState.initial(psi0, 2), Transparency(0.6))
    u = random_unitary(6, rng)
    out = unitary_step(state, u)
    records = state.amplitudes.size // 6
    big = np.kron(u, np.eye(records))
    expected = big @ state.amplitudes.reshape(-1)
    np.testing.assert_allclose(out.amplitudes.reshape(-1), expected, atol=1e-13)
    assert out.norm == pytest.approx(1.0, abs=1e-13)


def test_check_unitary():
    rng = np.random.default_rng(5)
    u = random_unitary(5, rng)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(5), atol=1e-12)
    check_unitary(u, 5)
    with pytest.raises(DomainError):
        check_unitary(u * 1.001)
    with pytest.raises(DomainError):
        check_unitary(u, 4)
    with pytest.raises(DomainError):
        check_unitary(np.ones((2, 3)))


def test_resource_guard():
    with pytest.raises(ResourceError):
        JointState.initial(np.ones((4, 11)) / math.sqrt(44), 6)


def test_overlap_after_one_interaction_matches_closed_form():
    task = make_task(0.6, 0.62)
    rng = np.random.default_rng(6)
    psi0 = random_state((1, 5), rng)
    branches = [interaction_step(JointState.initial(psi0, 1), Transparency(a)) for a in (task.alpha1, task.alpha2)]
    _, factor = aligned_overlap_factor(task)
    weights = np.abs(psi0[0]) ** 2
    expected = float(np.dot(weights, factor ** np.arange(5)))
    assert branch_overlap(*branches) == pytest.approx(expected, rel=1e-13)


def test_closed_form_overlap_agrees():
    rng = np.random.default_rng(7)
    for _ in range(100):
        z = rng.uniform(0, 1, 2) * np.exp(2j * np.pi * rng.uniform(size=2))
        task = make_task(z[0], z[1])
        for l in range(6):
            explicit, closed = closed_form_overlap(task, l, rng.uniform(-3, 3))
            assert abs(explicit - closed) < 1e-12


def test_trace_shapes_and_audit():
    task = make_task(0.6, 0.62)
    script = ProtocolScript.random(2, 3, 4, seed=11)
    trace = run_scripted_protocol(script, task)
    assert trace.f.shape == (4,)
    assert trace.f[0] == pytest.approx(1.0)
    assert trace.nbar.shape == (3, 2)
    assert trace.max_norm_error < 1e-12
    report = audit_trace(trace, task)
    assert report.passed
    assert {c.name for c in report.checks} == {"step_exact", "step_linear", "total", "absorption_bound"}
    assert report["total"].margin >= -1e-12


def test_no_interaction_protocol():
    task = make_task(0.6, 0.62)
    script = ProtocolScript.random(1, 2, 1, seed=2)
    trace = run_scripted_protocol(script, task)
    assert trace.f_final == pytest.approx(1.0)
    assert audit_trace(trace, task).passed


def test_campaign_real_task():
    res = audit_campaign(make_task(0.6, 0.62), 150, seed=1)
    assert res.passed
    assert res.max_norm_error < 1e-9


@pytest.mark.parametrize(
    "alpha1,alpha2",
    [(0.7 * np.exp(-0.01j), 0.7 * np.exp(0.01j)), (0.6 * np.exp(-0.01j), 0.62 * np.exp(0.01j))],
    ids=["phase-only", "modulus-and-phase"],
)
def test_campaign_complex_task_needs_aligned_beta_phase(alpha1, alpha2):
    # with real beta the per-photon overlap is complex and sectors of different l dephase
    task = make_task(alpha1, alpha2)
    plain = audit_campaign(task, 300, seed=2)
    aligned = audit_campaign(task, 300, seed=2, align_beta_phase=True)
    assert not plain.passed
    assert aligned.passed


def test_script_roundtrip():
    script = ProtocolScript.random(1, 2, 3, seed=5)
    text = format_script(script)
    back = parse_script(text)
    np.testing.assert_array_equal(back.psi0, script.psi0)
    for a, b in zip(back.unitaries, script.unitaries):
        np.testing.assert_array_equal(a, b)
    task = make_task(0.6, 0.62)
    np.testing.assert_array_equal(run_scripted_protocol(back, task).f, run_scripted_protocol(script, task).f)


def test_script_parsing_variants_and_errors():
    text = "# demo\nS=0 N_max=1 K=3 seed=9\npsi0 0 1\nU random 4\nU matrix\n0 1\n1 0\n"
    script = parse_script(text)
    assert (script.S, script.n_max, script.K) == (0, 1, 3)
    np.testing.assert_array_equal(script.unitaries[1], [[0, 1], [1, 0]])
    assert parse_script("S=1 N_max=1 K=1 seed=3").psi0.shape == (2, 2)
    with pytest.raises(DomainError):
        parse_script("S=0 N_max=1 K=2 seed=1")
    with pytest.raises(DomainError):
        parse_script("S=0 K=1 seed=1")
    with pytest.raises(DomainError):
        parse_script("S=0 N_max=1 K=2 seed=1\nU matrix\n1 0\n0 2\n")
    with pytest.raises(DomainError):
        parse_script("S=0 N_max=1 K=1 seed=1\nbogus line")
