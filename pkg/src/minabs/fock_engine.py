"""Exact state-vector simulation of general single-pixel protocols.

A protocol acts on ancilla (levels ``0..S``), the photon mode sent through the
object (Fock states ``0..n_max``) and the object, whose state is the record
``(n_1, ..., n_R)`` of photons absorbed at each interaction step. Amplitudes
are stored as a dense array of shape ``(S+1, n_max+1, n_max+1, ..., n_max+1)``
with one trailing axis per interaction step.

Interaction steps expand ``|l>_P |0_j>_O`` into
``sum_m sqrt(C(l, m)) alpha^m beta^(l-m) |m>_P |(l-m)_j>_O``; unitary steps act
on ancilla and photon only, blockwise in the absorption record.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from minabs.domain import (
    Transparency,
    TwoObjectTask,
    aligned_overlap_factor,
    bound_slack,
    helstrom_error,
    single_pixel_bound,
)
from minabs.errors import DomainError, PreconditionError, ResourceError

UNITARY_TOL = 1e-10
MAX_AMPLITUDES = 2_000_000


@dataclass(frozen=True)
class JointState:
    """Joint ancilla/photon/object amplitudes after ``stage`` interaction steps."""

    amplitudes: np.ndarray
    stage: int = 0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim < 2:
            raise DomainError("amplitudes need at least ancilla and photon axes")
        if not 0 <= self.stage <= amps.ndim - 2:
            raise DomainError(f"stage {self.stage} outside 0..{amps.ndim - 2}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def initial(cls, psi0: np.ndarray, num_interactions: int) -> "JointState":
        """Embed an ancilla/photon state with the object in its unabsorbed state."""
        psi0 = np.asarray(psi0, dtype=complex)
        if psi0.ndim != 2:
            raise DomainError("psi0 must have shape (S+1, n_max+1)")
        levels = psi0.shape[1]
        shape = psi0.shape + (levels,) * num_interactions
        if math.prod(shape) > MAX_AMPLITUDES:
            raise ResourceError(f"state would hold {math.prod(shape)} amplitudes")
        amps = np.zeros(shape, dtype=complex)
        amps[(slice(None), slice(None)) + (0,) * num_interactions] = psi0
        return cls(amps, 0)

    @property
    def num_ancilla(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def photon_levels(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def num_interactions(self) -> int:
        return self.amplitudes.ndim - 2

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def amplitude(self, k: int, l: int, record: Sequence[int] = ()) -> complex:
        """Amplitude of ``|k>_A |l>_P |record, 0, ...>_O``."""
        record = tuple(record) + (0,) * (self.num_interactions - len(record))
        return complex(self.amplitudes[(k, l) + record])

    def labels(self, atol: float = 0.0) -> Iterator[tuple[int, int, tuple[int, ...], complex]]:
        """Yield ``(k, l, record, amplitude)`` for every amplitude above ``atol``."""
        for idx in zip(*np.nonzero(np.abs(self.amplitudes) > atol)):
            idx = tuple(int(i) for i in idx)
            yield idx[0], idx[1], idx[2 : 2 + self.stage], complex(self.amplitudes[idx])

    def photon_distribution(self) -> np.ndarray:
        """Probability of each photon number in the object-bound mode."""
        probs = np.abs(self.amplitudes) ** 2
        axes = (0,) + tuple(range(2, probs.ndim))
        return probs.sum(axis=axes)

    def mean_photons(self) -> float:
        """Mean number of photons that the next interaction step sends through the object."""
        dist = self.photon_distribution()
        return float(np.dot(np.arange(dist.size), dist))

    def mean_absorbed(self) -> float:
        """Expected total number of photons recorded in the object."""
        probs = np.abs(self.amplitudes) ** 2
        levels = np.arange(self.photon_levels)
        total = 0.0
        for axis in range(2, probs.ndim):
            other = tuple(a for a in range(probs.ndim) if a != axis)
            total += float(np.dot(levels, probs.sum(axis=other)))
        return total


def _interaction_tensor(alpha: complex, beta: complex, levels: int) -> np.ndarray:
    # T[m, r, l] = sqrt(C(l, m)) alpha^m beta^(l-m) when m + r == l
    t = np.zeros((levels, levels, levels), dtype=complex)
    for l in range(levels):
        for m in range(l + 1):
            t[m, l - m, l] = math.sqrt(math.comb(l, m)) * alpha**m * beta ** (l - m)
    return t


def interaction_step(state: JointState, obj: Transparency, beta: Optional[complex] = None) -> JointState:
    """Send the photon mode through the object once.

    ``beta`` defaults to the real non-negative absorption amplitude of ``obj``.
    """
    if state.stage >= state.num_interactions:
        raise PreconditionError("no interaction steps left in this state")
    beta = obj.beta_mag if beta is None else complex(beta)
    if abs(abs(beta) - obj.beta_mag) > 1e-12:
        raise DomainError("|beta| must equal sqrt(1 - |alpha|^2)")
    axis = 2 + state.stage
    amps = np.moveaxis(state.amplitudes, axis, -1)
    if np.any(amps[..., 1:]):
        raise PreconditionError(f"record entry {state.stage} is already populated")
    t = _interaction_tensor(obj.alpha, beta, state.photon_levels)
    out = np.einsum("mrl,al...->am...r", t, amps[..., 0])
    return JointState(np.moveaxis(out, -1, axis), state.stage + 1)


def check_unitary(u: np.ndarray, dim: Optional[int] = None, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DomainError(f"unitary must be square, got shape {u.shape}")
    if dim is not None and u.shape[0] != dim:
        raise DomainError(f"unitary has dimension {u.shape[0]}, expected {dim}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > tol:
        raise DomainError(f"matrix is not unitary (max deviation {err:.3g})")
    return u


def unitary_step(state: JointState, u: np.ndarray) -> JointState:
    """Apply ``U_AP (x) I_O``; ``u`` acts on the flattened ``(k, l)`` index ``k*(n_max+1) + l``."""
    dim = state.num_ancilla * state.photon_levels
    u = check_unitary(u, dim)
    shape = state.amplitudes.shape
    out = (u @ state.amplitudes.reshape(dim, -1)).reshape(shape)
    return JointState(out, state.stage)


def branch_overlap(s1: JointState, s2: JointState) -> float:
    """``|<s1|s2>|`` summed over the full ancilla/photon/object basis."""
    if s1.stage != s2.stage:
        raise PreconditionError(f"branches at different stages ({s1.stage} vs {s2.stage})")
    if s1.amplitudes.shape != s2.amplitudes.shape:
        raise PreconditionError("branches live in different truncated spaces")
    return float(abs(np.vdot(s1.amplitudes, s2.amplitudes)))


def cross_weights(s1: JointState, s2: JointState) -> np.ndarray:
    """``w_l = sum_{k, record} |conj(C1) C2|`` for each photon number l."""
    prod = np.abs(s1.amplitudes.conj() * s2.amplitudes)
    axes = (0,) + tuple(range(2, prod.ndim))
    return prod.sum(axis=axes)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_state(shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    psi = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return psi / np.linalg.norm(psi)


@dataclass(frozen=True)
class ProtocolScript:
    """Initial ancilla/photon state followed by ``K - 1`` rounds of interaction + unitary."""

    psi0: np.ndarray
    unitaries: tuple[np.ndarray, ...]
    seed: Optional[int] = None

    def __post_init__(self):
        psi0 = np.asarray(self.psi0, dtype=complex)
        if psi0.ndim != 2:
            raise DomainError("psi0 must have shape (S+1, n_max+1)")
        if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
            raise DomainError("psi0 must be normalised")
        dim = psi0.size
        unitaries = tuple(check_unitary(u, dim) for u in self.unitaries)
        object.__setattr__(self, "psi0", psi0)
        object.__setattr__(self, "unitaries", unitaries)

    @property
    def S(self) -> int:
        return self.psi0.shape[0] - 1

    @property
    def n_max(self) -> int:
        return self.psi0.shape[1] - 1

    @property
    def K(self) -> int:
        return len(self.unitaries) + 1

    @classmethod
    def random(cls, S: int, n_max: int, K: int, seed: int) -> "ProtocolScript":
        """Random initial state and Haar unitaries, all derived from ``seed``."""
        if K < 1:
            raise DomainError("K must be at least 1")
        seq = np.random.SeedSequence(seed)
        rng = np.random.default_rng(seq)
        psi0 = random_state((S + 1, n_max + 1), rng)
        dim = (S + 1) * (n_max + 1)
        unitaries = tuple(random_unitary(dim, rng) for _ in range(K - 1))
        return cls(psi0, unitaries, seed)


@dataclass(frozen=True)
class OverlapTrace:
    """Per-stage overlaps and photon statistics of a two-branch run.

    ``f[j]`` is the branch overlap before interaction step ``j`` (0-based) and
    ``f[-1]`` the final overlap. ``nbar[j, i]`` is the mean number of photons
    branch ``i`` sends through the object at step ``j``; ``weights[j, l]`` is
    the cross weight ``sum |conj(C1) C2|`` at photon number ``l``.
    """

    f: np.ndarray
    nbar: np.ndarray
    weights: np.ndarray
    total_photons: np.ndarray
    mean_absorbed: np.ndarray
    max_norm_error: float

    @property
    def f_final(self) -> float:
        return float(self.f[-1])

    @property
    def num_interactions(self) -> int:
        return self.nbar.shape[0]


def run_scripted_protocol(script: ProtocolScript, task: TwoObjectTask, align_beta_phase: bool = False) -> OverlapTrace:
    """Evolve both hypotheses through ``script`` and record their overlaps.

    Absorption amplitudes are taken real and non-negative. With
    ``align_beta_phase`` the second branch instead carries the relative phase
    that makes the per-photon overlap real (only relevant for complex tasks).
    """
    objs = (Transparency(task.alpha1), Transparency(task.alpha2))
    betas = [objs[0].beta_mag, objs[1].beta_mag]
    if align_beta_phase:
        phi, _ = aligned_overlap_factor(task)
        betas[1] = objs[1].beta_mag * complex(math.cos(phi), math.sin(phi))

    R = script.K - 1
    states = [JointState.initial(script.psi0, R), JointState.initial(script.psi0, R)]
    levels = script.n_max + 1
    f = np.empty(script.K)
    nbar = np.zeros((R, 2))
    weights = np.zeros((R, levels))
    norm_err = max(abs(s.norm - 1.0) for s in states)
    for j, u in enumerate(script.unitaries):
        f[j] = branch_overlap(*states)
        nbar[j] = [s.mean_photons() for s in states]
        weights[j] = cross_weights(*states)
        states = [unitary_step(interaction_step(s, o, b), u) for s, o, b in zip(states, objs, betas)]
        norm_err = max(norm_err, *(abs(s.norm - 1.0) for s in states))
    f[-1] = branch_overlap(*states)
    absorbed = np.array([s.mean_absorbed() for s in states])
    for arr in (f, nbar, weights, absorbed):
        arr.setflags(write=False)
    return OverlapTrace(f, nbar, weights, nbar.sum(axis=0), absorbed, norm_err)


@dataclass(frozen=True)
class AuditCheck:
    name: str
    passed: bool
    margin: float
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AuditReport:
    checks: tuple[AuditCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AuditCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


AUDIT_TOL = 1e-12


def audit_trace(trace: OverlapTrace, task: TwoObjectTask) -> AuditReport:
    """Check the overlap recursion and the absorption bound on a simulated trace.

    Checks, with ``F`` the aligned per-photon overlap:

    * ``step_exact``: ``f[j+1] >= f[j] - sum_l w_l (1 - F^l)`` for every step;
    * ``step_linear``: ``f[j+1] >= f[j] - (1 - F)(n1 + n2)/2`` for every step;
    * ``total``: ``f_K >= 1 - (1 - F)(N1 + N2)/2``;
    * ``absorption_bound``: mean absorption plus slack reaches the
      single-pixel bound evaluated at the Helstrom error of ``f_K``.

    Failures are reported, never raised. Margins are worst-case
    (``lhs - rhs``); a margin above ``-AUDIT_TOL`` passes.
    """
    _, factor = aligned_overlap_factor(task)
    loss = 1.0 - factor
    levels = np.arange(trace.weights.shape[1])
    delta = 1.0 - factor**levels
    f = trace.f
    exact_rhs = f[:-1] - trace.weights @ delta
    linear_rhs = f[:-1] - loss * trace.nbar.sum(axis=1) / 2
    exact_m = f[1:] - exact_rhs
    linear_m = f[1:] - linear_rhs
    exact_margin = float(exact_m.min()) if exact_m.size else 0.0
    linear_margin = float(linear_m.min()) if linear_m.size else 0.0

    total_rhs = 1.0 - loss * float(trace.total_photons.sum()) / 2
    total_margin = trace.f_final - total_rhs

    pe = helstrom_error(min(trace.f_final, 1.0))
    bound = single_pixel_bound(task, pe)
    mean_abs = float(trace.mean_absorbed.mean())
    slack = bound_slack(bound)
    bound_margin = mean_abs + slack - bound

    checks = (
        AuditCheck("step_exact", exact_margin > -AUDIT_TOL, exact_margin, {"margins": exact_m.tolist()}),
        AuditCheck("step_linear", linear_margin > -AUDIT_TOL, linear_margin, {"margins": linear_m.tolist()}),
        AuditCheck("total", total_margin > -AUDIT_TOL, total_margin, {"f_K": trace.f_final, "rhs": total_rhs}),
        AuditCheck(
            "absorption_bound",
            bound_margin > -AUDIT_TOL,
            bound_margin,
            {"mean_absorbed": mean_abs, "bound": bound, "slack": slack, "pe": pe},
        ),
    )
    return AuditReport(checks)


def closed_form_overlap(task: TwoObjectTask, l: int, phi: float = 0.0) -> tuple[complex, complex]:
    """Post-absorption overlap for ``l`` photons: explicit binomial sum and closed form."""
    a = task.alpha1.conjugate() * task.alpha2
    b = task.beta1 * task.beta2 * complex(math.cos(phi), math.sin(phi))
    explicit = sum(math.comb(l, m) * a**m * b ** (l - m) for m in range(l + 1))
    return complex(explicit), complex((a + b) ** l)


@dataclass(frozen=True)
class CampaignResult:
    scripts: int
    failures: dict
    worst_margins: dict
    max_norm_error: float

    @property
    def passed(self) -> bool:
        return not any(self.failures.values())


def audit_campaign(
    task: TwoObjectTask,
    n_scripts: int,
    seed: int,
    max_s: int = 3,
    max_n: int = 3,
    max_k: int = 5,
    align_beta_phase: bool = False,
) -> CampaignResult:
    """Audit ``n_scripts`` random protocols with sizes drawn uniformly up to the given caps."""
    names = ("step_exact", "step_linear", "total", "absorption_bound")
    failures = dict.fromkeys(names, 0)
    worst = dict.fromkeys(names, math.inf)
    norm_err = 0.0
    for i in range(n_scripts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        S = int(rng.integers(0, max_s + 1))
        n_max = int(rng.integers(1, max_n + 1))
        K = int(rng.integers(1, max_k + 1))
        script = ProtocolScript.random(S, n_max, K, int(rng.integers(2**63)))
        trace = run_scripted_protocol(script, task, align_beta_phase)
        report = audit_trace(trace, task)
        norm_err = max(norm_err, trace.max_norm_error)
        for c in report.checks:
            failures[c.name] += not c.passed
            worst[c.name] = min(worst[c.name], c.margin)
    return CampaignResult(n_scripts, failures, worst, norm_err)


# -- text format -------------------------------------------------------------
#
#   # comment
#   S=1 N_max=2 K=3 seed=7
#   psi0 random                      (optional, default: random from header seed)
#   psi0 <D complex amplitudes>      (row-major over (k, l))
#   U random <seed>
#   U matrix
#   <D rows of D complex entries>
#
# Complex entries use Python literal syntax, e.g. 0.5, -1j, 0.3-0.2j.

_HEADER_RE = re.compile(r"(\w+)\s*=\s*(-?\d+)")


def _parse_complex_row(line: str) -> list[complex]:
    return [complex(tok) for tok in line.split()]


def parse_script(text: str) -> ProtocolScript:
    """Parse the line-oriented script format described in the module source."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise DomainError("empty protocol script")
    header = dict((k.lower(), int(v)) for k, v in _HEADER_RE.findall(lines[0]))
    missing = {"s", "n_max", "k", "seed"} - header.keys()
    if missing:
        raise DomainError(f"script header lacks {sorted(missing)}")
    S, n_max, K, seed = header["s"], header["n_max"], header["k"], header["seed"]
    dim = (S + 1) * (n_max + 1)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    psi0 = None
    unitaries = []
    i = 1
    while i < len(lines):
        tokens = lines[i].split()
        if tokens[0] == "psi0":
            if tokens[1:] == ["random"]:
                psi0 = random_state((S + 1, n_max + 1), rng)
            else:
                amps = np.array(_parse_complex_row(" ".join(tokens[1:])))
                if amps.size != dim:
                    raise DomainError(f"psi0 needs {dim} amplitudes, got {amps.size}")
                psi0 = amps.reshape(S + 1, n_max + 1)
            i += 1
        elif tokens[0] == "U" and len(tokens) == 3 and tokens[1] == "random":
            unitaries.append(random_unitary(dim, np.random.default_rng(np.random.SeedSequence(int(tokens[2])))))
            i += 1
        elif tokens[0] == "U" and tokens[1:] == ["matrix"]:
            rows = [_parse_complex_row(ln) for ln in lines[i + 1 : i + 1 + dim]]
            if len(rows) != dim or any(len(r) != dim for r in rows):
                raise DomainError(f"explicit unitary must have {dim} rows of {dim} entries")
            unitaries.append(np.array(rows))
            i += 1 + dim
        else:
            raise DomainError(f"unrecognised script line: {lines[i]!r}")
    if psi0 is None:
        psi0 = random_state((S + 1, n_max + 1), rng)
    if len(unitaries) != K - 1:
        raise DomainError(f"header declares K={K} but script has {len(unitaries)} rounds")
    return ProtocolScript(psi0, tuple(unitaries), seed)


def format_script(script: ProtocolScript, seed: Optional[int] = None) -> str:
    """Serialise ``script`` with explicit amplitudes and matrices at round-trip precision."""
    seed = script.seed if seed is None else seed
    fmt = lambda z: repr(complex(z))  # noqa: E731
    out = io.StringIO()
    out.write(f"S={script.S} N_max={script.n_max} K={script.K} seed={seed or 0}\n")
    out.write("psi0 " + " ".join(fmt(z) for z in script.psi0.ravel()) + "\n")
    for u in script.unitaries:
        out.write("U matrix\n")
        for row in u:
            out.write(" ".join(fmt(z) for z in row) + "\n")
    return out.getvalue()
