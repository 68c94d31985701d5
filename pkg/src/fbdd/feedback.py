"""
Single-bit feedback cycles on ancilla (x) system (x) environment.

One cycle, starting from an ancilla in |0>:

1. Hadamard on the ancilla, preparing (|0> + |1>)/sqrt(2).
2. Conditional gate C_{U_S}.
3. Joint evolution I_A (x) U_SE (or U_A (x) U_SE with ancilla drift).
4. Conditional gate C_{U_S^dag}.
5. Hadamard on the ancilla and projective measurement in {|0>, |1>}.
6. On outcome 1, the reset operator (default X_A (x) U_fb) returns the
   ancilla to |0> and applies the system correction.

Outcome b then acts on system (x) environment through the branch operators
A+ = (U + U_S^dag U U_S) / 2 and A- = (U - U_S^dag U U_S) / 2.

States are density operators throughout so mixed environments and
ensemble channels are handled uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .cxmat import as_matrix, dag, expm, identity, is_unitary, kron, partial_trace
from .decoupling import PulseSequence, evolve_n_cycles, sel_dd
from .errors import DimensionError, ValidationError
from .model import QubitErrorModel, as_open_system, propagator, total_hamiltonian
from .pauli import HADAMARD, I2, PROJ0, PROJ1, SX, SY, SZ, conditional_gate

EXACT = "exact"
SAMPLED = "sampled"


@dataclass(frozen=True)
class FeedbackCycleSpec:
    """Parameters of one feedback cycle.

    ``inner`` is either a free-evolution duration or a ``PulseSequence``
    (run ``inner_repeats`` times) for the nested FED/DEF protocols.
    ``ancilla_drift`` holds (theta_rate, phi_rate) of an unintended ancilla
    Hamiltonian active during the inner evolution.
    """

    u_s: np.ndarray
    u_fb: np.ndarray
    inner: float | PulseSequence
    inner_repeats: int = 1
    reset: np.ndarray | None = None
    ancilla_drift: tuple[float, float] | None = None
    reprepare_ancilla: bool = False
    name: str = "fdd"

    def __post_init__(self):
        u_s, u_fb = as_matrix(self.u_s), as_matrix(self.u_fb)
        if u_s.shape != u_fb.shape:
            raise DimensionError("U_S and U_fb must act on the same system")
        for label, u in (("U_S", u_s), ("U_fb", u_fb)):
            if not is_unitary(u):
                raise ValidationError(f"{label} must be unitary")
        d_s = u_s.shape[0]
        reset = kron(SX, u_fb) if self.reset is None else as_matrix(self.reset)
        if reset.shape != (2 * d_s, 2 * d_s) or not is_unitary(reset):
            raise ValidationError("reset must be a unitary on ancilla (x) system")
        # the reset has to bring the ancilla from |1> back to |0>
        if np.linalg.norm(reset[d_s:, d_s:]) > 1e-10:
            raise ValidationError("reset does not return the ancilla to |0>")
        if isinstance(self.inner, PulseSequence):
            if self.inner_repeats < 1:
                raise ValueError("inner_repeats must be at least 1")
        elif float(self.inner) < 0:
            raise ValueError("inner evolution time must be nonnegative")
        object.__setattr__(self, "u_s", u_s)
        object.__setattr__(self, "u_fb", u_fb)
        object.__setattr__(self, "reset", reset)

    @property
    def d_s(self) -> int:
        return self.u_s.shape[0]

    @property
    def duration(self) -> float:
        if isinstance(self.inner, PulseSequence):
            return self.inner.cycle_time * self.inner_repeats
        return float(self.inner)

    @property
    def correction(self) -> np.ndarray:
        """System operator applied on outcome 1 (reset block |0><1|)."""
        return self.reset[: self.d_s, self.d_s:]


@dataclass
class BranchOutcome:
    bit: int
    probability: float
    post_state: np.ndarray | None  # normalized joint A(x)S(x)E state, None if unreachable


@dataclass
class RepeatedRun:
    outcomes: list[int]
    probabilities: list[float]  # conditional probability of each recorded outcome
    p1: list[float]  # conditional probability of outcome 1 at each cycle
    joint_probability: float
    final_state: np.ndarray  # system (x) environment density operator


def ancilla_drift_unitary(theta_rate: float, phi_rate: float, dt: float) -> np.ndarray:
    """exp(-i dt (theta_rate Y + phi_rate |1><1|)).

    To first order in dt this sends |0> -> |0> + theta |1> and
    |1> -> -theta |0> + (1 - i phi) |1> with theta = theta_rate dt and
    phi = phi_rate dt.
    """
    return expm(theta_rate * SY + phi_rate * PROJ1, -1j * dt)


def inner_propagator(model, spec: FeedbackCycleSpec) -> np.ndarray:
    m = as_open_system(model)
    if m.d_s != spec.d_s:
        raise DimensionError(f"model system dimension {m.d_s} != spec dimension {spec.d_s}")
    if isinstance(spec.inner, PulseSequence):
        return evolve_n_cycles(total_hamiltonian(m), spec.inner, spec.inner_repeats)
    return propagator(m, spec.duration)


def branch_operators(u_se, u_s, d_e: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """A+ and A- on system (x) environment for joint propagator ``u_se``."""
    u = as_matrix(u_se)
    v = kron(as_matrix(u_s), identity(d_e))
    mixed = dag(v) @ u @ v
    return (u + mixed) / 2, (u - mixed) / 2


def cycle_unitary(model, spec: FeedbackCycleSpec, u_se: np.ndarray | None = None) -> np.ndarray:
    """Joint unitary of steps 1-5 (before the measurement) on A (x) S (x) E."""
    m = as_open_system(model)
    if u_se is None:
        u_se = inner_propagator(m, spec)
    d_e = m.d_e
    had = kron(HADAMARD, identity(m.dim))
    c_on = kron(conditional_gate(spec.u_s), identity(d_e))
    c_off = kron(conditional_gate(dag(spec.u_s)), identity(d_e))
    if spec.ancilla_drift is None:
        evol = kron(I2, u_se)
    else:
        theta_rate, phi_rate = spec.ancilla_drift
        evol = kron(ancilla_drift_unitary(theta_rate, phi_rate, spec.duration), u_se)
    return had @ c_off @ evol @ c_on @ had


def cycle_kraus(model, spec: FeedbackCycleSpec, u_se: np.ndarray | None = None):
    """Kraus operators (K0, K1) on system (x) environment for one full cycle.

    Read off as blocks of the joint cycle unitary with the ancilla entering
    in |0>; K1 includes the outcome-1 reset.
    """
    m = as_open_system(model)
    w = cycle_unitary(m, spec, u_se)
    n = m.dim
    k0 = w[:n, :n]
    k1_raw = w[n:, :n]
    reset = kron(spec.reset, identity(m.d_e))
    k1 = reset[:n, n:] @ k1_raw
    return k0, k1


def _initial_se(model, rho_se=None, rho_s=None) -> np.ndarray:
    m = as_open_system(model)
    if rho_se is not None:
        return as_matrix(rho_se)
    if rho_s is None:
        rho_s = np.zeros((m.d_s, m.d_s), dtype=complex)
        rho_s[0, 0] = 1.0
    return kron(as_matrix(rho_s), m.env_density())


def _joint_step(model, spec, rho_ase, w=None):
    """Run one cycle on a joint A(x)S(x)E density operator; return both branches."""
    m = as_open_system(model)
    if spec.reprepare_ancilla:
        rho_se = partial_trace(rho_ase, [2, m.dim], keep=[1])
        rho_ase = kron(PROJ0, rho_se)
    if w is None:
        w = cycle_unitary(m, spec)
    rho = w @ rho_ase @ dag(w)
    reset = kron(spec.reset, identity(m.d_e))
    out = []
    for bit, proj in ((0, PROJ0), (1, PROJ1)):
        p = kron(proj, identity(m.dim))
        branch = p @ rho @ p
        if bit == 1:
            branch = reset @ branch @ dag(reset)
        prob = float(np.real(np.trace(branch)))
        prob = min(max(prob, 0.0), 1.0)
        state = branch / prob if prob > 1e-300 else None
        out.append((bit, prob, branch, state))
    return out


def fdd_cycle(model, spec: FeedbackCycleSpec, rho_se=None, rho_s=None):
    """One feedback cycle; returns the two ``BranchOutcome`` objects.

    The system starts in ``rho_s`` (default |0><0|) and the environment in
    the model's ``env_state`` unless a joint ``rho_se`` is supplied.
    """
    m = as_open_system(model)
    rho_ase = kron(PROJ0, _initial_se(m, rho_se, rho_s))
    res = _joint_step(m, spec, rho_ase)
    return tuple(BranchOutcome(bit, prob, state) for bit, prob, _, state in res)


def fdd_cycle_with_drift(model, spec: FeedbackCycleSpec, theta_rate: float, phi_rate: float,
                         dt: float, rho_se=None, rho_s=None):
    """``fdd_cycle`` with free inner evolution ``dt`` and an ancilla drift."""
    drifted = replace(spec, inner=float(dt), inner_repeats=1, ancilla_drift=(theta_rate, phi_rate))
    return fdd_cycle(model, drifted, rho_se, rho_s)


def fdd_repeated(model, spec: FeedbackCycleSpec, n: int, mode: str = EXACT, seed=None,
                 rho_se=None, rho_s=None) -> RepeatedRun:
    """Iterate the cycle ``n`` times.

    In exact mode the all-zero record is followed and its joint probability
    accumulated. In sampled mode each outcome is drawn from a seeded
    generator and the corresponding branch (with its correction) is kept.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if mode not in (EXACT, SAMPLED):
        raise ValueError(f"unknown mode {mode!r}")
    m = as_open_system(model)
    rng = np.random.default_rng(seed)
    w = cycle_unitary(m, spec)
    rho = kron(PROJ0, _initial_se(m, rho_se, rho_s))
    outcomes, probs, p1s = [], [], []
    joint = 1.0
    for _ in range(n):
        branches = _joint_step(m, spec, rho, w)
        p1 = branches[1][1]
        p1s.append(p1)
        if mode == EXACT:
            bit = 0
        else:
            bit = int(rng.random() < p1)
        _, prob, _, state = branches[bit]
        outcomes.append(bit)
        probs.append(prob)
        joint *= prob
        if state is None:
            # the followed branch has zero weight; nothing further can happen
            rho = np.zeros_like(rho)
            joint = 0.0
            break
        rho = state
    final = partial_trace(rho, [2, m.dim], keep=[1])
    return RepeatedRun(outcomes, probs, p1s, joint, final)


def fdd_spec(delta_t: float, u_s=SX, u_fb=SZ, **kwargs) -> FeedbackCycleSpec:
    """Feedback-enacted decoupling of a z-axis estimate: free evolution ``delta_t``.

    U_S = X and U_fb = Z are the constructed pair for a propagator
    exp(-i theta Z).
    """
    return FeedbackCycleSpec(u_s=u_s, u_fb=u_fb, inner=float(delta_t), name="fdd", **kwargs)


def _inner_repeats(t_c: float, dd_cycle: float) -> int:
    n = int(round(t_c / dd_cycle))
    if n < 1 or abs(n * dd_cycle - t_c) > 1e-9 * max(t_c, 1.0):
        raise ValueError(f"feedback period {t_c} is not a multiple of the DD cycle {dd_cycle}")
    return n


def fed_spec(t_c: float, delta_t: float, symmetrized: bool = True, **kwargs) -> FeedbackCycleSpec:
    """Feedback-enhanced decoupling: {I, X} selective DD nested in a C_Z loop.

    The DD cycle has pulse spacing ``delta_t`` (cycle 2 delta_t) and is
    repeated to fill the feedback period ``t_c``. Outcome 1 is corrected by
    X_A (x) X_S.
    """
    inner = sel_dd("x", 2 * delta_t, symmetrized=symmetrized)
    return FeedbackCycleSpec(u_s=SZ, u_fb=SX, inner=inner,
                             inner_repeats=_inner_repeats(t_c, 2 * delta_t),
                             name="fed" if symmetrized else "fed-plain", **kwargs)


def def_spec(t_c: float, delta_t: float, symmetrized: bool = True, **kwargs) -> FeedbackCycleSpec:
    """Decoupling-enhanced feedback: {I, Z} selective DD nested in a C_X loop,
    outcome 1 corrected by X_A (x) Z_S."""
    inner = sel_dd("z", 2 * delta_t, symmetrized=symmetrized)
    return FeedbackCycleSpec(u_s=SX, u_fb=SZ, inner=inner,
                             inner_repeats=_inner_repeats(t_c, 2 * delta_t),
                             name="def" if symmetrized else "def-plain", **kwargs)


def _qubit(model) -> QubitErrorModel:
    if not isinstance(model, QubitErrorModel):
        raise TypeError("FED/DEF cycles take a closed-system QubitErrorModel")
    return model


def fed_cycle(model: QubitErrorModel, t_c: float, delta_t: float, symmetrized: bool = True,
              rho_s=None):
    return fdd_cycle(_qubit(model), fed_spec(t_c, delta_t, symmetrized), rho_s=rho_s)


def def_cycle(model: QubitErrorModel, t_c: float, delta_t: float, symmetrized: bool = True,
              rho_s=None):
    return fdd_cycle(_qubit(model), def_spec(t_c, delta_t, symmetrized), rho_s=rho_s)


def outcome_probability(model, spec: FeedbackCycleSpec, rho_s=None) -> float:
    """Probability of outcome 1 for one cycle; default input is the maximally mixed system."""
    m = as_open_system(model)
    if rho_s is None:
        rho_s = identity(m.d_s) / m.d_s
    _, b1 = fdd_cycle(m, spec, rho_s=rho_s)
    return b1.probability


def system_state(outcome: BranchOutcome, model) -> np.ndarray:
    """Reduced system state of a branch post-state."""
    m = as_open_system(model)
    return partial_trace(outcome.post_state, [2, m.d_s, m.d_e], keep=[1])


def sample_records(model, spec: FeedbackCycleSpec, n_cycles: int, shots: int, seed=None,
                   rho_se=None, rho_s=None) -> np.ndarray:
    """Measurement records of ``shots`` independent runs, shape (shots, n_cycles).

    Every shot carries its own conditional system (x) environment state;
    outcomes are drawn cycle by cycle from that state's branch weights.
    """
    if n_cycles < 1 or shots < 1:
        raise ValueError("n_cycles and shots must be at least 1")
    m = as_open_system(model)
    k0, k1 = cycle_kraus(m, spec)
    rng = np.random.default_rng(seed)
    rho = np.broadcast_to(_initial_se(m, rho_se, rho_s), (shots, m.dim, m.dim)).copy()
    records = np.zeros((shots, n_cycles), dtype=np.int8)
    for c in range(n_cycles):
        b1 = k1 @ rho @ dag(k1)
        p1 = np.clip(np.real(np.trace(b1, axis1=1, axis2=2)), 0.0, 1.0)
        bits = rng.random(shots) < p1
        records[:, c] = bits
        b0 = k0 @ rho @ dag(k0)
        norm = np.where(bits, p1, 1.0 - p1)
        safe = np.where(norm > 1e-300, norm, 1.0)[:, None, None]
        rho = np.where(bits[:, None, None], b1, b0) / safe
    return records
