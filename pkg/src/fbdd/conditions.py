"""
Algebraic correctability tests for single-bit feedback.

* ``check_mixing``: does X + U^dag X U = 0 have a unitary solution? It does
  exactly when the spectrum of the traceless normal X is invariant under
  negation (with multiplicity). A solution permutes eigenvectors.
* ``check_simultaneous``: common unitary diagonalizer of a normal family.
* ``check_ld``: local diagonalizability of a bipartite operator, decided on
  its operator-Schmidt system factors.
* ``solve_qubit_feedback``: constructs (U_S, U_fb) for a qubit LD propagator.
* ``check_blocks``: the block-structure test for larger systems.

Diagonalizers are returned with the common eigenvectors as columns, so
``D^dag A D`` is diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cxmat import as_matrix, comm, dag, eig, fro, identity, is_normal, kron, operator_schmidt
from .errors import DimensionError, PreconditionError
from .feedback import branch_operators
from .pauli import SX, SZ

PAIR_RTOL = 1e-8


@dataclass
class MixingReport:
    satisfied: bool
    eigenvalues: np.ndarray
    pairing: list[int] | None  # pairing[i] = j with x_j = -x_i
    solution_u: np.ndarray | None
    residual: float  # ||X + U^dag X U||_F, or the worst pairing distance when unsatisfied
    max_pair_distance: float


@dataclass
class LDReport:
    is_ld: bool
    status: str  # "certified", "not LD", or "unresolved"
    diagonalizer: np.ndarray | None
    schmidt_terms: list = field(repr=False, default_factory=list)
    commutator_residual: float = 0.0
    offdiag_residual: float = float("nan")


@dataclass
class QubitFeedbackSolution:
    ok: bool
    u_s: np.ndarray | None
    u_fb: np.ndarray | None
    ld: LDReport
    plus_residual: float = float("nan")  # distance of A+ from I (x) B+
    minus_residual: float = float("nan")  # distance of U_fb A- from I (x) B-


@dataclass
class BlockReport:
    correctable: bool
    is_ld: bool
    rank_one: bool
    unitary_up_to_scale: bool
    mixing: bool
    dbar: np.ndarray | None
    mixing_report: MixingReport | None
    ld: LDReport
    u_s: np.ndarray | None = None
    u_fb: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)


def _pair_negated(w: np.ndarray):
    """Assignment j = pairing[i] minimizing sum |w_i + w_j|^2; returns (pairing, worst distance)."""
    order = np.lexsort((w.imag, w.real))
    ws = w[order]
    cost = np.abs(ws[:, None] + ws[None, :]) ** 2
    # prefer the identity within degenerate clusters (zero eigenvalues pair with themselves)
    cost = cost + 1e-30 * (1 - np.eye(len(ws)))
    rows, cols = linear_sum_assignment(cost)
    pairing = np.empty(len(w), dtype=int)
    pairing[order[rows]] = order[cols]
    dist = float(np.max(np.abs(w + w[pairing]))) if len(w) else 0.0
    return pairing.tolist(), dist


def check_mixing(x, rtol: float = PAIR_RTOL, check_pre: bool = True) -> MixingReport:
    """Negation-symmetry test of the spectrum of a traceless normal matrix.

    Raises
    ------
    PreconditionError
        If ``x`` is not traceless or not normal.
    """
    x = as_matrix(x)
    norm = fro(x)
    scale = max(norm, 1e-300)
    if check_pre:
        tr = abs(np.trace(x))
        if tr > 1e-10 * max(norm, 1.0):
            raise PreconditionError(f"matrix is not traceless (|tr X| = {tr:.3e})", violation=tr)
        if not is_normal(x):
            v = fro(x @ dag(x) - dag(x) @ x)
            raise PreconditionError(f"matrix is not normal (||[X, X^dag]|| = {v:.3e})", violation=v)
    w, v = eig(x)
    pairing, dist = _pair_negated(w)
    if dist > rtol * max(norm, 1e-300) and norm > 0:
        return MixingReport(False, w, None, None, dist, dist)
    perm = np.zeros((len(w), len(w)), dtype=complex)
    for i, j in enumerate(pairing):
        perm[j, i] = 1.0  # P e_i = e_pairing[i]
    u = v @ perm @ dag(v)
    residual = fro(x + dag(u) @ x @ u)
    return MixingReport(residual <= 1e-9 * scale or norm == 0, w, pairing, u, residual, dist)


def brute_force_mixing(w, rtol: float = PAIR_RTOL) -> bool:
    """Exhaustive search for a permutation with x_pi(i) = -x_i (small n only)."""
    from itertools import permutations

    w = np.asarray(w, dtype=complex)
    n = len(w)
    if n == 0:
        return True
    perms = np.array(list(permutations(range(n))))
    tol = rtol * max(float(np.linalg.norm(w)), 1e-300)
    worst = np.max(np.abs(w[perms] + w[None, :]), axis=1)
    return bool(np.any(worst <= tol))


def _hermitian_combination(ops, rng) -> np.ndarray:
    h = np.zeros_like(ops[0])
    for a in ops:
        c1, c2 = rng.standard_normal(2)
        h = h + c1 * (a + dag(a)) / 2 + c2 * (a - dag(a)) / 2j
    return h


def _offdiag(d: np.ndarray, ops) -> float:
    worst = 0.0
    for a in ops:
        m = dag(d) @ a @ d
        worst = max(worst, fro(m - np.diag(np.diag(m))) / max(fro(a), 1e-300))
    return worst


def check_simultaneous(xs, tol: float = 1e-8, seed: int = 0, draws: int = 5):
    """Unitary V with every V^dag X_i V diagonal, or None.

    Tries up to ``draws`` random Hermitian combinations of the family; a
    degenerate draw would leave off-diagonal residue and is retried.
    """
    ops = [as_matrix(x) for x in xs]
    if not ops:
        raise ValueError("empty operator family")
    d = ops[0].shape[0]
    if len(ops) == 1 and d == 1:
        return identity(1)
    rng = np.random.default_rng(seed)
    for _ in range(draws):
        _, v = np.linalg.eigh(_hermitian_combination(ops, rng))
        if _offdiag(v, ops) <= tol:
            return v
    return None


def check_ld(u_se, d_s: int, d_e: int, tol: float = 1e-8, seed: int = 0) -> LDReport:
    """Local diagonalizability from the operator-Schmidt factors on the system."""
    u = as_matrix(u_se)
    if u.shape != (d_s * d_e, d_s * d_e):
        raise DimensionError(f"matrix of shape {u.shape} does not match d_s={d_s}, d_e={d_e}")
    terms = operator_schmidt(u, d_s, d_e)
    a_ops = [a for _, a, _ in terms]
    worst = 0.0
    for a, b in combinations(a_ops, 2):
        worst = max(worst, fro(comm(a, b)))
    if worst > tol:
        return LDReport(False, "not LD", None, terms, worst)
    if not a_ops:
        return LDReport(True, "certified", identity(d_s), terms, 0.0, 0.0)
    v = check_simultaneous(a_ops, tol=tol, seed=seed)
    if v is None:
        # commuting but not simultaneously unitarily diagonalizable
        rng = np.random.default_rng(seed)
        _, v_try = np.linalg.eigh(_hermitian_combination(a_ops, rng))
        return LDReport(False, "unresolved", None, terms, worst, _offdiag(v_try, a_ops))
    return LDReport(True, "certified", v, terms, worst, _offdiag(v, a_ops))


def _factor_residual(x: np.ndarray, d_s: int, d_e: int) -> float:
    """Distance of ``x`` from the set I_S (x) B."""
    b = np.trace(x.reshape(d_s, d_e, d_s, d_e), axis1=0, axis2=2) / d_s
    return fro(x - kron(identity(d_s), b))


def solve_qubit_feedback(u_se, d_e: int, tol: float = 1e-8, seed: int = 0) -> QubitFeedbackSolution:
    """Constructed (U_S, U_fb) = (D X D^dag, D Z D^dag) for a qubit LD propagator.

    ``D`` is the common diagonalizer of the system-side Schmidt operators.
    The result certifies A+ = I (x) B+ and U_fb A- = I (x) B- numerically.
    """
    u = as_matrix(u_se)
    if u.shape[0] != 2 * d_e:
        raise DimensionError("solve_qubit_feedback needs d_s = 2; use check_blocks for larger systems")
    ld = check_ld(u, 2, d_e, tol, seed)
    if not ld.is_ld:
        return QubitFeedbackSolution(False, None, None, ld)
    d = ld.diagonalizer
    u_s = d @ SX @ dag(d)
    u_fb = d @ SZ @ dag(d)
    a_plus, a_minus = branch_operators(u, u_s, d_e)
    r_plus = _factor_residual(a_plus, 2, d_e)
    r_minus = _factor_residual(kron(u_fb, identity(d_e)) @ a_minus, 2, d_e)
    ok = r_plus <= tol and r_minus <= tol
    return QubitFeedbackSolution(ok, u_s, u_fb, ld, r_plus, r_minus)


def check_blocks(u_se, d_s: int, d_e: int, tol: float = 1e-8, seed: int = 0) -> BlockReport:
    """Block-form correctability test for a d_s-dimensional system.

    In the LD basis every environment block (k, l) is diagonal with entries
    d_{i,kl}. After removing each block's mean, all residual vectors must
    be multiples of one diagonal Dbar, which must be proportional to a
    unitary and satisfy the mixing condition.
    """
    u = as_matrix(u_se)
    ld = check_ld(u, d_s, d_e, tol, seed)
    if not ld.is_ld:
        return BlockReport(False, False, False, False, False, None, None, ld,
                           residuals={"commutator": ld.commutator_residual})
    d = ld.diagonalizer
    dl = kron(d, identity(d_e))
    up = (dag(dl) @ u @ dl).reshape(d_s, d_e, d_s, d_e)
    diag_entries = np.einsum("ikil->ikl", up).reshape(d_s, d_e * d_e)  # column = block (k,l)
    resid = diag_entries - diag_entries.mean(axis=0, keepdims=True)
    scale = max(fro(u), 1.0)
    residuals = {"offdiag": ld.offdiag_residual}
    if fro(resid) <= tol * scale:
        # every block is proportional to the identity: A- vanishes for any U_S
        u_s = d @ np.roll(identity(d_s), 1, axis=0) @ dag(d)
        return BlockReport(True, True, True, True, True, np.zeros(d_s, dtype=complex), None, ld,
                           u_s=u_s, u_fb=identity(d_s), residuals=residuals)
    left, sv, _ = np.linalg.svd(resid)
    rank_one = bool(sv[1] <= tol * scale) if len(sv) > 1 else True
    residuals["second_singular_value"] = float(sv[1]) if len(sv) > 1 else 0.0
    dbar = left[:, 0]
    mags = np.abs(dbar)
    unitary_scale = bool(np.max(mags) - np.min(mags) <= tol * max(np.max(mags), 1e-300))
    residuals["modulus_spread"] = float(np.max(mags) - np.min(mags))
    mix = check_mixing(np.diag(dbar), check_pre=False)
    residuals["mixing"] = mix.residual
    correctable = rank_one and unitary_scale and mix.satisfied
    u_s = u_fb = None
    if correctable:
        u_s = d @ mix.solution_u @ dag(d)
        unit = dbar / mags.mean()
        u_fb = d @ np.diag(unit.conj()) @ dag(d)
    return BlockReport(correctable, True, rank_one, unitary_scale, mix.satisfied, dbar, mix, ld,
                       u_s=u_s, u_fb=u_fb, residuals=residuals)
