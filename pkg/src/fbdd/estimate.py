"""
Adaptive estimation of the Hamiltonian error from feedback statistics.

In the ideal limit a FED cycle of period T_c reports outcome 1 with
probability sin^2(eps_x T_c), and a DEF cycle with probability
sin^2((omega + eps_z) T_c), where omega is the estimated strength along
the estimate axis. Inverting these gives |eps_x| and eps_z; ``tune``
folds them back into the estimate and repeats.

Each iteration works in the frame where the current estimate points along
z: the true Hamiltonian is conjugated by the y-rotation R taking z to the
estimate axis, the standard FED/DEF cycles run on the rotated
Hamiltonian, and the update is rotated back. The y component of the error
is not estimated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cxmat import dag, expm
from .errors import ValidationError
from .feedback import EXACT, SAMPLED, def_spec, fed_spec, outcome_probability, sample_records
from .model import OpenSystemModel, QubitErrorModel, total_hamiltonian
from .pauli import SX, SY, SZ, pauli_coefficients

DEFAULT_FLOOR = 1e-6


@dataclass
class EstimationState:
    """Current estimate H^ with its update weights and the iteration log.

    ``history`` rows are dicts with keys iteration, p1_x, p1_z, est_eps_x,
    est_eps_z, sign_x, est_error_norm.
    """

    estimate: QubitErrorModel = field(default_factory=QubitErrorModel)
    eta_x: float = 0.5
    eta_z: float = 0.5
    sign_x: int = 1
    history: list = field(default_factory=list)

    def __post_init__(self):
        for label, eta in (("eta_x", self.eta_x), ("eta_z", self.eta_z)):
            if not 0 < eta <= 1:
                raise ValidationError(f"{label} must lie in (0, 1], got {eta}")
        if self.sign_x not in (1, -1):
            raise ValidationError("sign_x must be +1 or -1")


def _frame(h_est: np.ndarray):
    """(strength, R) with R^dag h_est R = strength * Z for an x-z plane estimate."""
    _, cx, _, cz = pauli_coefficients(h_est)
    strength = float(np.hypot(cx, cz))
    if strength == 0:
        raise ValidationError("the estimate has no x-z component to define a frame")
    beta = float(np.arctan2(cx, cz))
    return strength, expm(SY, -0.5j * beta)


def _rotated_model(model, rot: np.ndarray) -> OpenSystemModel:
    h = total_hamiltonian(model)
    if h.shape != (2, 2):
        raise ValidationError("estimation acts on a closed single-qubit model")
    return OpenSystemModel(d_s=2, d_e=1, h_s=dag(rot) @ h @ rot)


def _probability(model, spec, shots: int, mode: str, rng) -> float:
    if mode == EXACT:
        return outcome_probability(model, spec)
    if mode == SAMPLED:
        seed = int(rng.integers(2**63))
        rho = np.eye(2, dtype=complex) / 2
        return float(np.mean(sample_records(model, spec, 1, shots, seed, rho_s=rho)))
    raise ValidationError(f"unknown mode {mode!r}")


def _arcsin_rate(p1: float, t_c: float) -> float:
    return float(np.arcsin(np.sqrt(min(max(p1, 0.0), 1.0))) / t_c)


def _check_branch(strength: float, t_c: float) -> None:
    if strength * t_c > np.pi / 2:
        raise ValidationError(f"strength * T_c = {strength * t_c:.4g} leaves the arcsin principal branch")


def measure_p1(model, t_c: float, delta_t: float, protocol: str, shots: int = 10_000,
               mode: str = EXACT, seed=None, estimate: QubitErrorModel | None = None) -> float:
    """Outcome-1 frequency of FED (``protocol='fed'``) or DEF in the estimate frame."""
    est = QubitErrorModel() if estimate is None else estimate
    _, rot = _frame(est.total_hamiltonian())
    spec = fed_spec(t_c, delta_t) if protocol == "fed" else def_spec(t_c, delta_t)
    return _probability(_rotated_model(model, rot), spec, shots, mode, np.random.default_rng(seed))


def estimate_eps_x(model, t_c: float, delta_t: float, shots: int = 10_000, mode: str = EXACT,
                   seed=None, estimate: QubitErrorModel | None = None) -> float:
    """|eps_x| = arcsin(sqrt(p1)) / T_c from FED outcome statistics."""
    p1 = measure_p1(model, t_c, delta_t, "fed", shots, mode, seed, estimate)
    return _arcsin_rate(p1, t_c)


def estimate_eps_z(model, t_c: float, delta_t: float, shots: int = 10_000, mode: str = EXACT,
                   seed=None, estimate: QubitErrorModel | None = None) -> float:
    """eps_z = arcsin(sqrt(p1)) / T_c - omega from DEF outcome statistics.

    ``omega`` is the strength of the current estimate (1 for the default
    estimate Z); (omega + eps_z) T_c must stay within [0, pi/2].
    """
    est = QubitErrorModel() if estimate is None else estimate
    strength, _ = _frame(est.total_hamiltonian())
    _check_branch(strength, t_c)
    p1 = measure_p1(model, t_c, delta_t, "def", shots, mode, seed, est)
    return _arcsin_rate(p1, t_c) - strength


def estimate_error_norm(estimate: QubitErrorModel, model) -> float:
    """Euclidean distance between the Pauli vectors of H^ and H."""
    diff = estimate.total_hamiltonian() - total_hamiltonian(model)
    return float(np.linalg.norm(pauli_coefficients(diff)[1:]))


def tune(state: EstimationState, model, iterations: int, t_c: float, delta_t: float,
         shots: int = 10_000, mode: str = EXACT, seed=None,
         floor: float = DEFAULT_FLOOR) -> EstimationState:
    """Run estimate-update iterations, appending to ``state.history``.

    The x weight flips sign whenever p1_x grew since the previous iteration.
    Stops early once p1_x and |eps_z| both fall below ``floor``.
    """
    if iterations < 0:
        raise ValidationError("iterations must be nonnegative")
    rng = np.random.default_rng(seed)
    start = len(state.history)
    for it in range(start + 1, start + iterations + 1):
        strength, rot = _frame(state.estimate.total_hamiltonian())
        _check_branch(strength, t_c)
        framed = _rotated_model(model, rot)
        p1x = _probability(framed, fed_spec(t_c, delta_t), shots, mode, rng)
        p1z = _probability(framed, def_spec(t_c, delta_t), shots, mode, rng)
        eps_x = _arcsin_rate(p1x, t_c)
        eps_z = _arcsin_rate(p1z, t_c) - strength
        if state.history and p1x > state.history[-1]["p1_x"]:
            state.sign_x = -state.sign_x
        h_frame = (strength + state.eta_z * eps_z) * SZ + state.sign_x * state.eta_x * eps_x * SX
        h_new = rot @ h_frame @ dag(rot)
        h_new = (h_new + dag(h_new)) / 2
        _, cx, cy, cz = pauli_coefficients(h_new)
        omega = state.estimate.omega_z
        state.estimate = QubitErrorModel(omega_z=omega, eps_x=cx, eps_y=cy, eps_z=cz - omega)
        state.history.append({
            "iteration": it,
            "p1_x": p1x,
            "p1_z": p1z,
            "est_eps_x": eps_x,
            "est_eps_z": eps_z,
            "sign_x": state.sign_x,
            "est_error_norm": estimate_error_norm(state.estimate, model),
        })
        if p1x <= floor and abs(eps_z) <= floor:
            break
    return state
