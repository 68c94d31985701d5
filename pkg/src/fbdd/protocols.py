"""
Protocol registry and fidelity-versus-time runners.

Each protocol is reduced to the Kraus operators of one control cycle on
system (x) environment. Open-loop sequences have a single unitary Kraus
operator; feedback cycles have one per measurement outcome, with the
outcome-1 correction folded in. Fidelities are recorded at cycle
boundaries, starting with t = 0.

Cycle lengths in units of the pulse spacing ``delta_t``:

=========== ===================================
free        1 (no pulses)
seldd-*     2 ({I, sigma} frames, delta_t each)
cp-*        2 (symmetrized {I, sigma, I})
maxdd       4
fdd         1 (free evolution between feedback steps)
fed, def    feedback period t_c (default 2)
=========== ===================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cxmat import dag, identity, kron, partial_trace
from .decoupling import MAXDD_DEFAULT_PATH, PulseSequence, evolve_cycle, max_dd, sel_dd
from .errors import ValidationError
from .feedback import EXACT, SAMPLED, cycle_kraus, def_spec, fdd_spec, fed_spec
from .fidelity import BASIS, ChannelMap, channel_series, entanglement_fidelity
from .model import OpenSystemModel, QubitErrorModel, as_open_system, total_hamiltonian

FEEDBACK_PROTOCOLS = ("fdd", "fed", "fed-plain", "def", "def-plain")
DD_PROTOCOLS = ("free", "seldd-x", "seldd-y", "seldd-z", "cp-x", "cp-y", "cp-z", "maxdd")


@dataclass(frozen=True)
class Table1Entry:
    acronym: str
    protocol: str
    estimate_corrected_by: str  # "Decoupling", "Feedback" or "NC"
    error_corrected_by: str
    members: tuple  # runner names belonging to this family

    @property
    def estimate_nc(self) -> bool:
        return self.estimate_corrected_by == "NC"

    @property
    def error_nc(self) -> bool:
        return self.error_corrected_by == "NC"


def table1_registry() -> dict[str, Table1Entry]:
    """Which mechanism removes the estimate H^ and which removes the error dH."""
    rows = [
        Table1Entry("SelDD", "Selective Decoupling", "Decoupling", "NC",
                    ("seldd-x", "seldd-y", "seldd-z", "cp-x", "cp-y", "cp-z")),
        Table1Entry("MaxDD", "Maximal Decoupling", "Decoupling", "Decoupling", ("maxdd",)),
        Table1Entry("FDD", "Feedback-enacted DD", "Feedback", "NC", ("fdd",)),
        Table1Entry("FED", "Feedback-Enhanced Decoupling", "Decoupling", "Feedback", ("fed", "fed-plain")),
        Table1Entry("DEF", "Decoupling-Enhanced Feedback", "Feedback", "Decoupling", ("def", "def-plain")),
    ]
    return {r.acronym: r for r in rows}


def canonical_name(name: str) -> str:
    key = name.strip().lower()
    if key in DD_PROTOCOLS or key in FEEDBACK_PROTOCOLS:
        return key
    if key.startswith("maxdd:"):
        return "maxdd:" + max_dd(key.split(":", 1)[1]).name.split(":", 1)[1]
    raise ValueError(f"unknown protocol {name!r}")


def is_known(name: str) -> bool:
    try:
        canonical_name(name)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class ProtocolRun:
    """One protocol run.

    Give either ``cycles`` or ``t_total``; with ``t_total`` the number of
    cycles is the largest N with N * cycle_time <= t_total. ``t_c`` sets
    the feedback period of fdd/fed/def (defaults: delta_t for fdd, 2 delta_t
    for fed/def).
    """

    name: str
    model: QubitErrorModel | OpenSystemModel
    delta_t: float
    cycles: int | None = None
    t_total: float | None = None
    t_c: float | None = None
    seed: int | None = 0
    mode: str = EXACT
    shots: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "name", canonical_name(self.name))
        if not self.delta_t > 0:
            raise ValidationError("delta_t must be positive")
        if self.mode not in (EXACT, SAMPLED):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.t_c is not None and not self.t_c > 0:
            raise ValidationError("t_c must be positive")
        if self.cycles is None:
            if self.t_total is None or not self.t_total > 0:
                raise ValidationError("give cycles or a positive t_total")
            n = math.floor(self.t_total / self.cycle_time + 1e-9)
            if n < 1:
                raise ValidationError("t_total is shorter than one cycle")
            object.__setattr__(self, "cycles", n)
        elif self.cycles < 0:
            raise ValidationError("cycles must be nonnegative")
        if self.shots < 1:
            raise ValidationError("shots must be at least 1")
        if self.d_s != 2:
            raise ValidationError("protocol runs act on a single qubit system")
        # build once to surface incompatible timing early
        self.kraus()

    @property
    def d_s(self) -> int:
        return as_open_system(self.model).d_s

    @property
    def cycle_time(self) -> float:
        if self.name == "free":
            return self.delta_t
        if self.name.startswith(("seldd", "cp")):
            return 2 * self.delta_t
        if self.name.startswith("maxdd"):
            return 4 * self.delta_t
        if self.name == "fdd":
            return self.t_c if self.t_c is not None else self.delta_t
        return self.t_c if self.t_c is not None else 2 * self.delta_t

    @property
    def duration(self) -> float:
        return self.cycles * self.cycle_time

    @property
    def path(self) -> str | None:
        if self.name == "maxdd":
            return MAXDD_DEFAULT_PATH
        if self.name.startswith("maxdd:"):
            return self.name.split(":", 1)[1]
        return None

    def with_model(self, model) -> "ProtocolRun":
        return replace(self, model=model)

    @classmethod
    def over(cls, name: str, model, delta_t: float, t_total: float, **kwargs) -> "ProtocolRun":
        return cls(name=name, model=model, delta_t=delta_t, t_total=t_total, **kwargs)

    def pulse_sequence(self) -> PulseSequence | None:
        if self.name == "free":
            return PulseSequence(((identity(2), 1.0),), self.cycle_time, "free")
        if self.name.startswith("seldd-"):
            return sel_dd(self.name[-1], self.cycle_time)
        if self.name.startswith("cp-"):
            return sel_dd(self.name[-1], self.cycle_time, symmetrized=True)
        if self.name.startswith("maxdd"):
            return max_dd(self.path, self.cycle_time)
        return None

    def feedback_spec(self):
        if self.name == "fdd":
            return fdd_spec(self.cycle_time)
        symmetrized = not self.name.endswith("-plain")
        if self.name.startswith("fed"):
            return fed_spec(self.cycle_time, self.delta_t, symmetrized=symmetrized)
        if self.name.startswith("def"):
            return def_spec(self.cycle_time, self.delta_t, symmetrized=symmetrized)
        return None

    def kraus(self) -> list[np.ndarray]:
        m = as_open_system(self.model)
        seq = self.pulse_sequence()
        if seq is not None:
            return [evolve_cycle(total_hamiltonian(m), seq)]
        return list(cycle_kraus(m, self.feedback_spec()))


@dataclass
class RunResult:
    name: str
    times: np.ndarray
    fidelities: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def final(self) -> float:
        return float(self.fidelities[-1])

    @property
    def time_average(self) -> float:
        return float(np.mean(self.fidelities))


def protocol_channels(pr: ProtocolRun) -> list[ChannelMap]:
    """Ensemble channels after 0..N cycles (both branches, corrections applied)."""
    m = as_open_system(pr.model)
    return channel_series(pr.kraus(), pr.cycles, m.d_e, m.env_state,
                          metadata={"name": pr.name, "delta_t": pr.delta_t, "cycle_time": pr.cycle_time})


def _batched_fidelity(images: np.ndarray, d_e: int) -> np.ndarray:
    """Entanglement fidelity of batched Pauli images, shape (shots, 4, n, n)."""
    reduced = np.trace(images.reshape(images.shape[:2] + (2, d_e, 2, d_e)), axis1=3, axis2=5)
    total = sum(np.einsum("ij,sji->s", p, reduced[:, j]) for j, p in enumerate(BASIS) if j)
    avg = 0.5 + np.real(total) / 12
    return (3 * avg - 1) / 2


def _sampled_fidelities(pr: ProtocolRun) -> np.ndarray:
    """Monte Carlo estimate of the ensemble entanglement fidelity.

    Records are drawn with the outcome statistics of the maximally mixed
    system state (the reference of the entanglement fidelity); each
    trajectory's Pauli images are reweighted by the inverse record
    probability, which makes the average over shots unbiased.
    """
    m = as_open_system(pr.model)
    ks = pr.kraus()
    rng = np.random.default_rng(pr.seed)
    xi = m.env_density()
    ops = np.stack([kron(p, xi) for p in BASIS])
    images = np.broadcast_to(ops, (pr.shots,) + ops.shape).copy()
    ref = images[:, 0] / 2
    out = [float(np.mean(_batched_fidelity(images, m.d_e)))]
    for _ in range(pr.cycles):
        if len(ks) == 1:
            k = ks[0]
            images = k @ images @ dag(k)
        else:
            branch_refs = [k @ ref @ dag(k) for k in ks]
            probs = np.stack([np.real(np.trace(b, axis1=1, axis2=2)) for b in branch_refs], axis=1)
            probs = np.clip(probs, 0.0, None)
            probs /= probs.sum(axis=1, keepdims=True)
            u = rng.random(pr.shots)
            bits = np.argmax(u[:, None] < np.cumsum(probs, axis=1), axis=1)
            new_images = np.empty_like(images)
            new_ref = np.empty_like(ref)
            for b, k in enumerate(ks):
                sel = bits == b
                if not np.any(sel):
                    continue
                p = probs[sel, b][:, None, None]
                new_images[sel] = (k @ images[sel] @ dag(k)) / p[:, None]
                new_ref[sel] = branch_refs[b][sel] / p
            images, ref = new_images, new_ref
        out.append(float(np.mean(_batched_fidelity(images, m.d_e))))
    return np.array(out)


def run(pr: ProtocolRun) -> RunResult:
    """Entanglement fidelity at t = n * cycle_time for n = 0..N."""
    times = pr.cycle_time * np.arange(pr.cycles + 1)
    if pr.mode == SAMPLED and pr.name in FEEDBACK_PROTOCOLS:
        fids = _sampled_fidelities(pr)
    else:
        fids = np.array([entanglement_fidelity(ch) for ch in protocol_channels(pr)])
    meta = {"cycle_time": pr.cycle_time, "cycles": pr.cycles, "delta_t": pr.delta_t, "mode": pr.mode}
    return RunResult(pr.name, times, fids, meta)


def joint_system_state(pr: ProtocolRun, rho_s) -> np.ndarray:
    """Ensemble system state after the whole run for input ``rho_s``."""
    m = as_open_system(pr.model)
    ks = pr.kraus()
    rho = kron(np.asarray(rho_s, dtype=complex), m.env_density())
    for _ in range(pr.cycles):
        rho = sum(k @ rho @ dag(k) for k in ks)
    return partial_trace(rho, [2, m.d_e], keep=[0])

