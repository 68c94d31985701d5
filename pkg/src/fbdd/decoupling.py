"""
Open-loop dynamical decoupling with ideal instantaneous pulses.

A ``PulseSequence`` stores, for each segment of one control cycle, the
control propagator G_j that is in force during the segment and the
fraction of the cycle it lasts. The physical pulses are the jumps between
consecutive G_j: an initial G_1, then G_{j+1} G_j^dag, and a final G_n^dag
returning the control frame to the identity. Only the finite pulse spacing
is non-ideal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .cxmat import as_matrix, dag, expm, identity, is_unitary, kron
from .errors import DimensionError, ValidationError
from .pauli import I2, pauli

MAXDD_DEFAULT_PATH = "IXZY"


@dataclass(frozen=True)
class PulseSequence:
    """Piecewise-constant control cycle of length ``cycle_time``."""

    segments: tuple  # of (G_j, fraction)
    cycle_time: float
    name: str = ""

    def __post_init__(self):
        if self.cycle_time <= 0:
            raise ValueError("cycle time must be positive")
        if not self.segments:
            raise ValueError("a pulse sequence needs at least one segment")
        segs = []
        d = None
        for g, frac in self.segments:
            g = as_matrix(g)
            if d is None:
                d = g.shape[0]
            if g.shape != (d, d):
                raise DimensionError("control propagators have inconsistent dimensions")
            if not is_unitary(g):
                raise ValidationError("control propagators must be unitary")
            if not 0 < frac <= 1:
                raise ValueError(f"segment fraction {frac} not in (0, 1]")
            segs.append((g, float(frac)))
        if abs(sum(f for _, f in segs) - 1.0) > 1e-12:
            raise ValueError("segment fractions must sum to 1")
        object.__setattr__(self, "segments", tuple(segs))

    @property
    def dim(self) -> int:
        return self.segments[0][0].shape[0]

    @property
    def durations(self) -> list[float]:
        return [f * self.cycle_time for _, f in self.segments]

    def pulses(self) -> list[np.ndarray]:
        """Physical instantaneous pulses in time order (n_segments + 1 of them)."""
        gs = [g for g, _ in self.segments]
        out = [gs[0]]
        out += [gs[j + 1] @ dag(gs[j]) for j in range(len(gs) - 1)]
        out.append(dag(gs[-1]))
        return out

    def with_cycle_time(self, cycle_time: float) -> "PulseSequence":
        return PulseSequence(self.segments, cycle_time, self.name)


def sel_dd(axis: str, cycle_time: float, symmetrized: bool = False) -> PulseSequence:
    """Selective decoupling {I, sigma_axis}.

    The plain form spends half the cycle in each frame. The symmetrized
    (Carr-Purcell) form is free for the first quarter, in the sigma frame
    until three quarters, then free again.
    """
    s = pauli(axis)
    ax = axis.strip().lower()[-1]
    if symmetrized:
        return PulseSequence(((I2, 0.25), (s, 0.5), (I2, 0.25)), cycle_time, f"cp-{ax}")
    return PulseSequence(((I2, 0.5), (s, 0.5)), cycle_time, f"seldd-{ax}")


def parse_path(path) -> str:
    if isinstance(path, str):
        labels = path.replace(",", "").replace(" ", "").upper()
        labels = labels.replace("S", "") if len(labels) > 4 else labels
    else:
        labels = "".join(str(p).strip().upper()[-1] for p in path)
    if sorted(labels) != sorted("IXYZ"):
        raise ValueError(f"maximal DD path must be a permutation of I, X, Y, Z; got {path!r}")
    return labels


def max_dd(path=MAXDD_DEFAULT_PATH, cycle_time: float = 1.0) -> PulseSequence:
    """Maximal decoupling cycling the frame through a permutation of {I, X, Y, Z}."""
    labels = parse_path(path)
    return PulseSequence(tuple((pauli(c), 0.25) for c in labels), cycle_time, f"maxdd:{labels}")


def all_maxdd_paths() -> list[str]:
    return ["".join(p) for p in itertools.permutations("IXYZ")]


def free_sequence(cycle_time: float, d: int = 2) -> PulseSequence:
    return PulseSequence(((identity(d), 1.0),), cycle_time, "free")


def sequence_by_name(name: str, cycle_time: float) -> PulseSequence:
    """Resolve ``seldd-x``, ``cp-x``, ``maxdd:IXZY`` style names."""
    key = name.strip().lower()
    if key == "free":
        return free_sequence(cycle_time)
    if key.startswith("seldd-"):
        return sel_dd(key[-1], cycle_time, symmetrized=False)
    if key.startswith("cp-"):
        return sel_dd(key[-1], cycle_time, symmetrized=True)
    if key == "maxdd":
        return max_dd(MAXDD_DEFAULT_PATH, cycle_time)
    if key.startswith("maxdd:"):
        return max_dd(key.split(":", 1)[1], cycle_time)
    raise ValueError(f"unknown pulse sequence {name!r}")


def _lift(g: np.ndarray, d_total: int) -> np.ndarray:
    d = g.shape[0]
    if d_total % d:
        raise DimensionError(f"control of dimension {d} does not divide Hamiltonian dimension {d_total}")
    return g if d == d_total else kron(g, identity(d_total // d))


def evolve_cycle(h, seq: PulseSequence) -> np.ndarray:
    """Physical-frame propagator over one cycle.

    Time order runs right to left: the first segment's factor is rightmost.
    Each segment contributes G_j^dag exp(-i H tau_j) G_j, which is the
    physical evolution between the pulses entering and leaving the segment;
    the product is the same as the pulse-by-pulse physical product because
    the pulses telescope.
    """
    h = as_matrix(h)
    d = h.shape[0]
    u = identity(d)
    for (g, _), tau in zip(seq.segments, seq.durations):
        gl = _lift(g, d)
        u = dag(gl) @ expm(h, -1j * tau) @ gl @ u
    return u


def evolve_n_cycles(h, seq: PulseSequence, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("number of cycles must be at least 1")
    return np.linalg.matrix_power(evolve_cycle(h, seq), n)


def evolve_physical(h, seq: PulseSequence) -> np.ndarray:
    """Pulse-by-pulse physical product; equals ``evolve_cycle`` for any sequence."""
    h = as_matrix(h)
    d = h.shape[0]
    pulses = [_lift(p, d) for p in seq.pulses()]
    u = pulses[0]
    for p, tau in zip(pulses[1:], seq.durations):
        u = p @ expm(h, -1j * tau) @ u
    return u
