"""
Average-Hamiltonian (Magnus) terms for piecewise-constant control.

For a toggling-frame sequence H_1, ..., H_n with durations tau_j and cycle
time T_c, the one-cycle propagator is exp(-i Hbar T_c) with

    Hbar0 = sum_j tau_j H_j / T_c
    Hbar1 = -(i / 2 T_c) sum_{a > b} tau_a tau_b [H_a, H_b]

The second line is the exact evaluation of the double time integral for
piecewise-constant H (same-segment commutators vanish). The commutator
puts the later segment first; this is the ordering for which
exp(-i (Hbar0 + Hbar1) T_c) agrees with the time-ordered product to
third order in T_c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cxmat import as_matrix, comm, dag, is_hermitian
from .decoupling import PulseSequence, _lift
from .errors import DimensionError, ValidationError


@dataclass(frozen=True)
class ToggledHamiltonianSequence:
    terms: tuple  # of (H_j, tau_j)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("empty toggled sequence")
        terms = []
        for h, tau in self.terms:
            h = as_matrix(h)
            if not is_hermitian(h, rtol=1e-10):
                raise ValidationError("toggled Hamiltonians must be Hermitian")
            if tau <= 0:
                raise ValueError("segment durations must be positive")
            terms.append((h, float(tau)))
        object.__setattr__(self, "terms", tuple(terms))

    @property
    def cycle_time(self) -> float:
        return sum(tau for _, tau in self.terms)

    @property
    def hamiltonians(self) -> list[np.ndarray]:
        return [h for h, _ in self.terms]


def toggled_sequence(h, pulses: PulseSequence) -> ToggledHamiltonianSequence:
    """H_j = G_j^dag H G_j for each segment, in time order."""
    h = as_matrix(h)
    if h.shape[0] % pulses.dim:
        raise DimensionError("pulse dimension does not divide Hamiltonian dimension")
    terms = []
    for (g, _), tau in zip(pulses.segments, pulses.durations):
        gl = _lift(g, h.shape[0])
        terms.append((dag(gl) @ h @ gl, tau))
    return ToggledHamiltonianSequence(tuple(terms))


def average_hamiltonian(seq: ToggledHamiltonianSequence) -> np.ndarray:
    total = sum(tau * h for h, tau in seq.terms)
    return total / seq.cycle_time


def first_order_correction(seq: ToggledHamiltonianSequence) -> np.ndarray:
    hs = seq.hamiltonians
    taus = [tau for _, tau in seq.terms]
    acc = np.zeros_like(hs[0])
    for a in range(1, len(hs)):
        # sum_{b<a} tau_b H_b, accumulated once per a
        earlier = sum(taus[b] * hs[b] for b in range(a))
        acc = acc + taus[a] * comm(hs[a], earlier)
    return -0.5j * acc / seq.cycle_time


def first_order_correction_equal(hs, dt: float) -> np.ndarray:
    """Equal-spacing form -(i/2T_c) sum_{i>j} [H_i, H_j] dt^2 with T_c = n dt."""
    hs = [as_matrix(h) for h in hs]
    t_c = len(hs) * dt
    acc = np.zeros_like(hs[0])
    for i in range(len(hs)):
        for j in range(i):
            acc = acc + comm(hs[i], hs[j])
    return -0.5j * dt**2 * acc / t_c


def effective_hamiltonian(h, pulses: PulseSequence, order: int = 1) -> np.ndarray:
    """Hbar0 (order 0) or Hbar0 + Hbar1 (order 1) for ``h`` under ``pulses``."""
    seq = toggled_sequence(h, pulses)
    out = average_hamiltonian(seq)
    if order >= 1:
        out = out + first_order_correction(seq)
    return out
