"""
Open-system Hamiltonians.

``OpenSystemModel`` holds the decomposition

    H_tot = H_S (x) I_E + I_S (x) H_E + sum_i S_i (x) B_i

with system factor first. ``QubitErrorModel`` is the single-qubit benchmark
family ``H = omega_z Z + eps_x X + eps_y Y + eps_z Z`` where ``omega_z Z`` is
the estimated part and the ``eps`` components are the estimation error.
Units have hbar = 1; times are measured in units of 1/omega_z by convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cxmat import as_matrix, expm, identity, is_hermitian, kron
from .errors import DimensionError, ValidationError
from .pauli import SX, SY, SZ, pauli_coefficients


@dataclass(frozen=True)
class OpenSystemModel:
    """System-environment Hamiltonian with ``d_e = 1`` meaning a closed system.

    ``env_state`` is the environment's initial pure state; it defaults to
    the first basis vector.
    """

    d_s: int
    d_e: int
    h_s: np.ndarray
    h_e: np.ndarray | None = None
    couplings: tuple = ()
    env_state: np.ndarray | None = None

    def __post_init__(self):
        h_s = as_matrix(self.h_s)
        h_e = identity(self.d_e) * 0 if self.h_e is None else as_matrix(self.h_e)
        if h_s.shape != (self.d_s, self.d_s):
            raise DimensionError(f"H_S has shape {h_s.shape}, expected {self.d_s}x{self.d_s}")
        if h_e.shape != (self.d_e, self.d_e):
            raise DimensionError(f"H_E has shape {h_e.shape}, expected {self.d_e}x{self.d_e}")
        pairs = []
        for s, b in self.couplings:
            s, b = as_matrix(s), as_matrix(b)
            if s.shape != (self.d_s, self.d_s) or b.shape != (self.d_e, self.d_e):
                raise DimensionError("coupling operator shapes do not match (d_s, d_e)")
            if abs(np.trace(s)) > 1e-12 * max(np.linalg.norm(s), 1.0):
                raise ValidationError("coupling operators S_i must be traceless")
            pairs.append((s, b))
        for name, m in [("H_S", h_s), ("H_E", h_e)] + [(f"S/B_{i}", m) for i, p in enumerate(pairs) for m in p]:
            if not is_hermitian(m):
                raise ValidationError(f"{name} is not Hermitian")
        xi = np.zeros(self.d_e, dtype=complex)
        if self.env_state is None:
            xi[0] = 1.0
        else:
            xi = np.asarray(self.env_state, dtype=complex).reshape(self.d_e)
            xi = xi / np.linalg.norm(xi)
        object.__setattr__(self, "h_s", h_s)
        object.__setattr__(self, "h_e", h_e)
        object.__setattr__(self, "couplings", tuple(pairs))
        object.__setattr__(self, "env_state", xi)

    @property
    def dim(self) -> int:
        return self.d_s * self.d_e

    def env_density(self) -> np.ndarray:
        return np.outer(self.env_state, self.env_state.conj())


@dataclass(frozen=True)
class QubitErrorModel:
    omega_z: float = 1.0
    eps_x: float = 0.0
    eps_y: float = 0.0
    eps_z: float = 0.0

    def estimate(self) -> np.ndarray:
        return self.omega_z * SZ

    def error(self) -> np.ndarray:
        return self.eps_x * SX + self.eps_y * SY + self.eps_z * SZ

    def total_hamiltonian(self) -> np.ndarray:
        return self.estimate() + self.error()

    @property
    def eps(self) -> np.ndarray:
        return np.array([self.eps_x, self.eps_y, self.eps_z])

    def to_open_system(self) -> OpenSystemModel:
        return OpenSystemModel(d_s=2, d_e=1, h_s=self.total_hamiltonian())

    @classmethod
    def from_hamiltonian(cls, h, omega_z: float = 1.0) -> "QubitErrorModel":
        """Split a traceless qubit Hamiltonian into ``omega_z Z`` plus error."""
        _, cx, cy, cz = pauli_coefficients(h)
        return cls(omega_z=omega_z, eps_x=cx, eps_y=cy, eps_z=cz - omega_z)


def as_open_system(model) -> OpenSystemModel:
    if isinstance(model, OpenSystemModel):
        return model
    if isinstance(model, QubitErrorModel):
        return model.to_open_system()
    raise TypeError(f"cannot interpret {type(model).__name__} as an open-system model")


def total_hamiltonian(model) -> np.ndarray:
    m = as_open_system(model)
    h = kron(m.h_s, identity(m.d_e)) + kron(identity(m.d_s), m.h_e)
    for s, b in m.couplings:
        h = h + kron(s, b)
    return h


def propagator(model, t: float) -> np.ndarray:
    """U_SE(t) = exp(-i H_tot t)."""
    if t < 0:
        raise ValueError("propagation time must be nonnegative")
    return expm(total_hamiltonian(model), -1j * t)


def make_model(h_s, h_e=None, couplings: Sequence = (), env_state=None) -> OpenSystemModel:
    """Build an ``OpenSystemModel`` inferring dimensions from the operators."""
    h_s = as_matrix(h_s)
    if h_e is None:
        d_e = as_matrix(couplings[0][1]).shape[0] if couplings else 1
    else:
        d_e = as_matrix(h_e).shape[0]
    return OpenSystemModel(h_s.shape[0], d_e, h_s, h_e, tuple(couplings), env_state)
