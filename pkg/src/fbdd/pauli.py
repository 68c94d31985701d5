"""Single-qubit gate constants and composite gate builders.

The global factor ordering for protocol state spaces is
ancilla (x) system (x) environment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cxmat import as_matrix, identity, is_unitary, kron
from .errors import DimensionError, ValidationError

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
PROJ0 = np.outer(KET0, KET0.conj())
PROJ1 = np.outer(KET1, KET1.conj())
PLUS = (KET0 + KET1) / np.sqrt(2)


@dataclass(frozen=True)
class QubitGate:
    label: str
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape != (2, 2) or not is_unitary(self.matrix):
            raise ValidationError(f"gate {self.label!r} is not a 2x2 unitary")


GATES = {label: QubitGate(label, m) for label, m in [*PAULI.items(), ("H", HADAMARD)]}


def pauli(label: str) -> np.ndarray:
    """Pauli matrix for ``label`` in {I, X, Y, Z} (case-insensitive, ``sx`` style accepted)."""
    key = label.strip().upper()
    if key.startswith("S") and len(key) == 2:
        key = key[1]
    try:
        return PAULI[key]
    except KeyError:
        raise ValueError(f"unknown Pauli label {label!r}") from None


def conditional_gate(u_s, d_s: int | None = None) -> np.ndarray:
    """Ancilla-controlled gate |0><0| (x) I + |1><1| (x) U_S on ancilla (x) system."""
    u = as_matrix(u_s)
    if d_s is None:
        d_s = u.shape[0]
    if u.shape != (d_s, d_s):
        raise DimensionError(f"U_S has shape {u.shape}, expected ({d_s}, {d_s})")
    if not is_unitary(u):
        raise ValidationError("conditional gate payload must be unitary")
    return kron(PROJ0, identity(d_s)) + kron(PROJ1, u)


def embed(op, slot: int, dims: Sequence[int]) -> np.ndarray:
    """Tensor ``op`` into factor ``slot`` of a product space with identities elsewhere."""
    m = as_matrix(op)
    dims = list(dims)
    if not 0 <= slot < len(dims):
        raise DimensionError(f"slot {slot} out of range for {len(dims)} factors")
    if m.shape != (dims[slot], dims[slot]):
        raise DimensionError(f"operator of shape {m.shape} does not fit factor of dimension {dims[slot]}")
    left = int(np.prod(dims[:slot])) if slot else 1
    right = int(np.prod(dims[slot + 1:])) if slot + 1 < len(dims) else 1
    return kron(identity(left), m, identity(right))


def bloch_operator(n) -> np.ndarray:
    """n_x X + n_y Y + n_z Z for a real 3-vector ``n``."""
    nx, ny, nz = (float(c) for c in n)
    return nx * SX + ny * SY + nz * SZ


def pauli_coefficients(h) -> np.ndarray:
    """Real coefficients (c_I, c_x, c_y, c_z) of a 2x2 Hermitian matrix in the Pauli basis."""
    m = as_matrix(h)
    return np.array([np.trace(p @ m).real / 2 for p in (I2, SX, SY, SZ)])
