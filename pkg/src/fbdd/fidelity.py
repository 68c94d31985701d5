"""
Qubit channels and their fidelity with the identity.

A ``ChannelMap`` stores the images T(I), T(X), T(Y), T(Z) of the Pauli
basis; by linearity this fixes T on every system operator. The average
fidelity is

    Fbar = 1/2 + (1/12) sum_j tr(sigma_j T(sigma_j))

and the entanglement fidelity F = ((d + 1) Fbar - 1) / d with d = 2. For a
unitary channel both reduce to |tr U|^2 / d^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cxmat import as_matrix, dag, fro, kron, partial_trace
from .errors import DimensionError, ValidationError
from .pauli import I2, SX, SY, SZ

BASIS = (I2, SX, SY, SZ)
CHANNEL_ATOL = 1e-10


@dataclass
class ChannelMap:
    action: tuple  # T(I), T(X), T(Y), T(Z)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        action = tuple(as_matrix(a) for a in self.action)
        if len(action) != 4 or any(a.shape != (2, 2) for a in action):
            raise DimensionError("a qubit channel needs four 2x2 images")
        self.action = action

    def __call__(self, rho) -> np.ndarray:
        rho = as_matrix(rho)
        coeffs = [np.trace(p @ rho) / 2 for p in BASIS]
        return sum(c * a for c, a in zip(coeffs, self.action))

    def validate(self, atol: float = CHANNEL_ATOL) -> None:
        tr = np.trace(self.action[0])
        if abs(tr - 2) > atol:
            raise ValidationError(f"channel is not trace preserving: tr T(I) = {tr:.12g}")
        for a in self.action:
            if fro(a - dag(a)) > atol:
                raise ValidationError("channel does not preserve Hermiticity")

    def compose(self, other: "ChannelMap") -> "ChannelMap":
        """self after other."""
        return ChannelMap(tuple(self(a) for a in other.action), dict(self.metadata))


def identity_channel() -> ChannelMap:
    return ChannelMap(BASIS, {"name": "identity"})


def channel_from_unitary(u, metadata=None) -> ChannelMap:
    u = as_matrix(u)
    if u.shape != (2, 2):
        raise DimensionError("channel_from_unitary expects a qubit unitary")
    return ChannelMap(tuple(u @ p @ dag(u) for p in BASIS), metadata or {})


def channel_from_kraus(kraus, d_e: int = 1, env_state=None, metadata=None) -> ChannelMap:
    """Ensemble channel of Kraus operators acting on system (x) environment.

    Each basis operator enters as sigma (x) xi and the environment is traced
    out afterwards.
    """
    ops = [as_matrix(k) for k in kraus]
    xi = _env_density(d_e, env_state)
    images = []
    for p in BASIS:
        x = kron(p, xi)
        y = sum(k @ x @ dag(k) for k in ops)
        images.append(partial_trace(y, [2, d_e], keep=[0]))
    return ChannelMap(tuple(images), metadata or {})


def _env_density(d_e: int, env_state=None) -> np.ndarray:
    if env_state is None:
        xi = np.zeros((d_e, d_e), dtype=complex)
        xi[0, 0] = 1.0
        return xi
    env_state = np.asarray(env_state, dtype=complex)
    if env_state.ndim == 1:
        return np.outer(env_state, env_state.conj())
    return env_state


def superoperator(kraus) -> np.ndarray:
    """Row-stacking superoperator sum_k K (x) K^* acting on vec(X)."""
    ops = [as_matrix(k) for k in kraus]
    return sum(np.kron(k, k.conj()) for k in ops)


def channel_series(kraus, n_cycles: int, d_e: int = 1, env_state=None, metadata=None):
    """Channels after 0, 1, ..., n_cycles repetitions of one Kraus cycle.

    The joint system-environment operators are propagated, so environment
    memory between cycles is kept; for d_e = 1 this equals composing the
    single-cycle channel with itself.
    """
    sup = superoperator(kraus)
    xi = _env_density(d_e, env_state)
    n = 2 * d_e
    vecs = np.stack([kron(p, xi).reshape(-1) for p in BASIS], axis=1)
    out = []
    for step in range(n_cycles + 1):
        if step:
            vecs = sup @ vecs
        images = tuple(partial_trace(vecs[:, j].reshape(n, n), [2, d_e], keep=[0]) for j in range(4))
        out.append(ChannelMap(images, dict(metadata or {}, cycles=step)))
    return out


def channel_of_protocol(protocol, model=None) -> ChannelMap:
    """Ensemble channel of a whole ``ProtocolRun`` (all cycles, both branches)."""
    from .protocols import protocol_channels

    return protocol_channels(protocol if model is None else protocol.with_model(model))[-1]


def average_fidelity(ch: ChannelMap) -> float:
    total = sum(np.trace(p @ a) for p, a in zip(BASIS[1:], ch.action[1:]))
    return float(np.real(0.5 + total / 12))


def entanglement_fidelity(ch: ChannelMap) -> float:
    return (3 * average_fidelity(ch) - 1) / 2


def unitary_fidelity(u) -> float:
    u = as_matrix(u)
    d = u.shape[0]
    return float(abs(np.trace(u)) ** 2 / d**2)


def state_fidelity(rho, psi) -> float:
    """<psi|rho|psi> for a pure reference state."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return float(np.real(np.vdot(psi, as_matrix(rho) @ psi)))


def depolarizing_channel(p: float = 1.0) -> ChannelMap:
    """rho -> (1 - p) rho + p tr(rho) I/2."""
    return ChannelMap((I2, (1 - p) * SX, (1 - p) * SY, (1 - p) * SZ), {"name": "depolarizing", "p": p})


