"""Shared constructions for the test suite."""

import numpy as np

from fbdd.cxmat import dag, kron, random_hermitian, random_unitary
from fbdd.model import make_model


def random_pure(rng, d=2):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def overlap(rho, psi):
    return float(np.real(np.vdot(psi, rho @ psi)))


def random_ld_model(rng, d_s, d_e):
    """H = sum_i |d_i><d_i| (x) H_i in a random system basis, so every propagator is LD."""
    d = random_unitary(d_s, rng)
    hs = [random_hermitian(d_e, rng) for _ in range(d_s)]
    # sum_i P_i (x) H_i = I (x) mean(H_i) + sum_i (P_i - I/d_s) (x) H_i, with traceless system factors
    couplings = [(np.outer(d[:, i], d[:, i].conj()) - np.eye(d_s) / d_s, hs[i]) for i in range(d_s)]
    return make_model(np.zeros((d_s, d_s), dtype=complex), sum(hs) / d_s, couplings)


def random_ld_unitary(rng, d_s, d_e):
    """sum_i |d_i><d_i| (x) W_i with random unitary W_i."""
    d = random_unitary(d_s, rng)
    u = np.zeros((d_s * d_e, d_s * d_e), dtype=complex)
    for i in range(d_s):
        u += kron(np.outer(d[:, i], d[:, i].conj()), random_unitary(d_e, rng))
    return u


def random_normal_traceless(rng, n, symmetric):
    """V diag(w) V^dag; ``symmetric`` forces a negation-invariant spectrum."""
    if symmetric:
        half = rng.standard_normal(n // 2) + 1j * rng.standard_normal(n // 2)
        w = np.concatenate([half, -half, np.zeros(n % 2)])
    else:
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        w -= w.mean()
    w = rng.permutation(w)
    v = random_unitary(n, rng)
    return v @ np.diag(w) @ dag(v)
