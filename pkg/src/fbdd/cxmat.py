"""
Dense complex linear algebra kernel.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``; every
function here is pure and never mutates its inputs. The kernel covers what
the simulators need: adjoints, commutators, Kronecker products, matrix
exponentials, eigendecompositions, partial traces and the operator-Schmidt
decomposition of bipartite operators.

Tolerances default to ``ATOL`` (absolute, on Frobenius norms) and can be
overridden per call.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .errors import DimensionError, NumericalError

ATOL = 1e-10


def as_matrix(x) -> np.ndarray:
    """Return ``x`` as a 2-D complex array (copying only when needed)."""
    m = np.asarray(x, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of shape {m.shape}")
    return m


def _square(x) -> np.ndarray:
    m = as_matrix(x)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def dag(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product tr(a^dag b)."""
    return complex(np.vdot(a, b))


def fro(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


def identity(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex)


def is_hermitian(x, rtol: float = 1e-12) -> bool:
    m = _square(x)
    return fro(m - dag(m)) <= rtol * max(fro(m), 1.0)


def is_unitary(x, atol: float = ATOL) -> bool:
    m = _square(x)
    d = m.shape[0]
    return fro(dag(m) @ m - identity(d)) <= atol * d


def is_normal(x, atol: float = ATOL) -> bool:
    m = _square(x)
    return fro(m @ dag(m) - dag(m) @ m) <= atol * max(fro(m) ** 2, 1.0)


def kron(*factors) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor outermost."""
    if not factors:
        raise DimensionError("kron needs at least one factor")
    return reduce(np.kron, (as_matrix(f) for f in factors))


def expm(x, scale: complex = 1.0, method: str = "auto") -> np.ndarray:
    """Matrix exponential ``exp(scale * x)``.

    Parameters
    ----------
    x : array_like
        Square matrix.
    scale : complex
        Scalar multiplying ``x`` before exponentiation, e.g. ``-1j * t`` for a
        propagator.
    method : {"auto", "eig", "pade"}
        ``"eig"`` diagonalises ``x`` (valid for normal matrices only),
        ``"pade"`` uses scaling-and-squaring. ``"auto"`` takes the spectral
        path whenever ``x`` is normal.
    """
    m = _square(x)
    if method not in ("auto", "eig", "pade"):
        raise ValueError(f"unknown expm method {method!r}")
    if method == "pade" or (method == "auto" and not is_normal(m)):
        return la.expm(scale * m)
    if is_hermitian(m):
        w, v = np.linalg.eigh(m)
    else:
        # complex Schur form of a normal matrix is diagonal, with unitary Z
        t, v = la.schur(m, output="complex")
        w = np.diag(t)
    return (v * np.exp(scale * w)) @ dag(v)


def partial_trace(x, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every tensor factor of ``x`` not listed in ``keep``.

    ``dims`` lists the factor dimensions in tensor order. The kept factors
    retain their relative order.
    """
    m = _square(x)
    dims = [int(d) for d in dims]
    n = len(dims)
    if int(np.prod(dims)) != m.shape[0]:
        raise DimensionError(f"factor dimensions {dims} do not match matrix size {m.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {n} factors")
    t = m.reshape(dims + dims)
    # einsum labels: rows a.., cols b..; traced factors share a label
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return np.einsum(t, row + col, out).reshape(dk, dk)


def eig(x, atol: float = ATOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors.

    Normal input gets a unitary eigenbasis (``eigh`` for Hermitian matrices,
    complex Schur otherwise) so that ``x = V diag(w) V^dag``. Non-normal input
    falls back to a general eigendecomposition, ``x = V diag(w) V^{-1}``.

    Raises
    ------
    NumericalError
        If the reconstruction residual exceeds tolerance.
    """
    m = _square(x)
    scale = max(fro(m), 1.0)
    if is_hermitian(m):
        w, v = np.linalg.eigh(m)
        w = w.astype(complex)
        recon = (v * w) @ dag(v)
    elif is_normal(m, atol):
        t, v = la.schur(m, output="complex")
        w = np.diag(t).copy()
        recon = (v * w) @ dag(v)
    else:
        w, v = np.linalg.eig(m)
        try:
            recon = (v * w) @ np.linalg.inv(v)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("eigenvector matrix is singular", residual=np.inf) from exc
    residual = fro(recon - m)
    if residual > 1e3 * atol * scale:
        raise NumericalError(
            f"eigendecomposition residual {residual:.3e} exceeds tolerance", residual=residual
        )
    return w, v


def realign(x, d_a: int, d_b: int) -> np.ndarray:
    """Map X[(i,k),(j,l)] to R[(i,j),(k,l)] for X on a (d_a x d_b) product space."""
    m = _square(x)
    if m.shape[0] != d_a * d_b:
        raise DimensionError(f"{d_a}x{d_b} does not match matrix size {m.shape[0]}")
    return m.reshape(d_a, d_b, d_a, d_b).transpose(0, 2, 1, 3).reshape(d_a * d_a, d_b * d_b)


def operator_schmidt(x, d_s: int, d_e: int, atol: float = ATOL):
    """Operator-Schmidt decomposition ``x = sum_j w_j A_j (x) B_j``.

    The ``A_j`` (on the first factor) and ``B_j`` (on the second) are
    orthonormal under the Hilbert-Schmidt inner product. Weights come out in
    descending order; terms with weight below ``atol`` (relative to the
    largest weight, floored at 1) are dropped.

    Returns
    -------
    list of (float, ndarray, ndarray)
    """
    r = realign(x, d_s, d_e)
    u, s, vh = np.linalg.svd(r, full_matrices=False)
    cut = atol * max(s[0] if s.size else 0.0, 1.0)
    terms = []
    for j, w in enumerate(s):
        if w <= cut:
            break
        terms.append((float(w), u[:, j].reshape(d_s, d_s), vh[j, :].reshape(d_e, d_e)))
    return terms


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_hermitian(d: int, rng: np.random.Generator, traceless: bool = False) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (z + dag(z)) / 2
    if traceless:
        h = h - np.trace(h) / d * identity(d)
    return h
