"""Dense symmetric and symmetric-definite generalized eigensolvers.

Generalized problems ``A v = mu B v`` with a rank-deficient PSD ``B`` are
solved by whitening on the range of ``B``: with ``W`` such that
``W.T @ B @ W = I`` the pencil reduces to the ordinary symmetric problem for
``W.T @ A @ W``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

RANGE_RTOL = 1e-10


class EigenError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.ndim == 1:
        return fix_signs(vectors[:, None])[:, 0]
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _check_symmetric(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.all(np.isfinite(a)):
        raise EigenError(f"{name} has non-finite entries")
    return a


def symmetric_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of a symmetric matrix, ascending, unit vectors with the
    sign convention of :func:`fix_signs`."""
    a = _check_symmetric(a)
    values, vectors = sla.eigh(0.5 * (a + a.T))
    return values, fix_signs(vectors)


def range_whitener(b, rtol: float = RANGE_RTOL) -> np.ndarray:
    """Return ``W`` (n x r) spanning range(b) with ``W.T @ b @ W = I``.

    Eigenvalues below ``rtol * max eigenvalue`` are treated as zero.
    """
    b = _check_symmetric(b, "B")
    values, vectors = sla.eigh(0.5 * (b + b.T))
    top = values[-1] if values.size else 0.0
    if top <= 0 or not np.isfinite(top):
        raise EigenError("B is numerically zero")
    keep = values > rtol * top
    return vectors[:, keep] / np.sqrt(values[keep])


def generalized_eig_top(a, b, k: int = 1, rtol: float = RANGE_RTOL):
    """Top-k eigenpairs of ``A v = mu B v`` restricted to range(B).

    Returned vectors satisfy ``v.T @ B @ v = 1`` and are B-orthogonal.
    Values are descending.
    """
    a = _check_symmetric(a, "A")
    w = range_whitener(b, rtol)
    if k > w.shape[1]:
        raise EigenError(f"requested {k} eigenpairs but range(B) has dimension {w.shape[1]}")
    reduced = w.T @ a @ w
    values, vectors = sla.eigh(0.5 * (reduced + reduced.T))
    order = np.argsort(values)[::-1][:k]
    return values[order], fix_signs(w @ vectors[:, order])


def generalized_eig_max(a, b, rtol: float = RANGE_RTOL) -> EigenPair:
    """Maximizer of the Rayleigh quotient ``v.T A v / v.T B v`` over range(B).

    The vector is returned with unit 2-norm.
    """
    values, vectors = generalized_eig_top(a, b, 1, rtol)
    v = vectors[:, 0]
    return EigenPair(float(values[0]), v / np.linalg.norm(v))


def pencil_left_edge(c, p) -> tuple[float, np.ndarray]:
    """Smallest positive ``zeta`` with ``det(C - zeta P) = 0``.

    Computed as ``1 / mu_max`` of ``P v = mu C v`` (C positive definite).
    The returned vector is scaled so ``u.T @ P @ u = 1``.
    """
    c = _check_symmetric(c, "C")
    p = _check_symmetric(p, "P")
    n = c.shape[0]
    try:
        values, vectors = sla.eigh(0.5 * (p + p.T), 0.5 * (c + c.T),
                                   subset_by_index=[n - 1, n - 1])
    except np.linalg.LinAlgError as exc:
        raise EigenError("C is not positive definite") from exc
    mu = values[-1]
    scale = max(np.abs(p).max(), np.finfo(float).tiny)
    if mu <= RANGE_RTOL * scale / max(np.abs(c).max(), np.finfo(float).tiny):
        raise EigenError("P is numerically zero")
    u = fix_signs(vectors[:, -1])
    return 1.0 / mu, u / np.sqrt(u @ p @ u)
