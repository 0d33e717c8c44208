"""Kernel PCA as variance maximization over the RKHS unit ball, and the
minimum-variance (MV) variant that also penalizes within-group variance.

Both reduce to symmetric-definite eigenproblems. Computations run in the
coordinates ``y`` of range(K): with ``K = U diag(lam) U.T`` (small
eigenvalues dropped), ``Phi = U diag(sqrt(lam))`` gives ``K a = Phi y`` and
``a.T K a = y.T y`` for ``a = U diag(1/sqrt(lam)) y``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .eigen import RANGE_RTOL, EigenError, fix_signs
from .kernels import KernelError, KernelSpec, gaussian_kernel


@dataclass(frozen=True)
class KernelFeatures:
    """Eigenbasis of K restricted to eigenvalues above ``rtol * max``."""

    basis: np.ndarray
    values: np.ndarray

    @classmethod
    def of(cls, k, rtol: float = RANGE_RTOL) -> KernelFeatures:
        k = np.asarray(k, dtype=float)
        lam, u = sla.eigh(0.5 * (k + k.T))
        if lam[-1] <= 0:
            raise EigenError("kernel matrix is numerically zero")
        keep = lam > rtol * lam[-1]
        return cls(u[:, keep], lam[keep])

    @property
    def m(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.values.size

    @property
    def phi(self) -> np.ndarray:
        """Feature matrix with ``Phi @ Phi.T ~= K``."""
        return self.basis * np.sqrt(self.values)

    def to_alpha(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        scale = 1.0 / np.sqrt(self.values)
        return self.basis @ (y * scale[:, None] if y.ndim == 2 else y * scale)

    def from_alpha(self, alpha) -> np.ndarray:
        return np.sqrt(self.values) * (self.basis.T @ np.asarray(alpha, dtype=float))

    def variance_form(self, centered: bool) -> np.ndarray:
        """Variance operator in reduced coordinates: ``Phi.T (I - E_m) Phi``
        or ``Phi.T Phi``."""
        phi = self.phi
        if centered:
            phi_c = phi - phi.mean(axis=0, keepdims=True)
            q = phi_c.T @ phi_c
        else:
            q = phi.T @ phi
        return 0.5 * (q + q.T)


@dataclass(frozen=True)
class SolutionFunction:
    """``f(x) = sum_i alpha_i k(x_i, x)`` minus ``centering_mean``.

    ``values`` holds ``K @ alpha`` on the training points. Out-of-sample
    evaluation needs the training points and a Gaussian kernel spec; graph
    kernels only define values on the training vertices.
    """

    alpha: np.ndarray
    values: np.ndarray
    centering_mean: float = 0.0
    spec: KernelSpec | None = None
    points: np.ndarray | None = None
    eigenvalue: float | None = None
    details: dict = field(default_factory=dict, compare=False)

    @property
    def scores(self) -> np.ndarray:
        """Training values with the centering mean removed."""
        return self.values - self.centering_mean

    def predict(self, x) -> np.ndarray:
        if self.points is None or self.spec is None:
            raise KernelError("prediction needs training points and a kernel spec")
        if self.spec.kind != "gaussian":
            raise KernelError(f"{self.spec.kind} kernels have no out-of-sample extension")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.points.shape[1]:
            raise ValueError(
                f"expected points of dimension {self.points.shape[1]}, got {x.shape[1]}"
            )
        kx = gaussian_kernel(x, self.spec.gamma, self.points)
        return kx @ self.alpha - self.centering_mean


def make_function(alpha, k, centered: bool, spec=None, points=None, **extra):
    values = np.asarray(k) @ alpha
    mean = float(values.mean()) if centered else 0.0
    return SolutionFunction(alpha, values, mean, spec, points, **extra)


@dataclass(frozen=True)
class EigenfunctionBasis:
    functions: tuple[SolutionFunction, ...]
    eigenvalues: np.ndarray

    def __len__(self):
        return len(self.functions)

    def __getitem__(self, i):
        return self.functions[i]

    @property
    def alphas(self) -> np.ndarray:
        return np.column_stack([f.alpha for f in self.functions])

    def scores(self) -> np.ndarray:
        """(m, k) matrix of centered training values."""
        return np.column_stack([f.scores for f in self.functions])


def _top_pencil(q, c_form, n_components):
    """Top eigenpairs of ``q y = mu c_form y`` with ``y.T c_form y = 1``."""
    r = q.shape[0]
    rank = int(np.sum(sla.eigvalsh(q) > RANGE_RTOL * max(np.abs(q).max(), 1e-300)))
    if n_components < 1 or n_components > rank:
        raise EigenError(
            f"requested {n_components} components; variance operator has rank {rank}"
        )
    if c_form is None:
        mu, y = sla.eigh(q, subset_by_index=[r - n_components, r - 1])
    else:
        mu, y = sla.eigh(q, c_form, subset_by_index=[r - n_components, r - 1])
    return mu[::-1], y[:, ::-1]


def _basis(features, mu, y, k, centered, spec, points, method):
    alphas = fix_signs(features.to_alpha(y))
    funcs = tuple(
        make_function(alphas[:, j], k, centered, spec, points,
                      eigenvalue=float(mu[j]), details={"method": method})
        for j in range(alphas.shape[1])
    )
    return EigenfunctionBasis(funcs, np.asarray(mu, dtype=float))


def kpca_fit(k, centered: bool = True, n_components: int = 1, *, spec=None,
             points=None, features: KernelFeatures | None = None) -> EigenfunctionBasis:
    """Top eigenfunctions of kernel PCA.

    Maximizes the (centered or uncentered) variance of ``K a`` subject to
    ``a.T K a = 1``. Each eigenvalue equals the variance attained by its
    eigenfunction.
    """
    k = np.asarray(k, dtype=float)
    features = features or KernelFeatures.of(k)
    q = features.variance_form(centered)
    mu, y = _top_pencil(q, None, n_components)
    return _basis(features, mu, y, k, centered, spec, points, "kpca")


def within_group_form(features: KernelFeatures, groups) -> np.ndarray:
    """``sum_i Phi_i.T (I - E_|G_i|) Phi_i`` in reduced coordinates."""
    phi = features.phi
    out = np.zeros((features.rank, features.rank))
    for g in groups:
        block = phi[np.asarray(g, dtype=int)]
        block = block - block.mean(axis=0, keepdims=True)
        out += block.T @ block
    return 0.5 * (out + out.T)


def mvkpca_fit(k, groups, c: float, n_components: int = 1, *, centered: bool = True,
               spec=None, points=None,
               features: KernelFeatures | None = None) -> EigenfunctionBasis:
    """Minimum-variance KPCA.

    Maximizes the variance of ``K a`` subject to
    ``a.T K a + c * sum_i var_i(K_i a) = 1`` where ``var_i`` is the summed
    squared deviation within group ``G_i``. Each eigenfunction is normalized
    by that constraint form.
    """
    if c < 0:
        raise ValueError("c must be >= 0")
    k = np.asarray(k, dtype=float)
    features = features or KernelFeatures.of(k)
    q = features.variance_form(centered)
    c_form = np.eye(features.rank) + c * within_group_form(features, groups)
    mu, y = _top_pencil(q, c_form, n_components)
    return _basis(features, mu, y, k, centered, spec, points, "mv")


def within_group_variance(values, groups) -> float:
    values = np.asarray(values, dtype=float)
    return float(sum(np.sum((values[g] - values[g].mean()) ** 2) for g in groups))


# --------------------------------------------------------------------------
# Model files


def save_model(path, functions, *, spec: KernelSpec | None, points=None,
               dataset_hash: str = "", centered: bool = True, params: dict | None = None,
               head: dict | None = None) -> None:
    """Plain-text (JSON) model: kernel spec, training hash, coefficients."""
    functions = list(functions)
    doc = {
        "format": "sskpca-model/1",
        "kernel": spec.to_dict() if spec is not None else None,
        "training_hash": dataset_hash,
        "centered": centered,
        "params": params or {},
        "head": head,
        "functions": [
            {
                "alpha": f.alpha.tolist(),
                "centering_mean": f.centering_mean,
                "eigenvalue": f.eigenvalue,
            }
            for f in functions
        ],
        "points": None if points is None else np.asarray(points).tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> dict:
    """Inverse of :func:`save_model`; returns the document with
    ``functions`` rebuilt as :class:`SolutionFunction` objects (``values``
    empty, since K is not stored)."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "sskpca-model/1":
        raise ValueError(f"{path}: not a model file")
    spec = KernelSpec(**doc["kernel"]) if doc["kernel"] else None
    points = None if doc["points"] is None else np.asarray(doc["points"], dtype=float)
    doc["kernel"] = spec
    doc["points"] = points
    doc["functions"] = [
        SolutionFunction(np.asarray(f["alpha"], dtype=float), np.empty(0),
                         float(f["centering_mean"]), spec, points, f["eigenvalue"])
        for f in doc["functions"]
    ]
    return doc
