"""Kernel matrices: Gaussian, graph diffusion, mixtures and the Laplacian
pseudo-inverse, plus the kNN graph they are built on and the variance
quadratic forms used as constraints.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.spatial.distance import cdist

KINDS = ("gaussian", "diffusion", "mixed", "laplacianPinv")
CONNECTIVITY_RTOL = 1e-9


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Kernel configuration.

    ``gamma`` is the inverse squared length scale of the Gaussian kernel,
    ``tau`` the diffusion time, ``w`` the weight of the Gaussian part in a
    mixture and ``knn`` the neighbour count of the graph.
    """

    kind: str = "gaussian"
    gamma: float | None = None
    tau: float | None = None
    w: float | None = None
    knn: int = 10
    jitter: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        if self.gamma is not None and self.gamma < 0:
            raise KernelError("gamma must be >= 0")
        if self.tau is not None and self.tau < 0:
            raise KernelError("tau must be >= 0")
        if self.w is not None and not 0.0 <= self.w <= 1.0:
            raise KernelError("w must lie in [0, 1]")
        if self.knn < 1:
            raise KernelError("knn must be >= 1")
        if self.jitter < 0:
            raise KernelError("jitter must be >= 0")
        need = {
            "gaussian": ("gamma",),
            "diffusion": ("tau",),
            "mixed": ("gamma", "tau", "w"),
            "laplacianPinv": (),
        }[self.kind]
        missing = [n for n in need if getattr(self, n) is None]
        if missing:
            raise KernelError(f"{self.kind} kernel needs {', '.join(missing)}")

    @property
    def uses_graph(self) -> bool:
        return self.kind != "gaussian"

    def to_dict(self) -> dict:
        return asdict(self)

    def build(self, points, graph: Graph | None = None) -> np.ndarray:
        """Assemble the kernel matrix over `points`."""
        points = np.asarray(points, dtype=float)
        if self.uses_graph and graph is None:
            graph = build_graph(points, self.knn)
        if self.kind == "gaussian":
            k = gaussian_kernel(points, self.gamma)
        elif self.kind == "diffusion":
            k = diffusion_kernel(graph, self.tau)
        elif self.kind == "mixed":
            k = mixed_kernel(gaussian_kernel(points, self.gamma),
                             diffusion_kernel(graph, self.tau), self.w)
        else:
            k = laplacian_pinv(graph)
        if self.jitter:
            k = k + self.jitter * np.eye(k.shape[0])
        return k


@dataclass(frozen=True)
class Graph:
    """Weighted graph with normalized weights ``S = D^-1/2 W D^-1/2`` and
    Laplacian ``L = diag(S e) - S``."""

    w: np.ndarray
    s: np.ndarray
    laplacian: np.ndarray

    @classmethod
    def from_weights(cls, w) -> Graph:
        w = np.asarray(w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise KernelError("weight matrix must be square")
        if np.any(w < 0) or not np.allclose(w, w.T, rtol=0, atol=1e-14 * max(w.max(), 1)):
            raise KernelError("weights must be symmetric and nonnegative")
        w = 0.5 * (w + w.T)
        np.fill_diagonal(w, 0.0)
        degree = w.sum(axis=1)
        if np.any(degree <= 0):
            isolated = np.flatnonzero(degree <= 0)
            raise KernelError(f"isolated vertices {isolated.tolist()[:10]}; increase knn")
        scale = 1.0 / np.sqrt(degree)
        s = scale[:, None] * w * scale[None, :]
        lap = np.diag(s.sum(axis=1)) - s
        return cls(w, s, 0.5 * (lap + lap.T))

    @property
    def m(self) -> int:
        return self.w.shape[0]


def _check_points(points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if not np.all(np.isfinite(points)):
        raise KernelError("non-finite feature values")
    return points


def squared_distances(x, y=None) -> np.ndarray:
    x = _check_points(x)
    y = x if y is None else _check_points(y)
    return cdist(x, y, "sqeuclidean")


def gaussian_kernel(points, gamma: float, other=None) -> np.ndarray:
    """``exp(-gamma ||x_i - y_j||^2)``; square and symmetric when `other` is None."""
    if gamma < 0:
        raise KernelError("gamma must be >= 0")
    d2 = squared_distances(points, other)
    k = np.exp(-gamma * d2)
    if other is None:
        np.fill_diagonal(k, 1.0)
    return k


def median_gamma(points) -> float:
    """``1 / median`` of the off-diagonal squared distances."""
    d2 = squared_distances(points)
    off = d2[np.triu_indices_from(d2, k=1)]
    return 1.0 / float(np.median(off))


def build_graph(points, knn: int) -> Graph:
    """Symmetrized kNN graph with Gaussian edge weights.

    An edge joins i and j when either is among the other's `knn` nearest
    neighbours. Weights are ``exp(-d^2 / sigma2)`` with ``sigma2`` the mean
    squared distance over connected pairs.
    """
    points = _check_points(points)
    m = points.shape[0]
    if knn >= m:
        raise KernelError(f"knn={knn} must be smaller than the number of points {m}")
    d2 = squared_distances(points)
    np.fill_diagonal(d2, np.inf)
    nearest = np.argpartition(d2, knn - 1, axis=1)[:, :knn]
    adj = np.zeros((m, m), dtype=bool)
    adj[np.repeat(np.arange(m), knn), nearest.ravel()] = True
    adj |= adj.T
    np.fill_diagonal(adj, False)
    sigma2 = float(d2[adj].mean())
    if sigma2 <= 0:
        raise KernelError("all connected points coincide")
    w = np.where(adj, np.exp(-np.where(adj, d2, 0.0) / sigma2), 0.0)
    return Graph.from_weights(w)


def diffusion_kernel(graph: Graph, tau: float) -> np.ndarray:
    """``exp(-tau L)`` via the symmetric eigendecomposition of L."""
    if tau < 0:
        raise KernelError("tau must be >= 0")
    lam, u = sla.eigh(graph.laplacian)
    k = (u * np.exp(-tau * lam)) @ u.T
    return 0.5 * (k + k.T)


def mixed_kernel(k_gauss, k_diff, w: float) -> np.ndarray:
    """Convex combination ``w K_gauss + (1 - w) K_diff``."""
    k_gauss = np.asarray(k_gauss, dtype=float)
    k_diff = np.asarray(k_diff, dtype=float)
    if k_gauss.shape != k_diff.shape:
        raise KernelError(f"shape mismatch {k_gauss.shape} vs {k_diff.shape}")
    if not 0.0 <= w <= 1.0:
        raise KernelError("w must lie in [0, 1]")
    if w == 1.0:
        return k_gauss.copy()
    if w == 0.0:
        return k_diff.copy()
    return w * k_gauss + (1.0 - w) * k_diff


def laplacian_pinv(graph: Graph) -> np.ndarray:
    """Pseudo-inverse of the Laplacian of a connected graph."""
    lam, u = sla.eigh(graph.laplacian)
    tol = CONNECTIVITY_RTOL * lam[-1]
    null = lam < tol
    if null.sum() > 1:
        raise KernelError(f"graph is disconnected ({null.sum()} components)")
    keep = ~null
    k = (u[:, keep] / lam[keep]) @ u[:, keep].T
    return 0.5 * (k + k.T)


def default_jitter(k) -> float:
    """``1e-10 * trace(K) / m``."""
    k = np.asarray(k)
    return 1e-10 * float(np.trace(k)) / k.shape[0]


def check_kernel(k, rtol_sym: float = 1e-12, rtol_psd: float = 1e-8) -> None:
    """Raise unless K is symmetric and PSD within the given relative tolerances."""
    k = np.asarray(k, dtype=float)
    scale = np.linalg.norm(k, 2)
    if np.abs(k - k.T).max() > rtol_sym * max(scale, 1e-300):
        raise KernelError("kernel matrix is not symmetric")
    lam_min = sla.eigh(k, eigvals_only=True, subset_by_index=[0, 0])[0]
    if lam_min < -rtol_psd * scale:
        raise KernelError(f"kernel matrix is indefinite (min eigenvalue {lam_min:.3g})")


# --------------------------------------------------------------------------
# Variance quadratic forms


def centering(m: int) -> np.ndarray:
    """``I - E_m`` where ``E_m`` has all entries ``1/m``."""
    return np.eye(m) - np.full((m, m), 1.0 / m)


def centered_variance_operator(k) -> np.ndarray:
    """``K.T (I - E_m) K``: a.T P a is the summed squared deviation of K a
    from its mean."""
    k = np.asarray(k, dtype=float)
    kc = k - k.mean(axis=0, keepdims=True)
    p = k.T @ kc
    return 0.5 * (p + p.T)


def uncentered_variance_operator(k) -> np.ndarray:
    """``K.T K``."""
    k = np.asarray(k, dtype=float)
    p = k.T @ k
    return 0.5 * (p + p.T)


def variance_operator(k, centered: bool) -> np.ndarray:
    return centered_variance_operator(k) if centered else uncentered_variance_operator(k)


# --------------------------------------------------------------------------
# On-disk cache

_MAGIC = b"SSKPCA-KERNEL 1\n"


def save_kernel(path, k, spec: KernelSpec, dataset_hash: str = "") -> None:
    """Write K row-major (float64, little endian) after a one-line JSON header."""
    k = np.ascontiguousarray(k, dtype="<f8")
    header = {"m": k.shape[0], "dataset": dataset_hash, **spec.to_dict()}
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(k.tobytes(order="C"))


def load_kernel(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        if fh.readline() != _MAGIC:
            raise KernelError(f"{path}: not a kernel cache file")
        header = json.loads(fh.readline())
        m = int(header["m"])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != m * m:
        raise KernelError(f"{path}: truncated kernel payload")
    return data.reshape(m, m).copy(), header


class KernelCache:
    """Kernel matrices cached on disk, keyed by dataset hash and spec."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, dataset_hash: str, spec: KernelSpec) -> Path:
        key = json.dumps({"dataset": dataset_hash, **spec.to_dict()}, sort_keys=True)
        return self.directory / (hashlib.sha256(key.encode()).hexdigest()[:24] + ".kern")

    def get(self, points, spec: KernelSpec, dataset_hash: str) -> np.ndarray:
        path = self._path(dataset_hash, spec)
        if path.exists():
            return load_kernel(path)[0]
        k = spec.build(points)
        save_kernel(path, k, spec, dataset_hash)
        return k
