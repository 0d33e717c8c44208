"""Least-squares KPCA: RKHS norm plus squared labeled loss, minimized at a
fixed variance level.

    minimize    a.T K a + c ||K_L a - t||^2
    subject to  a.T P a = s2,     P = K.T (I - E_m) K  (or K.T K)

Expanding the loss gives the constrained quadratic with ``C = K + c K_L.T K_L``
and ``b = c K_L.T t``. The fit is carried out in the reduced coordinates of
:class:`~sskpca.kpca.KernelFeatures`, where ``C`` becomes
``I + c Phi_L.T Phi_L`` and is well conditioned even when K is not.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cqp
from .data import DataError, Dataset
from .kernels import laplacian_pinv, variance_operator
from .kpca import KernelFeatures, make_function


@dataclass(frozen=True)
class LsConfig:
    c: float
    s2: float
    centered: bool = True

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("c must be >= 0")
        if not self.s2 > 0:
            raise ValueError("s2 must be > 0")


def s2_from_ratio(rho: float, dataset: Dataset) -> float:
    """Absolute variance level ``rho * m * var(t)`` (``var(t)`` taken as 1
    when all labels agree)."""
    t = dataset.targets
    var = float(np.var(t)) if t.size > 1 and np.var(t) > 0 else 1.0
    return rho * dataset.m * var


def _labeled(dataset: Dataset):
    idx = dataset.labeled
    if idx.size == 0:
        raise DataError("LS-KPCA needs at least one labeled point")
    return idx, dataset.labels[idx].astype(float)


def lskpca_problem(k, dataset: Dataset, cfg: LsConfig) -> cqp.CqpProblem:
    """The constrained quadratic in coefficient space (for reference and
    cross-checks; :func:`lskpca_fit` solves the reduced form)."""
    k = np.asarray(k, dtype=float)
    idx, t = _labeled(dataset)
    kl = k[idx]
    c_mat = k + cfg.c * kl.T @ kl
    return cqp.CqpProblem(c_mat, cfg.c * kl.T @ t, variance_operator(k, cfg.centered), cfg.s2)


def reduced_problem(features: KernelFeatures, idx, t, c: float, s2: float, q,
                    weights=None) -> cqp.CqpProblem:
    """Constrained quadratic in reduced coordinates. ``weights`` (per labeled
    point) turns the loss into a weighted one, as used by reweighting."""
    phi_l = features.phi[idx]
    wts = np.ones(len(idx)) if weights is None else np.asarray(weights, dtype=float)
    c_mat = np.eye(features.rank) + c * (phi_l.T * wts) @ phi_l
    b = c * phi_l.T @ (wts * t)
    return cqp.CqpProblem(c_mat, b, q, s2)


def _to_function(features, k, y, sol, cfg, dataset, spec, points, method):
    alpha = features.to_alpha(y)
    k = np.asarray(k, dtype=float)
    values = k @ alpha
    var = float(np.sum((values - values.mean()) ** 2)) if cfg.centered else float(values @ values)
    solution = cqp.CqpSolution(
        alpha=alpha, zeta=sol.zeta, delta=sol.delta, objective=sol.objective,
        hard_case=sol.hard_case, residual=abs(var - cfg.s2) / cfg.s2,
        evaluations=sol.evaluations,
    )
    fn = make_function(alpha, k, cfg.centered, spec, points,
                       details={"method": method, "c": cfg.c, "s2": cfg.s2,
                                "cqp": solution, "y": y})
    return fn


def lskpca_fit(k, dataset: Dataset, cfg: LsConfig, *, spec=None, points=None,
               features: KernelFeatures | None = None, solver: str = "implicit"):
    """Fit LS-KPCA and return a :class:`SolutionFunction`.

    ``details["cqp"]`` carries the :class:`~sskpca.cqp.CqpSolution` expressed
    in coefficient space. ``solver`` selects the implicit (Cholesky per
    secular evaluation) or explicit (one pencil eigendecomposition) path.
    """
    idx, t = _labeled(dataset)
    k = np.asarray(k, dtype=float)
    features = features or KernelFeatures.of(k)
    q = features.variance_form(cfg.centered)
    problem = reduced_problem(features, idx, t, cfg.c, cfg.s2, q)
    if solver == "implicit":
        sol = cqp.solve_secular(problem)
    elif solver == "explicit":
        sol = cqp.solve_explicit(problem)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return _to_function(features, k, sol.alpha, sol, cfg, dataset, spec, points, "ls")


class LsPath:
    """LS-KPCA for one (kernel, labeled set, c) over many variance levels.

    The pencil eigendecomposition is computed once; each additional ``s2``
    costs a scalar root find.
    """

    def __init__(self, k, dataset: Dataset, c: float, centered: bool = True,
                 features: KernelFeatures | None = None, q=None):
        self.k = np.asarray(k, dtype=float)
        self.dataset = dataset
        self.c = c
        self.centered = centered
        self.features = features or KernelFeatures.of(self.k)
        self.q = self.features.variance_form(centered) if q is None else q
        self.idx, self.t = _labeled(dataset)
        probe = reduced_problem(self.features, self.idx, self.t, c, 1.0, self.q)
        self._c, self._b = probe.c, probe.b
        self.basis = cqp.PencilBasis.of(self._c, self.q)

    def values(self, s2: float) -> np.ndarray:
        """Training values ``K a`` at level ``s2`` (no centering)."""
        problem = cqp.CqpProblem(self._c, self._b, self.q, s2)
        sol = cqp.solve_explicit(problem, self.basis)
        return self.features.phi @ sol.alpha

    def fit(self, s2: float, spec=None, points=None):
        problem = cqp.CqpProblem(self._c, self._b, self.q, s2)
        sol = cqp.solve_explicit(problem, self.basis)
        cfg = LsConfig(self.c, s2, self.centered)
        return _to_function(self.features, self.k, sol.alpha, sol, cfg, self.dataset,
                            spec, points, "ls")


def sgt_fit(graph, dataset: Dataset, cfg: LsConfig):
    """LS-KPCA with ``K = L^+`` and the uncentered constraint.

    Since ``L^+ e = 0`` the training values are automatically balanced,
    ``e.T f = 0``.
    """
    if cfg.centered:
        raise ValueError("the graph-transducer special case uses the uncentered constraint")
    k = laplacian_pinv(graph)
    return lskpca_fit(k, dataset, cfg)
