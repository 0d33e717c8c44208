"""LR-KPCA: iteratively reweighted LS-KPCA with a sigmoid labeled loss.

Each step reweights the labeled loss around the current labeled values
``g = K_L a_n`` and solves the resulting LS-KPCA problem exactly. A step is
kept only if it lowers the monitored objective
``a.T K a + c * sum_i sigmoid(-t_i g_i)``; otherwise a proximal term
``lam * ||a - a_n||^2`` is added and ``lam`` is increased until it does.

Two working responses are available. ``"verbatim"`` uses
``s = g - (z - t)(1 - z) / z``; its quadratic model does not share the
gradient of the sigmoid loss (except at ``t g = 0`` for ``t = +1``), so the
safeguard can stall. ``"gradient"`` (default) keeps the weights
``r = z (1 - z)`` and uses ``s = g + t / 2``, which makes the model gradient
exact at the current iterate.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import cqp
from .data import Dataset
from .kpca import KernelFeatures, make_function
from .lskpca import LsConfig, _labeled, lskpca_fit, reduced_problem

Z_CLIP = 1e-12
RESPONSES = ("gradient", "verbatim")


@dataclass(frozen=True)
class LrConfig:
    c: float
    s2: float
    centered: bool = True
    max_iterations: int = 50
    tol: float = 1e-8
    lambda0: float | None = None
    growth: float = 10.0
    max_escalations: int = 12
    response: str = "gradient"

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("c must be >= 0")
        if not self.s2 > 0:
            raise ValueError("s2 must be > 0")
        if not self.growth > 1:
            raise ValueError("growth factor must exceed 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.response not in RESPONSES:
            raise ValueError(f"response must be one of {RESPONSES}")


@dataclass
class LrTrace:
    """Per accepted iteration: objective, proximal weight used, relative step."""

    objectives: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    converged: bool = False
    stalled: bool = False

    @property
    def iterations(self) -> int:
        return len(self.objectives) - 1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration", "objective", "lambda", "step"])
            for i, row in enumerate(zip(self.objectives, self.lambdas, self.steps)):
                writer.writerow([i] + [repr(float(v)) for v in row])


def reweight(g, t):
    """Working weights and responses for the labeled values ``g``.

    Returns ``(z, r, s)`` with ``z = 1 / (1 + exp(-t g))``,
    ``r = z (1 - z)`` and ``s = g - (z - t)(1 - z) / z``.
    """
    g = np.asarray(g, dtype=float)
    t = np.asarray(t, dtype=float)
    z = np.clip(expit(t * g), Z_CLIP, 1.0 - Z_CLIP)
    r = z * (1.0 - z)
    s = g - (z - t) * (1.0 - z) / z
    return z, r, s


def working_response(g, t, kind: str = "gradient"):
    """``(r, s)`` for the reweighted step.

    With ``kind="gradient"``, ``2 r (g - s)`` equals the derivative of
    ``sigmoid(-t g)``, so ``c * sum r (g' - s)^2`` is a positive-curvature
    model of the labeled loss that is exact to first order.
    """
    z, r, s = reweight(g, t)
    if kind == "gradient":
        s = np.asarray(g, dtype=float) + 0.5 * np.asarray(t, dtype=float)
    elif kind != "verbatim":
        raise ValueError(f"unknown working response {kind!r}")
    return r, s


def sigmoid_loss(g, t) -> np.ndarray:
    """Per-point loss ``1 / (1 + exp(t g))``; vanishes for large margins."""
    return expit(-np.asarray(t, dtype=float) * np.asarray(g, dtype=float))


def lr_objective(alpha, k, k_l, t, c: float) -> float:
    """``a.T K a + c * sum_i sigmoid(-t_i (K_L a)_i)``."""
    alpha = np.asarray(alpha, dtype=float)
    g = np.asarray(k_l) @ alpha
    return float(alpha @ np.asarray(k) @ alpha + c * sigmoid_loss(g, t).sum())


def lr_loss_gradient(alpha, k_l, t, c: float) -> np.ndarray:
    """Gradient in ``a`` of the labeled term ``c * sum_i sigmoid(-t_i g_i)``."""
    k_l = np.asarray(k_l, dtype=float)
    t = np.asarray(t, dtype=float)
    z = expit(t * (k_l @ alpha))
    return c * k_l.T @ (-t * z * (1.0 - z))


def lrkpca_fit(k, dataset: Dataset, cfg: LrConfig, *, spec=None, points=None,
               features: KernelFeatures | None = None, solver: str = "implicit"):
    """Fit LR-KPCA starting from the LS-KPCA solution with the same (c, s2).

    The returned function carries ``details["trace"]`` (:class:`LrTrace`).
    If no proximal weight yields an improvement the best iterate is
    returned with ``trace.stalled`` set and a RuntimeWarning. ``solver`` is
    passed through to the inner constrained solves (see
    :func:`~sskpca.lskpca.lskpca_fit`).
    """
    solve = {"implicit": cqp.solve_secular, "explicit": cqp.solve_explicit}[solver]
    k = np.asarray(k, dtype=float)
    idx, t = _labeled(dataset)
    features = features or KernelFeatures.of(k)
    q = features.variance_form(cfg.centered)
    phi_l = features.phi[idx]
    # Proximal metric: ||a - a_n||^2 = (y - y_n).T diag(1/lam) (y - y_n).
    metric = 1.0 / features.values
    lam0 = cfg.lambda0 if cfg.lambda0 is not None else 1e-4 * np.trace(k) / k.shape[0]

    def objective(y):
        return float(y @ y + cfg.c * sigmoid_loss(phi_l @ y, t).sum())

    start = lskpca_fit(k, dataset, LsConfig(cfg.c, cfg.s2, cfg.centered), features=features,
                       solver=solver)
    y = start.details["y"]
    sol = start.details["cqp"]
    obj = objective(y)
    trace = LrTrace([obj], [0.0], [0.0])

    for _ in range(cfg.max_iterations):
        r, s = working_response(phi_l @ y, t, cfg.response)
        base = reduced_problem(features, idx, s, cfg.c, cfg.s2, q, weights=r)
        alpha_n = features.to_alpha(y)
        norm_n = max(np.linalg.norm(alpha_n), np.finfo(float).tiny)
        lam = 0.0
        accepted = None
        for _ in range(cfg.max_escalations + 1):
            problem = cqp.CqpProblem(base.c + lam * np.diag(metric),
                                     base.b + lam * metric * y, q, cfg.s2)
            trial = solve(problem)
            step = np.linalg.norm(features.to_alpha(trial.alpha) - alpha_n) / norm_n
            if step < cfg.tol:
                trace.converged = True
                break
            trial_obj = objective(trial.alpha)
            if trial_obj < obj:
                accepted = (trial, trial_obj, lam, step)
                break
            lam = lam0 if lam == 0.0 else lam * cfg.growth
        if trace.converged:
            break
        if accepted is None:
            trace.stalled = True
            warnings.warn("LR-KPCA: no proximal weight improved the objective; "
                          "returning the best iterate", RuntimeWarning, stacklevel=2)
            break
        sol, obj, lam, step = accepted
        y = sol.alpha
        trace.objectives.append(obj)
        trace.lambdas.append(lam)
        trace.steps.append(step)
        if step < cfg.tol:
            trace.converged = True
            break

    alpha = features.to_alpha(y)
    values = k @ alpha
    var = float(np.sum((values - values.mean()) ** 2)) if cfg.centered else float(values @ values)
    solution = cqp.CqpSolution(alpha, sol.zeta, sol.delta, sol.objective, sol.hard_case,
                               abs(var - cfg.s2) / cfg.s2, sol.evaluations)
    return make_function(alpha, k, cfg.centered, spec, points,
                         details={"method": "lr", "c": cfg.c, "s2": cfg.s2,
                                  "cqp": solution, "trace": trace, "y": y})
