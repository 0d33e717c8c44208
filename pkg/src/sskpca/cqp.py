"""Global minimizer of a quadratic over a quadratic equality constraint.

Solves::

    minimize    a.T @ C @ a - 2 b.T @ a
    subject to  a.T @ P @ a = s2

with ``C`` positive definite and ``P`` positive semi-definite. The optimum is
``a = (C - zeta P)^{-1} b`` where ``zeta`` is the root of the secular function
``f(zeta) = a(zeta).T @ P @ a(zeta) - s2`` to the left of the pencil edge
``delta`` (smallest positive root of ``det(C - zeta P)``). ``f`` is strictly
increasing on ``(-inf, delta)`` so the root is bracketed and found with
Brent's method.

Null-space directions of ``P`` need no special treatment: the constraint is
blind there and ``(C - zeta P)^{-1} b`` already minimizes the objective over
them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .eigen import pencil_left_edge

HARD_CASE_RTOL = 1e-10
ROOT_RTOL = 1e-12
MAX_ITER = 200
MAX_DOUBLINGS = 200
# brentq refuses rtol below 4 * eps
_RTOL_FLOOR = 4 * np.finfo(float).eps


class CqpError(ArithmeticError):
    """Ill-posed instance or solver failure."""


class SecularDomainError(CqpError):
    """``C - zeta P`` is not positive definite at the requested zeta."""


@dataclass(frozen=True)
class CqpProblem:
    c: np.ndarray
    b: np.ndarray
    p: np.ndarray
    s2: float

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        p = np.asarray(self.p, dtype=float)
        b = np.asarray(self.b, dtype=float).ravel()
        n = b.size
        if c.shape != (n, n) or p.shape != (n, n):
            raise ValueError(f"shape mismatch: C {c.shape}, P {p.shape}, b ({n},)")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(p)) and np.all(np.isfinite(b))):
            raise CqpError("non-finite problem data")
        if not (self.s2 > 0 and math.isfinite(self.s2)):
            raise ValueError("s2 must be positive and finite")
        object.__setattr__(self, "c", 0.5 * (c + c.T))
        object.__setattr__(self, "p", 0.5 * (p + p.T))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "s2", float(self.s2))

    @property
    def n(self) -> int:
        return self.b.size

    def objective(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        return float(alpha @ self.c @ alpha - 2.0 * self.b @ alpha)

    def constraint(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        return float(alpha @ self.p @ alpha)


@dataclass(frozen=True)
class CqpSolution:
    """Attributes:
        alpha: minimizer.
        zeta: Lagrange multiplier.
        delta: pencil edge; ``zeta <= delta`` with equality only in the hard case.
        objective: ``alpha.T C alpha - 2 b.T alpha``.
        hard_case: True when ``b`` has no component along the edge eigenvector
            and the solution contains an explicit eigenvector term.
        residual: ``|alpha.T P alpha - s2| / s2``.
        evaluations: secular function evaluations (0 for the oracle).
    """

    alpha: np.ndarray
    zeta: float
    delta: float
    objective: float
    hard_case: bool
    residual: float
    evaluations: int = 0


def _factor(problem: CqpProblem, zeta: float):
    shifted = problem.c - zeta * problem.p
    try:
        return sla.cho_factor(shifted, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise SecularDomainError(
            f"C - zeta P is not positive definite at zeta={zeta!r}"
        ) from None


def secular_alpha(problem: CqpProblem, zeta: float) -> np.ndarray:
    """``(C - zeta P)^{-1} b`` via a Cholesky factorization."""
    return sla.cho_solve(_factor(problem, zeta), problem.b, check_finite=False)


def secular_value(problem: CqpProblem, zeta: float) -> float:
    """Secular function ``a(zeta).T P a(zeta) - s2`` (requires zeta < delta)."""
    alpha = secular_alpha(problem, zeta)
    return float(alpha @ problem.p @ alpha - problem.s2)


def _finish(problem, alpha, zeta, delta, hard, evaluations) -> CqpSolution:
    return CqpSolution(
        alpha=alpha,
        zeta=float(zeta),
        delta=float(delta),
        objective=problem.objective(alpha),
        hard_case=hard,
        residual=abs(problem.constraint(alpha) - problem.s2) / problem.s2,
        evaluations=evaluations,
    )


# --------------------------------------------------------------------------
# Explicit secular equation in the eigenbasis of the pencil


@dataclass(frozen=True)
class PencilBasis:
    """Simultaneous diagonalization ``V.T C V = I``, ``V.T P V = diag(mu)``.

    ``mu`` is ascending. Used for the explicit secular equation and for the
    hard case.
    """

    mu: np.ndarray
    v: np.ndarray

    @classmethod
    def of(cls, c, p) -> PencilBasis:
        try:
            mu, v = sla.eigh(p, c, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise CqpError("C is not positive definite") from exc
        return cls(np.maximum(mu, 0.0), v)

    @property
    def delta(self) -> float:
        return 1.0 / self.mu[-1]


def _edge_cluster(mu: np.ndarray) -> np.ndarray:
    return mu >= mu[-1] * (1.0 - 1e-8)


def explicit_secular(mu, beta, s2, zeta) -> float:
    """``sum(mu beta^2 / (1 - zeta mu)^2) - s2`` for whitened coefficients."""
    return float(np.sum(mu * beta**2 / (1.0 - zeta * mu) ** 2) - s2)


def _brent(fun, lo, hi, rtol, maxiter):
    rtol = max(rtol, _RTOL_FLOOR)
    xtol = 1e-300
    root, info = brentq(fun, lo, hi, xtol=xtol, rtol=rtol, maxiter=maxiter,
                        full_output=True, disp=False)
    if not info.converged:
        raise CqpError(f"Brent iteration did not converge in {maxiter} steps")
    return root, info.function_calls


def _hard_case(problem, basis: PencilBasis, beta, evaluations) -> CqpSolution | None:
    """Return the hard-case solution, or None if the root lies left of delta."""
    mu, v = basis.mu, basis.v
    edge = _edge_cluster(mu)
    delta = basis.delta
    rest = ~edge
    coef = np.zeros_like(beta)
    coef[rest] = beta[rest] / (1.0 - delta * mu[rest])
    alpha_c = v @ coef
    gap = problem.s2 - problem.constraint(alpha_c)
    if gap <= 0:
        return None
    u = v[:, np.flatnonzero(edge)[-1]]
    u = u / math.sqrt(u @ problem.p @ u)
    alpha = alpha_c + math.sqrt(gap) * u
    return _finish(problem, alpha, delta, delta, True, evaluations)


def _is_near_hard(beta, mu) -> bool:
    norm = np.linalg.norm(beta)
    if norm == 0.0:
        return True
    return np.linalg.norm(beta[_edge_cluster(mu)]) <= HARD_CASE_RTOL * norm


def _pole_distance(gaps, w, s2, rtol, maxiter):
    """Root ``d > 0`` of ``sum(w^2 / (gaps + d)^2) = s2``.

    ``gaps >= 0`` are distances of the poles from the leftmost one. Solving
    for the distance to the pole (on a log scale) keeps full relative
    accuracy when the root is pinned against it. Returns ``(None, 0)`` if
    the sum stays below ``s2`` as ``d -> 0`` (hard case).
    """
    s = math.sqrt(s2)
    wnorm = np.linalg.norm(w)

    def fun(x):
        return float(np.sum(w**2 / (gaps + math.exp(x)) ** 2) - s2)

    hi = math.log(wnorm / s)
    near = np.abs(w[gaps == 0.0])
    if near.size and near.max() > 0.0:
        lo = math.log(near.max() / s)
    else:
        lo = hi
    calls = 0
    for _ in range(MAX_DOUBLINGS * 10):
        calls += 1
        if fun(lo) >= 0.0:
            break
        lo -= 1.0
        if lo < math.log(np.finfo(float).tiny):
            return None, calls
    else:
        return None, calls
    while fun(hi) > 0.0:
        hi += 1.0
    if lo >= hi:
        return math.exp(hi), calls
    root, more = _brent(fun, lo, hi, min(rtol, 1e-15), maxiter)
    return math.exp(root), calls + more


def solve_explicit(problem: CqpProblem, basis: PencilBasis | None = None,
                   rtol: float = ROOT_RTOL, maxiter: int = MAX_ITER) -> CqpSolution:
    """Solve via the explicit secular equation in the pencil eigenbasis.

    One generalized eigendecomposition, after which every secular evaluation
    is O(n). Pass a precomputed ``basis`` to solve several constraint levels
    with the same (C, P).
    """
    if basis is None:
        basis = PencilBasis.of(problem.c, problem.p)
    mu, v = basis.mu, basis.v
    beta = v.T @ problem.b
    if _is_near_hard(beta, mu):
        sol = _hard_case(problem, basis, beta, 0)
        if sol is not None:
            return sol
    # Isotropic form: terms w^2 / (lam - zeta)^2 with lam = 1/mu, w = beta/sqrt(mu).
    active = mu > 0
    if not active.any() or np.linalg.norm(beta[active]) == 0.0:
        raise CqpError("b has no component in range(P); constraint unreachable")
    lam = 1.0 / mu[active]
    w = beta[active] / np.sqrt(mu[active])
    lam_min = lam.min()
    gaps = np.maximum(lam - lam_min, 0.0)
    d, calls = _pole_distance(gaps, w, problem.s2, rtol, maxiter)
    if d is None:
        sol = _hard_case(problem, basis, beta, calls)
        if sol is not None:
            return sol
        raise CqpError("failed to bracket the secular root")
    coef = beta.copy()  # directions with mu = 0 are unconstrained: (C v, v) = 1
    coef[active] = beta[active] / (mu[active] * (gaps + d))
    return _finish(problem, v @ coef, lam_min - d, basis.delta, False, calls)


def solve_secular(problem: CqpProblem, rtol: float = ROOT_RTOL,
                  maxiter: int = MAX_ITER) -> CqpSolution:
    """Solve by Brent root finding on the implicit secular function.

    Each evaluation of ``f(zeta)`` costs one Cholesky factorization of
    ``C - zeta P``. The bracket is ``[zeta_lo, delta - |u.T b| / s]`` where
    ``u`` is the pencil-edge vector (``u.T P u = 1``); ``zeta_lo`` is found by
    doubling the distance to ``delta`` until ``f < 0``.
    """
    delta, u = pencil_left_edge(problem.c, problem.p)
    b = problem.b
    s = math.sqrt(problem.s2)
    calls = 0

    def fun(z):
        nonlocal calls
        calls += 1
        return secular_value(problem, z)

    # Whitened edge coefficient |u.T b| sqrt(delta) against ||b||_{C^-1}.
    bnorm = math.sqrt(max(b @ sla.cho_solve(_factor(problem, 0.0), b), 0.0))
    edge = abs(u @ b)
    if bnorm == 0.0 or edge * math.sqrt(delta) <= HARD_CASE_RTOL * bnorm:
        # Degenerate bracket; the eigenbasis resolves both the hard case and
        # roots pinned against delta.
        return solve_explicit(problem, rtol=rtol, maxiter=maxiter)

    hi = delta - edge / s
    try:
        f_hi = fun(hi)
    except SecularDomainError:
        return solve_explicit(problem, rtol=rtol, maxiter=maxiter)
    if f_hi == 0.0:
        return _finish(problem, secular_alpha(problem, hi), hi, delta, False, calls)
    if f_hi < 0.0:
        # Only possible through rounding; fall back to the stable path.
        return solve_explicit(problem, rtol=rtol, maxiter=maxiter)

    dist = max(1.0, abs(delta))
    lo = delta - dist
    for _ in range(MAX_DOUBLINGS):
        if lo < hi and fun(lo) < 0.0:
            break
        dist *= 2.0
        lo = delta - dist
    else:
        raise CqpError("bracket expansion exceeded 200 doublings")

    zeta, _ = _brent(fun, lo, hi, rtol, maxiter)
    alpha = secular_alpha(problem, zeta)
    sol = _finish(problem, alpha, zeta, delta, False, calls)
    if sol.residual > 1e-9:
        if rtol > _RTOL_FLOOR:
            return solve_secular(problem, rtol=_RTOL_FLOOR, maxiter=maxiter)
        # root pinned against delta beyond what zeta itself can resolve
        return solve_explicit(problem, rtol=rtol, maxiter=maxiter)
    return sol


# --------------------------------------------------------------------------
# Oracle: smallest real eigenvalue of the 2n x 2n pencil


def solve_eig_oracle(problem: CqpProblem, max_n: int = 200) -> CqpSolution:
    """Reference solution from the block pencil::

        [[C, -P], [-b b.T / s2, C]] x = zeta [[P, 0], [0, P]] x

    The smallest real eigenvalue is the multiplier. Unstable at scale (the
    left matrix is nonsymmetric and badly conditioned); intended for tests.
    """
    n = problem.n
    if n > max_n:
        raise CqpError(f"oracle limited to n <= {max_n}")
    c, p, b = problem.c, problem.p, problem.b
    zero = np.zeros((n, n))
    left = np.block([[c, -p], [-np.outer(b, b) / problem.s2, c]])
    right = np.block([[p, zero], [zero, p]])
    values = sla.eig(left, right, right=False, homogeneous_eigvals=True)
    num, den = values
    finite = np.abs(den) > 1e-12 * np.abs(num).clip(min=1.0)
    vals = num[finite] / den[finite]
    real = vals[np.abs(vals.imag) <= 1e-8 * np.maximum(1.0, np.abs(vals.real))].real
    delta, _ = pencil_left_edge(c, p)
    candidates = real[real <= delta * (1 + 1e-8) + 1e-12]
    if candidates.size == 0:
        raise CqpError("no real eigenvalue below the pencil edge")
    zeta = float(candidates.min())
    if delta - zeta <= 1e-10 * max(1.0, abs(delta)):
        raise CqpError("oracle cannot resolve the hard case")
    alpha = np.linalg.solve(c - zeta * p, b)
    return _finish(problem, alpha, zeta, delta, False, 0)


# --------------------------------------------------------------------------
# Uncentered problem in function-value space


def solve_isotropic(g, b, s2, rtol: float = ROOT_RTOL):
    """Minimize ``f.T G f - 2 b.T f`` subject to ``f.T f = s2``.

    Uses the explicit secular equation ``sum(beta_i^2 / (lam_i - z)^2) = s2``
    in the eigenbasis ``G = Q diag(lam) Q.T``. Returns ``(f, zeta, hard)``.
    """
    g = np.asarray(g, dtype=float)
    lam, q = sla.eigh(0.5 * (g + g.T))
    beta = q.T @ np.asarray(b, dtype=float)
    edge = lam <= lam[0] + 1e-8 * max(1.0, abs(lam[0]))
    bnorm = np.linalg.norm(beta)
    if bnorm == 0.0 or np.linalg.norm(beta[edge]) <= HARD_CASE_RTOL * bnorm:
        coef = np.zeros_like(beta)
        rest = ~edge
        coef[rest] = beta[rest] / (lam[rest] - lam[0])
        gap = s2 - coef @ coef
        if gap > 0:
            k = np.flatnonzero(edge)[0]
            coef[k] = math.sqrt(gap)
            return q @ coef, float(lam[0]), True
    d, _ = _pole_distance(lam - lam[0], beta, s2, rtol, MAX_ITER)
    if d is None:
        raise CqpError("failed to bracket the secular root")
    return q @ (beta / (lam - lam[0] + d)), float(lam[0] - d), False


def solve_uncentered_explicit(k, labeled, targets, c: float, s2: float,
                              max_condition: float = 1e12) -> CqpSolution:
    """Uncentered LS problem solved in function values ``f = K a``.

    Minimizes ``f.T K^{-1} f + c ||f_L - t||^2`` subject to ``f.T f = s2``
    and maps back with ``a = K^{-1} f``. The returned solution is expressed
    in coefficient space for the problem with ``C = K + c K_L.T K_L``,
    ``b = c K_L.T t`` and ``P = K.T K``.
    """
    k = np.asarray(k, dtype=float)
    labeled = np.asarray(labeled, dtype=int)
    targets = np.asarray(targets, dtype=float)
    cond = np.linalg.cond(k)
    if not np.isfinite(cond) or cond > max_condition:
        raise CqpError(f"kernel matrix too ill-conditioned (cond ~ {cond:.3g})")
    chol = sla.cho_factor(k, lower=True)
    kinv = sla.cho_solve(chol, np.eye(k.shape[0]))
    g = 0.5 * (kinv + kinv.T)
    g[labeled, labeled] += c
    bf = np.zeros(k.shape[0])
    bf[labeled] = c * targets
    f, zeta, hard = solve_isotropic(g, bf, s2)
    alpha = sla.cho_solve(chol, f)
    kl = k[labeled]
    problem = CqpProblem(k + c * kl.T @ kl, c * kl.T @ targets, k.T @ k, s2)
    delta = pencil_left_edge(problem.c, problem.p)[0]
    return _finish(problem, alpha, zeta, delta, hard, 0)
