"""Solve one constrained quadratic three ways and compare.

    minimize a.T C a - 2 b.T a   subject to   a.T P a = s2

The secular solver brackets the multiplier with Brent's method, the explicit
solver diagonalizes the pencil once, and the oracle reads the multiplier off
a 2m x 2m eigenproblem.
"""
import numpy as np

from sskpca.cqp import CqpProblem, secular_value, solve_eig_oracle, solve_explicit, solve_secular

rng = np.random.default_rng(0)
m = 12
a = rng.standard_normal((m, m))
c = a @ a.T + m * 0.1 * np.eye(m)
bm = rng.standard_normal((m, m - 1))
p = bm @ bm.T                       # singular, rank m - 1
problem = CqpProblem(c, rng.standard_normal(m), p, s2=2.0)

sols = {"secular": solve_secular(problem), "explicit": solve_explicit(problem),
        "oracle": solve_eig_oracle(problem)}
for name, sol in sols.items():
    print(f"{name:>9s}: zeta={sol.zeta:+.10f}  objective={sol.objective:+.10f}  "
          f"residual={sol.residual:.1e}  evaluations={sol.evaluations}")
ref = sols["oracle"].alpha
for name in ("secular", "explicit"):
    print(f"|a_{name} - a_oracle| / |a_oracle| = "
          f"{np.linalg.norm(sols[name].alpha - ref) / np.linalg.norm(ref):.1e}")

# The secular function increases up to the pencil edge delta.
delta = sols["secular"].delta
print("f(zeta) left of delta:",
      " ".join(f"{secular_value(problem, z):+.3f}" for z in np.linspace(delta - 5, delta - 0.05, 6)))
