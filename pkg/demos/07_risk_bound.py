"""Transductive risk bound for a threshold on one fitted function.

The bound holds with probability 1 - delta, so the comparison with the
unlabeled error is a logged sanity check, not an assertion. At desk scale
it is loose.
"""
import math

from sskpca import LsConfig, gaussian_kernel, lskpca_fit, s2_from_ratio, two_moons
from sskpca.evaluation import (RISK_CONSTANT, RiskBoundInput, numerical_rank, risk_bound,
                               threshold_head, unlabeled_error)

print(f"constant sqrt(32 ln(4e) / 3) = {RISK_CONSTANT:.6f}")
ds = two_moons(600, noise=0.05, labeled_per_class=150, seed=3)
k = gaussian_kernel(ds.points, 1.0)
s2 = s2_from_ratio(0.5, ds)
fn = lskpca_fit(k, ds, LsConfig(1.0, s2))
idx = ds.labeled
head = threshold_head(fn.scores[idx], ds.labels[idx])
pred = head.predict(fn.scores)
emp = float((pred[idx] != ds.labels[idx]).mean())
l, n = idx.size, ds.m - idx.size
q = numerical_rank(k)
bound = risk_bound(RiskBoundInput(emp, q, s2, l, n))
print(f"l={l} n={n} rank(K)={q}  empirical risk={emp:.3f}  "
      f"test error={unlabeled_error(ds, pred):.3f}  bound={bound:.3f}")
print("unlabeled error below bound:", unlabeled_error(ds, pred) <= bound)
print("hand case:", risk_bound(RiskBoundInput(0.0, 100, 750.0, 750, 750)),
      "reference", 1.0112464834201158)
print("slack at l = n = 10^6:",
      round(RISK_CONSTANT * 2e-6 * math.sqrt(1e6) + math.sqrt(4e-6 * math.log(20)), 4))
