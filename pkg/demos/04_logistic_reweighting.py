"""LR-KPCA: reweighted LS-KPCA steps with a sigmoid labeled loss.

Each accepted step lowers the monitored objective; the trace shows the
objective, the proximal weight that was needed, and the relative step.
"""
from sskpca import LrConfig, gaussian_kernel, lrkpca_fit, s2_from_ratio, two_moons
from sskpca.evaluation import threshold_head, unlabeled_error

ds = two_moons(200, noise=0.05, labeled_per_class=4, seed=7)
k = gaussian_kernel(ds.points, 1.0)
fn = lrkpca_fit(k, ds, LrConfig(c=0.1, s2=s2_from_ratio(0.2, ds)))
trace = fn.details["trace"]
for i, (obj, lam, step) in enumerate(zip(trace.objectives, trace.lambdas, trace.steps)):
    print(f"iter {i:2d}  objective={obj:.12f}  lambda={lam:.1e}  step={step:.1e}")
print("converged:", trace.converged)
idx = ds.labeled
f = fn.scores
print(f"error: {100 * unlabeled_error(ds, threshold_head(f[idx], ds.labels[idx]).predict(f)):.1f}%")
