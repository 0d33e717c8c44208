"""Kernel PCA as variance maximization, and what a within-group penalty does.

MV-KPCA keeps the variance objective but adds c * (within-group variance)
to the norm constraint. Groups here are the labeled points of each class.
"""

from sskpca import gaussian_kernel, groups_from_labels, kpca_fit, mvkpca_fit, two_moons
from sskpca.evaluation import threshold_head, unlabeled_error
from sskpca.kpca import within_group_variance

ds = two_moons(200, noise=0.05, labeled_per_class=4, seed=7)
k = gaussian_kernel(ds.points, 3.0)
groups = groups_from_labels(ds)
idx = ds.labeled

for c in (0.0, 1.0, 100.0):
    fn = mvkpca_fit(k, groups, c)[0] if c else kpca_fit(k)[0]
    f = fn.scores
    err = unlabeled_error(ds, threshold_head(f[idx], ds.labels[idx]).predict(f))
    print(f"c={c:6.1f}  variance={fn.eigenvalue:8.4f}  "
          f"within-group={within_group_variance(f, groups):.2e}  error={100 * err:5.1f}%")
