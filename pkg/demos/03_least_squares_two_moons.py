"""LS-KPCA on two moons with four labels per class.

At a fixed variance level the labeled squared loss is traded against the
RKHS norm. Small c recovers the first KPCA direction; larger c follows the
labels.
"""
import numpy as np

from sskpca import LsConfig, gaussian_kernel, kpca_fit, lskpca_fit, s2_from_ratio, two_moons
from sskpca.evaluation import threshold_head, unlabeled_error

ds = two_moons(200, noise=0.05, labeled_per_class=4, seed=7)
k = gaussian_kernel(ds.points, 1.0)
first = kpca_fit(k)[0].scores
idx, t = ds.labeled, ds.labels[ds.labeled]
s2 = s2_from_ratio(0.5, ds)

for c in (1e-10, 0.1, 1.0, 10.0):
    fn = lskpca_fit(k, ds, LsConfig(c, s2))
    f = fn.scores
    cos = abs(f @ first) / np.linalg.norm(f) / np.linalg.norm(first)
    err = unlabeled_error(ds, threshold_head(f[idx], t).predict(f))
    loss = float(np.sum((fn.values[idx] - t) ** 2))
    print(f"c={c:7.0e}  |cos(f, kpca1)|={cos:.4f}  labeled loss={loss:8.3f}  "
          f"error={100 * err:5.1f}%")
