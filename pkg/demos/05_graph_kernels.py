"""Graph kernels on a kNN graph, and the spectral-transducer special case.

With K = L^+ and the uncentered variance constraint, the solution is
automatically balanced: its values sum to zero.
"""
import numpy as np

from sskpca import LsConfig, build_graph, diffusion_kernel, lskpca_fit, sgt_fit, two_moons
from sskpca.evaluation import threshold_head, unlabeled_error

ds = two_moons(200, noise=0.05, labeled_per_class=4, seed=7)
graph = build_graph(ds.points, knn=20)
idx, t = ds.labeled, ds.labels[ds.labeled]


def error(f):
    return 100 * unlabeled_error(ds, threshold_head(f[idx], t).predict(f))


f = sgt_fit(graph, ds, LsConfig(10.0, 100.0, centered=False)).values
print(f"L^+ (uncentered): e'f / |f| = {f.sum() / np.linalg.norm(f):+.1e}  error={error(f):.1f}%")
for tau in (1.0, 5.0, 20.0):
    fn = lskpca_fit(diffusion_kernel(graph, tau), ds, LsConfig(10.0, 100.0))
    print(f"diffusion tau={tau:4.1f}: error={error(fn.scores):.1f}%")
