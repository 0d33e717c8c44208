"""Transductive cross-validation and a small multi-split benchmark.

Fold labels are hidden, not removed: every fit still sees all points.
"""
from sskpca import cross_validate, load_grid, two_moons
from sskpca.evaluation import Evaluator, default_grid_path, run_benchmark, unlabeled_error

ds = two_moons(200, noise=0.05, labeled_per_class=4, seed=7)
grid = load_grid(default_grid_path("two-moons"))
cv = cross_validate(ds, grid, folds=8, seed=0)
for cfg, mean, std, _ in sorted(cv.table(), key=lambda row: row[1])[:5]:
    print(f"{100 * mean:5.2f}% ({100 * std:.2f})  {cfg}")
print("selected:", cv.best)
print(f"error of selected config: {100 * unlabeled_error(ds, Evaluator(ds.points).predict(ds, cv.best)):.1f}%")

bench = run_benchmark(ds, {"LS-KPCA": grid}, splits=3, labels_per_class=4, folds=4, seed=1)
for name, (mean, std) in bench.summary().items():
    print(f"{name:>8s}: {100 * mean:5.2f}% ({100 * std:.2f})")
