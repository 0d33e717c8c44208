"""Classification heads, transductive error, model selection and the
transductive risk bound.

Model selection hides the labels of each fold (the points stay in the
kernel and in the variance constraint) and scores predictions on them.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linprog, minimize

from .data import DataError, Dataset, groups_from_labels, hide, make_folds
from .kernels import KernelSpec, median_gamma, squared_distances
from .kpca import KernelFeatures, kpca_fit, mvkpca_fit
from .lrkpca import LrConfig, lrkpca_fit
from .lskpca import LsPath, s2_from_ratio

RISK_CONSTANT = math.sqrt(32.0 * math.log(4.0 * math.e) / 3.0)
SVM_PENALTY = 1e6


# --------------------------------------------------------------------------
# Heads


@dataclass(frozen=True)
class ThresholdHead:
    """Classify ``orientation * (f - threshold) > 0`` as +1."""

    threshold: float
    orientation: int = 1

    def predict(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return np.where(self.orientation * (f - self.threshold) > 0, 1, -1)


def _threshold_errors(f, t, b, orientation):
    pred = np.where(orientation * (f - b) > 0, 1, -1)
    return int(np.sum(pred != t))


def threshold_head(f, t, allow_flip: bool = True) -> ThresholdHead:
    """Threshold minimizing the labeled 0/1 error.

    Candidates are midpoints of consecutive sorted values plus -inf and +inf.
    Ties go to the candidate with the largest distance to the nearest
    labeled value. With ``allow_flip`` the reversed orientation is also
    tried (eigenfunction signs are arbitrary); +1 wins ties.
    """
    f = np.asarray(f, dtype=float).ravel()
    t = np.asarray(t).ravel()
    if f.size == 0:
        raise DataError("threshold_head needs at least one labeled point")
    u = np.unique(f)
    candidates = np.r_[-np.inf, 0.5 * (u[:-1] + u[1:]), np.inf]
    best = None
    for orientation in ((1, -1) if allow_flip else (1,)):
        for b in candidates:
            err = _threshold_errors(f, t, b, orientation)
            margin = np.inf if not np.isfinite(b) else float(np.min(np.abs(f - b)))
            key = (err, -margin, orientation == -1)
            if best is None or key < best[0]:
                best = (key, b, orientation)
    return ThresholdHead(float(best[1]), best[2])


@dataclass(frozen=True)
class LinearHead:
    """``sign(w @ phi + b0)``; ``constant`` marks a single-class fallback."""

    w: np.ndarray
    b0: float
    separable: bool
    constant: bool = False

    def decision(self, features) -> np.ndarray:
        return np.atleast_2d(features) @ self.w + self.b0

    def predict(self, features) -> np.ndarray:
        return np.where(self.decision(features) > 0, 1, -1)


def _separable(x, t) -> bool:
    n, d = x.shape
    # find (w, b) with t_i (w x_i + b) >= 1
    a_ub = -t[:, None] * np.c_[x, np.ones(n)]
    res = linprog(np.zeros(d + 1), A_ub=a_ub, b_ub=-np.ones(n),
                  bounds=[(None, None)] * (d + 1), method="highs")
    return res.status == 0


def svm_head(features, t, penalty: float = SVM_PENALTY) -> LinearHead:
    """Linear max-margin classifier on the labeled feature rows.

    Hard margin when the classes are separable, otherwise soft margin with
    the given slack penalty.
    """
    x = np.atleast_2d(np.asarray(features, dtype=float))
    if x.shape[0] == 1 and x.shape[1] != 1 and np.asarray(t).size != 1:
        x = x.T
    t = np.asarray(t, dtype=float).ravel()
    n, d = x.shape
    if np.all(t == t[0]):
        return LinearHead(np.zeros(d), float(t[0]), True, constant=True)
    scale = x.std() or 1.0
    xs = x / scale
    separable = _separable(xs, t)
    opts = {"ftol": 1e-14, "maxiter": 2000}
    if separable:
        cons = {"type": "ineq",
                "fun": lambda v: t * (xs @ v[:d] + v[d]) - 1.0,
                "jac": lambda v: t[:, None] * np.c_[xs, np.ones(n)]}
        res = minimize(lambda v: 0.5 * v[:d] @ v[:d], np.zeros(d + 1),
                       jac=lambda v: np.r_[v[:d], 0.0], constraints=[cons],
                       method="SLSQP", options=opts)
        v = res.x
    else:
        nv = d + 1 + n

        def fun(v):
            return 0.5 * v[:d] @ v[:d] + penalty * v[d + 1:].sum() / n

        def jac(v):
            return np.r_[v[:d], 0.0, np.full(n, penalty / n)]

        cons = {"type": "ineq",
                "fun": lambda v: t * (xs @ v[:d] + v[d]) - 1.0 + v[d + 1:],
                "jac": lambda v: np.c_[t[:, None] * xs, t, np.eye(n)]}
        res = minimize(fun, np.zeros(nv), jac=jac, constraints=[cons],
                       bounds=[(None, None)] * (d + 1) + [(0, None)] * n,
                       method="SLSQP", options=opts)
        v = res.x
    return LinearHead(v[:d] / scale, float(v[d]), separable)


def transductive_error(predictions, truth) -> float:
    """Fraction of disagreeing entries."""
    predictions = np.asarray(predictions).ravel()
    truth = np.asarray(truth).ravel()
    if predictions.shape != truth.shape:
        raise ValueError(f"length mismatch: {predictions.size} vs {truth.size}")
    if truth.size == 0:
        return 0.0
    return float(np.mean(predictions != truth))


def unlabeled_error(dataset: Dataset, predictions) -> float:
    """Error on the unlabeled points against ``dataset.truth``."""
    if dataset.truth is None:
        raise DataError("dataset has no ground truth")
    u = dataset.unlabeled
    return transductive_error(np.asarray(predictions)[u], dataset.truth[u])


def nearest_neighbor_predict(dataset: Dataset) -> np.ndarray:
    """1-NN labels for every point using only the labeled points."""
    idx = dataset.labeled
    if idx.size == 0:
        raise DataError("no labeled points")
    d2 = squared_distances(dataset.points, dataset.points[idx])
    return dataset.labels[idx][np.argmin(d2, axis=1)]


# --------------------------------------------------------------------------
# Risk bound


@dataclass(frozen=True)
class RiskBoundInput:
    empirical_risk: float
    q: int
    s2: float
    l: int  # noqa: E741
    n: int
    delta: float = 0.05

    def __post_init__(self):
        if not 0 <= self.empirical_risk <= 1:
            raise ValueError("empirical risk must lie in [0, 1]")
        if self.l < 1 or self.n < 1:
            raise ValueError("l and n must be >= 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.q < 0 or self.q > self.l + self.n:
            raise ValueError("q must lie in [0, l + n]")
        if self.s2 < 0:
            raise ValueError("s2 must be >= 0")


def _slack_terms(l, n, delta):
    r = 1.0 / l + 1.0 / n
    return RISK_CONSTANT * r * math.sqrt(min(l, n)) + math.sqrt(2.0 * r * math.log(1.0 / delta))


def risk_bound(inp: RiskBoundInput) -> float:
    """``R_l + sqrt(2 q s2 / (l n)) + c r sqrt(min(l, n)) + sqrt(2 r ln(1/delta))``
    with ``r = 1/l + 1/n``."""
    complexity = math.sqrt(2.0 * inp.q * inp.s2 / (inp.l * inp.n))
    return inp.empirical_risk + complexity + _slack_terms(inp.l, inp.n, inp.delta)


def risk_bound_general(empirical_risk: float, mu: float, k_fro: float, l: int, n: int,
                       delta: float = 0.05) -> float:
    """Bound for a decomposition ``z = K a`` with ``||a|| <= mu``."""
    complexity = math.sqrt(2.0 * mu**2 / (l * n) * k_fro**2)
    return empirical_risk + complexity + _slack_terms(l, n, delta)


def numerical_rank(a, rtol: float = 1e-10) -> int:
    s = np.linalg.svd(np.asarray(a, dtype=float), compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0


# --------------------------------------------------------------------------
# Grids

METHODS = ("kpca", "mv", "ls", "lr")
HEADS = ("threshold", "svm10")
KERNEL_KEYS = ("kernel", "gamma", "gamma_rel", "tau", "w", "knn")
_METHOD_KEYS = {
    "kpca": KERNEL_KEYS + ("centered", "head"),
    "mv": KERNEL_KEYS + ("centered", "head", "c"),
    "ls": KERNEL_KEYS + ("centered", "c", "s2", "rho"),
    "lr": KERNEL_KEYS + ("centered", "c", "s2", "rho"),
}
_STRING_KEYS = ("method", "kernel", "head")
_BOOL_KEYS = ("centered",)
_INT_KEYS = ("knn",)


def _parse_value(key, text):
    if key in _STRING_KEYS:
        return text
    if key in _BOOL_KEYS:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean {text!r} for {key}")
    if key in _INT_KEYS:
        return int(text)
    return float(text)


@dataclass
class ParamGrid:
    """Candidate values per parameter; expanded per method into configs."""

    values: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, values) -> ParamGrid:
        out = {}
        for key, v in values.items():
            v = list(v) if isinstance(v, (list, tuple)) else [v]
            out[key] = [_parse_value(key, str(x)) for x in v]
        return cls(out)

    def configs(self) -> list[dict]:
        """Cartesian product per method, dropping keys a method ignores.

        Duplicate configs are removed; order is canonical.
        """
        vals = dict(self.values)
        methods = vals.pop("method", ["ls"])
        vals.setdefault("kernel", ["gaussian"])
        vals.setdefault("centered", [True])
        out = {}
        for method in methods:
            if method not in METHODS:
                raise ValueError(f"unknown method {method!r}")
            keys = [k for k in _METHOD_KEYS[method] if k in vals]
            if method in ("ls", "lr") and not ({"s2", "rho"} & set(keys)):
                raise ValueError(f"{method} grid needs s2 or rho")
            if method in ("mv", "ls", "lr") and "c" not in keys:
                raise ValueError(f"{method} grid needs c")
            choices = [vals[k] for k in keys]
            if any(len(c) == 0 for c in choices):
                raise ValueError("empty grid dimension")
            for combo in itertools.product(*choices):
                cfg = {"method": method, **dict(zip(keys, combo))}
                if "s2" in cfg and "rho" in cfg:
                    cfg.pop("rho")
                if "gamma" in cfg and "gamma_rel" in cfg:
                    cfg.pop("gamma_rel")
                if method in ("kpca", "mv"):
                    cfg.setdefault("head", "threshold")
                out[config_id(cfg)] = cfg
        if not out:
            raise ValueError("empty grid")
        return [out[k] for k in sorted(out)]


def load_grid(path) -> ParamGrid:
    """Read ``key: v1 v2 ...`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key: values'")
        key, rest = line.split(":", 1)
        key = key.strip()
        items = rest.replace(",", " ").split()
        if not items:
            raise ValueError(f"{path}:{lineno}: no values for {key}")
        values[key] = [_parse_value(key, x) for x in items]
    return ParamGrid(values)


def default_grid_path(name: str) -> Path:
    return Path(__file__).with_name("grids") / f"{name}.txt"


def config_id(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True)


def config_order(cfg: dict):
    """Total order for tie breaking: smaller c, then smaller gamma."""
    c = cfg.get("c", 0.0)
    gamma = cfg.get("gamma", cfg.get("gamma_rel", 0.0))
    return (c, gamma, config_id(cfg))


def resolve(cfg: dict, dataset: Dataset) -> dict:
    """Replace relative parameters by absolute ones for `dataset`."""
    out = dict(cfg)
    if "rho" in out:
        out["s2"] = s2_from_ratio(out["rho"], dataset)
    if "gamma_rel" in out:
        out["gamma"] = out["gamma_rel"] * median_gamma(dataset.points)
    return out


def kernel_spec(cfg: dict) -> KernelSpec:
    kind = {"lpinv": "laplacianPinv"}.get(cfg.get("kernel", "gaussian"),
                                          cfg.get("kernel", "gaussian"))
    return KernelSpec(kind=kind, gamma=cfg.get("gamma"), tau=cfg.get("tau"),
                      w=cfg.get("w"), knn=int(cfg.get("knn", 10)))


# --------------------------------------------------------------------------
# Fitting configurations


class Evaluator:
    """Fits configurations on one point set, caching kernels and
    eigenbases (which do not depend on the labels)."""

    def __init__(self, points, lr_solver: str = "auto"):
        self.points = np.asarray(points, dtype=float)
        self._kernels = {}
        self._kpca = {}
        self.lr_solver = lr_solver

    def kernel(self, cfg: dict):
        spec = kernel_spec(cfg)
        key = json.dumps(spec.to_dict(), sort_keys=True)
        if key not in self._kernels:
            k = spec.build(self.points)
            self._kernels[key] = (k, KernelFeatures.of(k), spec, {})
        return self._kernels[key]

    def _variance_form(self, entry, centered):
        k, features, spec, forms = entry
        if centered not in forms:
            forms[centered] = features.variance_form(centered)
        return forms[centered]

    def scores(self, dataset: Dataset, cfg: dict, paths: dict | None = None) -> np.ndarray:
        """Training values of the fitted function(s): (m,) or (m, 10)."""
        entry = self.kernel(cfg)
        k, features, spec, _ = entry
        centered = cfg.get("centered", True)
        method = cfg["method"]
        ncomp = 10 if cfg.get("head") == "svm10" else 1
        if method == "kpca":
            key = (json.dumps(spec.to_dict(), sort_keys=True), centered, ncomp)
            if key not in self._kpca:
                ncomp_eff = min(ncomp, features.rank - 1)
                self._kpca[key] = kpca_fit(k, centered, ncomp_eff, features=features).scores()
            out = self._kpca[key]
        elif method == "mv":
            groups = groups_from_labels(dataset)
            ncomp_eff = min(ncomp, features.rank - 1)
            out = mvkpca_fit(k, groups, cfg["c"], ncomp_eff, centered=centered,
                             features=features).scores()
        elif method == "ls":
            pkey = (json.dumps(spec.to_dict(), sort_keys=True), centered, cfg["c"])
            if paths is None or pkey not in paths:
                path = LsPath(k, dataset, cfg["c"], centered, features,
                              self._variance_form(entry, centered))
                if paths is not None:
                    paths[pkey] = path
            else:
                path = paths[pkey]
            out = path.values(cfg["s2"])
            if centered:
                out = out - out.mean()
        elif method == "lr":
            solver = self.lr_solver
            if solver == "auto":
                solver = "implicit" if features.rank <= 400 else "explicit"
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                fn = lrkpca_fit(k, dataset, LrConfig(cfg["c"], cfg["s2"], centered),
                                features=features, solver=solver)
            out = fn.scores
        else:
            raise ValueError(f"unknown method {method!r}")
        return out[:, 0] if out.ndim == 2 and out.shape[1] == 1 else out

    def predict(self, dataset: Dataset, cfg: dict, paths: dict | None = None) -> np.ndarray:
        """Predicted +-1 labels for all points; the head is trained on the
        labeled points of `dataset`."""
        f = self.scores(dataset, cfg, paths)
        idx = dataset.labeled
        t = dataset.labels[idx]
        if f.ndim == 1:
            return threshold_head(f[idx], t).predict(f)
        return svm_head(f[idx], t).predict(f)


@dataclass
class CvResult:
    best: dict
    rows: list  # (config, per-fold errors)

    def table(self):
        for cfg, errs in self.rows:
            yield cfg, float(np.mean(errs)), float(np.std(errs)), errs

    def to_csv(self, path) -> None:
        keys = sorted({k for cfg, _ in self.rows for k in cfg})
        nfold = max(len(e) for _, e in self.rows)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(keys + [f"fold{j}" for j in range(nfold)] + ["mean", "std"])
            for cfg, mean, std, errs in self.table():
                writer.writerow([cfg.get(k, "") for k in keys]
                                + [repr(float(e)) for e in errs] + [repr(mean), repr(std)])


def _select(rows):
    return min(rows, key=lambda row: (round(float(np.mean(row[1])), 12),
                                      config_order(row[0])))[0]


def cross_validate(dataset: Dataset, grid, folds: int = 10, seed: int = 0,
                   evaluator: Evaluator | None = None, plan=None) -> CvResult:
    """Transductive k-fold CV over the labeled points.

    For each fold the fold's labels are hidden, every configuration is fit
    and the predictions on the fold are scored. The configuration with the
    smallest mean fold error wins; ties go to smaller c, then smaller gamma.
    """
    configs = grid.configs() if isinstance(grid, ParamGrid) else list(grid)
    if not configs:
        raise ValueError("empty grid")
    configs = [resolve(cfg, dataset) for cfg in configs]
    unique = {config_id(cfg): cfg for cfg in configs}
    evaluator = evaluator or Evaluator(dataset.points)
    plan = plan or make_folds(dataset, folds, seed)
    errors = {key: [] for key in unique}
    for fold in plan.folds:
        hidden = hide(dataset, fold)
        paths = {}
        for key in sorted(unique):
            cfg = unique[key]
            pred = evaluator.predict(hidden, cfg, paths)
            errors[config_id(cfg)].append(
                transductive_error(pred[fold], dataset.labels[fold]))
    rows = [(cfg, list(errors[config_id(cfg)])) for cfg in sorted(configs, key=config_order)]
    return CvResult(_select(rows), rows)


def loo_select(dataset: Dataset, grid, evaluator: Evaluator | None = None) -> CvResult:
    """Leave-one-out selection (one fold per labeled point)."""
    return cross_validate(dataset, grid, folds=dataset.labeled.size, seed=0,
                          evaluator=evaluator)


# --------------------------------------------------------------------------
# Multi-split benchmark


@dataclass
class BenchResult:
    errors: dict  # name -> list of per-split unlabeled errors
    chosen: dict = field(default_factory=dict)  # name -> list of configs

    def summary(self):
        return {name: (float(np.mean(e)), float(np.std(e))) for name, e in self.errors.items()}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            nsplit = max(len(e) for e in self.errors.values())
            writer.writerow(["method", "mean", "std"] + [f"split{j}" for j in range(nsplit)])
            for name, errs in self.errors.items():
                writer.writerow([name, repr(float(np.mean(errs))), repr(float(np.std(errs)))]
                                + [repr(float(e)) for e in errs])


def run_benchmark(dataset: Dataset, grids: dict, splits: int, labels_per_class: int,
                  folds: int = 10, seed: int = 0, baseline: bool = True,
                  progress=None) -> BenchResult:
    """Repeat (relabel, select by CV, fit, score) over seeded label splits.

    ``grids`` maps a report name to a :class:`ParamGrid` or config list. The
    point set is fixed; each split draws ``labels_per_class`` labels per
    class from ``dataset.truth``.
    """
    from .data import relabel

    if dataset.truth is None:
        raise DataError("benchmark needs ground-truth labels")
    evaluator = Evaluator(dataset.points)
    seeds = np.random.SeedSequence(seed).spawn(splits)
    result = BenchResult({name: [] for name in grids})
    if baseline:
        result.errors["1-NN"] = []
    for j, ss in enumerate(seeds):
        split_seed, fold_seed = ss.generate_state(2)
        split = relabel(dataset, labels_per_class, int(split_seed))
        for name, grid in grids.items():
            cv = cross_validate(split, grid, folds, int(fold_seed), evaluator)
            pred = evaluator.predict(split, cv.best)
            result.errors[name].append(unlabeled_error(split, pred))
            result.chosen.setdefault(name, []).append(cv.best)
            if progress:
                progress(j, name, result.errors[name][-1])
        if baseline:
            result.errors["1-NN"].append(unlabeled_error(split, nearest_neighbor_predict(split)))
    return result
