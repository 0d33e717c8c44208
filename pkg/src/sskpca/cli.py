"""Command-line entry point: ``sskpca {gen,fit,predict,cv,bench,bound}``.

Exit codes: 0 success, 2 usage error, 1 numerical failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import cqp
from .data import DataError, Dataset, groups_from_labels, load_csv, save_csv, two_gaussians, two_moons
from .eigen import EigenError
from .evaluation import (LinearHead, RiskBoundInput, ThresholdHead, cross_validate,
                         default_grid_path, kernel_spec, load_grid, loo_select, risk_bound,
                         risk_bound_general, run_benchmark, svm_head, threshold_head)
from .kernels import KernelError
from .kpca import KernelFeatures, kpca_fit, load_model, mvkpca_fit, save_model
from .lrkpca import LrConfig, lrkpca_fit
from .lskpca import LsConfig, lskpca_fit, s2_from_ratio

log = logging.getLogger("sskpca")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Parser


def _kernel_flags(p):
    g = p.add_argument_group("kernel")
    g.add_argument("--kernel", choices=["gaussian", "diffusion", "mixed", "lpinv"],
                   default="gaussian")
    g.add_argument("--gamma", type=float, help="Gaussian inverse squared length scale")
    g.add_argument("--tau", type=float, help="diffusion time")
    g.add_argument("--mix-w", type=float, help="weight of the Gaussian part in 'mixed'")
    g.add_argument("--knn", type=int, default=10)


def _method_flags(p):
    p.add_argument("--method", choices=["kpca", "mv", "ls", "lr"], default="ls")
    p.add_argument("--c", type=float)
    p.add_argument("--s2", type=float, help="variance level")
    p.add_argument("--rho", type=float, help="variance level as a multiple of m var(t)")
    cen = p.add_mutually_exclusive_group()
    cen.add_argument("--centered", dest="centered", action="store_true", default=True)
    cen.add_argument("--uncentered", dest="centered", action="store_false")
    p.add_argument("--groups-from-labels", action="store_true",
                   help="MV-KPCA groups: one per label class")
    p.add_argument("--head", choices=["threshold", "svm10"], default="threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sskpca", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--two-moons", type=int, metavar="M")
    src.add_argument("--synthetic", choices=["g241c-like"])
    p.add_argument("--m", type=int, default=1500, help="points for --synthetic")
    p.add_argument("--dims", type=int, default=241)
    p.add_argument("--separation", type=float, default=2.5)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--labels", type=int, default=4, help="labeled points per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset CSV")
    p.add_argument("--truth", help="also write ground truth (index,label) here")

    p = sub.add_parser("fit", help="fit one configuration")
    p.add_argument("data")
    _kernel_flags(p)
    _method_flags(p)
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("predict", help="evaluate a saved model on points")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out", default="predictions.csv")

    p = sub.add_parser("cv", help="select a configuration by cross-validation")
    p.add_argument("data")
    p.add_argument("--grid", required=True, help="grid file or shipped grid name")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--loo", action="store_true", help="leave-one-out instead of k folds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("bench", help="seeded multi-split benchmark")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--synthetic", choices=["g241c-like", "two-moons"])
    src.add_argument("--data", help="dataset CSV (needs --truth)")
    p.add_argument("--truth", help="ground truth CSV (index,label)")
    p.add_argument("--splits", type=int, default=12)
    p.add_argument("--labels", type=int, default=100, help="labeled points per split (total)")
    p.add_argument("--grid", action="append", help="grid file or shipped name (repeatable)")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("bound", help="evaluate the transductive risk bound")
    p.add_argument("--risk", type=float, required=True, help="empirical labeled risk")
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, help="rank term (LS form)")
    p.add_argument("--s2", type=float, help="variance level (LS form)")
    p.add_argument("--mu", type=float, help="coefficient-norm bound (general form)")
    p.add_argument("--k-fro", type=float, help="Frobenius norm of K (general form)")
    p.add_argument("--delta", type=float, default=0.05)
    return parser


# --------------------------------------------------------------------------
# Helpers


def _limit_threads():
    n = os.environ.get("SSKPCA_THREADS")
    if not n:
        return None
    try:
        limit = int(n)
    except ValueError:
        raise UsageError(f"SSKPCA_THREADS must be an integer, got {n!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=limit)


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="a")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return out


def _load_truth(path, m):
    truth = np.zeros(m, dtype=int)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    for row in rows:
        try:
            i, y = int(row[0]), int(float(row[1]))
        except ValueError:
            continue  # header
        truth[i] = y
    if not np.all(np.isin(truth, (-1, 1))):
        raise DataError(f"{path}: truth must give +-1 for every point")
    return truth


def _write_truth(path, truth):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for i, y in enumerate(truth):
            writer.writerow([i, int(y)])


def _write_predictions(path, f, labels):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "f", "label"])
        for i, (v, y) in enumerate(zip(f, labels)):
            writer.writerow([i, repr(float(v)), int(y)])


def _config_from_args(args, dataset: Dataset) -> dict:
    """Validate method/parameter compatibility before any work."""
    cfg = {"method": args.method, "kernel": args.kernel, "knn": args.knn,
           "centered": args.centered, "head": args.head}
    need = {"gaussian": ["gamma"], "diffusion": ["tau"], "mixed": ["gamma", "tau", "mix_w"],
            "lpinv": []}[args.kernel]
    for name in need:
        if getattr(args, name) is None:
            raise UsageError(f"--kernel {args.kernel} needs --{name.replace('_', '-')}")
    for name, key in (("gamma", "gamma"), ("tau", "tau"), ("mix_w", "w")):
        if getattr(args, name) is not None:
            cfg[key] = getattr(args, name)
    if args.method in ("mv", "ls", "lr"):
        if args.c is None:
            raise UsageError(f"--method {args.method} needs --c")
        cfg["c"] = args.c
    elif args.c is not None:
        raise UsageError("--c has no effect for --method kpca")
    if args.method in ("ls", "lr"):
        if (args.s2 is None) == (args.rho is None):
            raise UsageError(f"--method {args.method} needs exactly one of --s2, --rho")
        cfg["s2"] = args.s2 if args.s2 is not None else s2_from_ratio(args.rho, dataset)
        if args.head != "threshold":
            raise UsageError(f"--method {args.method} fits one function; use --head threshold")
    elif args.s2 is not None or args.rho is not None:
        raise UsageError(f"--s2/--rho have no effect for --method {args.method}")
    if args.method == "mv" and not args.groups_from_labels:
        raise UsageError("--method mv needs --groups-from-labels")
    if args.method != "mv" and args.groups_from_labels:
        raise UsageError("--groups-from-labels only applies to --method mv")
    return cfg


def _resolve_grid(name) -> Path:
    path = Path(name)
    if path.exists():
        return path
    shipped = default_grid_path(name)
    if shipped.exists():
        return shipped
    raise UsageError(f"no grid file {name!r} (and no shipped grid of that name)")


# --------------------------------------------------------------------------
# Subcommands


def cmd_gen(args) -> int:
    if args.two_moons is not None:
        ds = two_moons(args.two_moons, args.noise, args.labels, args.seed)
    else:
        ds = two_gaussians(args.m, args.separation, args.dims, args.labels, args.seed)
    save_csv(ds, args.out)
    if args.truth:
        _write_truth(args.truth, ds.truth)
    return 0


def cmd_fit(args) -> int:
    ds = load_csv(args.data)
    cfg = _config_from_args(args, ds)
    if ds.labeled.size == 0:
        raise UsageError("dataset has no labeled points")
    out = _outdir(args.out)
    log.info("fit %s on %s", json.dumps(cfg, sort_keys=True), args.data)
    spec = kernel_spec(cfg)
    k = spec.build(ds.points)
    features = KernelFeatures.of(k)
    points = ds.points
    method = cfg["method"]
    ncomp = 10 if cfg["head"] == "svm10" else 1
    extra = {}
    if method == "kpca":
        funcs = list(kpca_fit(k, cfg["centered"], min(ncomp, features.rank - 1), spec=spec,
                              points=points, features=features).functions)
    elif method == "mv":
        funcs = list(mvkpca_fit(k, groups_from_labels(ds), cfg["c"],
                                min(ncomp, features.rank - 1), centered=cfg["centered"],
                                spec=spec, points=points, features=features).functions)
    elif method == "ls":
        funcs = [lskpca_fit(k, ds, LsConfig(cfg["c"], cfg["s2"], cfg["centered"]),
                            spec=spec, points=points, features=features)]
    else:
        fn = lrkpca_fit(k, ds, LrConfig(cfg["c"], cfg["s2"], cfg["centered"]),
                        spec=spec, points=points, features=features)
        trace = fn.details["trace"]
        trace.to_csv(out / "trace.csv")
        extra = {"iterations": trace.iterations, "converged": trace.converged}
        log.info("LR iterations %d converged %s", trace.iterations, trace.converged)
        funcs = [fn]
    scores = np.column_stack([f.scores for f in funcs])
    idx, t = ds.labeled, ds.labels[ds.labeled]
    if scores.shape[1] == 1:
        head = threshold_head(scores[idx, 0], t)
        f = scores[:, 0]
        labels = head.predict(f)
        head_doc = {"kind": "threshold", "threshold": head.threshold,
                    "orientation": head.orientation}
    else:
        head = svm_head(scores[idx], t)
        f = head.decision(scores)
        labels = np.where(f > 0, 1, -1)
        head_doc = {"kind": "svm", "w": head.w.tolist(), "b0": head.b0,
                    "separable": head.separable, "constant": head.constant}
    save_model(out / "model.json", funcs, spec=spec, points=points,
               dataset_hash=ds.fingerprint(), centered=cfg["centered"],
               params={**cfg, **extra}, head=head_doc)
    _write_predictions(out / "predictions.csv", f, labels)
    return 0


def _model_scores(doc, points) -> np.ndarray:
    spec = doc["kernel"]
    train = doc["points"]
    same = train is not None and train.shape == points.shape and np.array_equal(train, points)
    if spec.kind == "gaussian" or not same:
        cols = [fn.predict(points) for fn in doc["functions"]]
    else:
        # graph kernels are defined on the training vertices only
        k = spec.build(train)
        cols = [k @ fn.alpha - fn.centering_mean for fn in doc["functions"]]
    return np.column_stack(cols)


def cmd_predict(args) -> int:
    doc = load_model(args.model)
    ds = load_csv(args.data)
    scores = _model_scores(doc, ds.points)
    head = doc["head"]
    if head["kind"] == "threshold":
        f = scores[:, 0]
        labels = ThresholdHead(head["threshold"], head["orientation"]).predict(f)
    else:
        lin = LinearHead(np.asarray(head["w"]), head["b0"], head["separable"], head["constant"])
        f = lin.decision(scores)
        labels = np.where(f > 0, 1, -1)
    _write_predictions(args.out, f, labels)
    return 0


def cmd_cv(args) -> int:
    ds = load_csv(args.data)
    grid = load_grid(_resolve_grid(args.grid))
    if not args.loo and args.folds > ds.labeled.size:
        raise UsageError(f"--folds {args.folds} exceeds {ds.labeled.size} labeled points")
    out = _outdir(args.out)
    log.info("cv on %s with %s", args.data, args.grid)
    result = loo_select(ds, grid) if args.loo else cross_validate(ds, grid, args.folds, args.seed)
    result.to_csv(out / "cv.csv")
    (out / "best.json").write_text(json.dumps(result.best, sort_keys=True, indent=1) + "\n")
    print(json.dumps(result.best, sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    if args.labels < 2 or args.labels % 2:
        raise UsageError("--labels must be an even number >= 2 (split evenly per class)")
    seeds = np.random.SeedSequence(args.seed).spawn(2)
    data_seed = int(seeds[0].generate_state(1)[0])
    if args.synthetic == "g241c-like":
        ds = two_gaussians(1500, 2.5, 241, args.labels // 2, data_seed)
    elif args.synthetic == "two-moons":
        ds = two_moons(200, 0.05, args.labels // 2, data_seed)
    else:
        if not args.truth:
            raise UsageError("--data needs --truth")
        ds = load_csv(args.data)
        ds = Dataset(ds.points, ds.labels, _load_truth(args.truth, ds.m))
    names = args.grid or [args.synthetic or "two-moons"]
    grids = {Path(n).stem: load_grid(_resolve_grid(n)) for n in names}
    out = _outdir(args.out)
    log.info("bench %s splits=%d labels=%d", names, args.splits, args.labels)

    def progress(j, name, err):
        log.info("split %d %s error %.4f", j, name, err)

    result = run_benchmark(ds, grids, args.splits, args.labels // 2, args.folds,
                           int(seeds[1].generate_state(1)[0]), progress=progress)
    result.to_csv(out / "bench.csv")
    for name, (mean, std) in result.summary().items():
        print(f"{name:>16s}  {100 * mean:6.2f} ({100 * std:.2f})")
    return 0


def cmd_bound(args) -> int:
    if args.mu is not None or args.k_fro is not None:
        if args.mu is None or args.k_fro is None:
            raise UsageError("the general form needs both --mu and --k-fro")
        value = risk_bound_general(args.risk, args.mu, args.k_fro, args.l, args.n, args.delta)
    else:
        if args.q is None or args.s2 is None:
            raise UsageError("the LS form needs --q and --s2")
        try:
            inp = RiskBoundInput(args.risk, args.q, args.s2, args.l, args.n, args.delta)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        value = risk_bound(inp)
    print(repr(value))
    return 0


COMMANDS = {"gen": cmd_gen, "fit": cmd_fit, "predict": cmd_predict, "cv": cmd_cv,
            "bench": cmd_bench, "bound": cmd_bound}

NUMERICAL = (cqp.CqpError, EigenError, np.linalg.LinAlgError, FloatingPointError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with _limit_threads() or contextlib.nullcontext():
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sskpca {args.command}: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"sskpca {args.command}: {exc}", file=sys.stderr)
        return 2
    except KernelError as exc:
        print(f"sskpca {args.command}: {exc}", file=sys.stderr)
        return 1
    except NUMERICAL as exc:
        print(f"sskpca {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 1
    finally:
        for h in list(log.handlers):
            h.close()
            log.removeHandler(h)


if __name__ == "__main__":
    sys.exit(main())
