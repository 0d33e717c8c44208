import csv
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sskpca.data import DataError, Dataset, make_folds, two_moons
from sskpca.evaluation import (RISK_CONSTANT, Evaluator, ParamGrid, RiskBoundInput,
                               ThresholdHead, config_order, cross_validate, default_grid_path,
                               load_grid, loo_select, nearest_neighbor_predict,
                               numerical_rank, risk_bound, risk_bound_general, run_benchmark,
                               svm_head, threshold_head, transductive_error, unlabeled_error)

# --------------------------------------------------------------------------
# threshold head


def test_threshold_two_points():
    head = threshold_head(np.array([-1.0, 1.0]), np.array([-1, 1]))
    assert head.threshold == 0.0 and head.orientation == 1
    np.testing.assert_array_equal(head.predict([-1.0, 1.0]), [-1, 1])


@pytest.mark.parametrize("label", [-1, 1])
def test_threshold_single_class(label):
    head = threshold_head(np.array([0.3, -2.0, 5.0]), np.full(3, label))
    assert math.isinf(head.threshold)
    np.testing.assert_array_equal(head.predict(np.linspace(-1e6, 1e6, 7)), label)


def test_threshold_flip_and_no_flip():
    f, t = np.array([-2.0, -1.0, 1.0, 2.0]), np.array([1, 1, -1, -1])
    head = threshold_head(f, t)
    assert head.orientation == -1
    np.testing.assert_array_equal(head.predict(f), t)
    fixed = threshold_head(f, t, allow_flip=False)
    assert fixed.orientation == 1
    assert np.sum(fixed.predict(f) != t) == 2


def _brute_force(f, t):
    u = np.unique(f)
    cands = np.r_[-np.inf, (u[:-1] + u[1:]) / 2, np.inf]
    best = None
    for o in (1, -1):
        for b in cands:
            err = int(np.sum(np.where(o * (f - b) > 0, 1, -1) != t))
            best = err if best is None else min(best, err)
    return best


@given(st.integers(0, 10_000), st.integers(1, 30))
def test_threshold_matches_exhaustive_search(seed, n):
    rng = np.random.default_rng(seed)
    f = np.round(rng.standard_normal(n), 1)
    t = rng.choice([-1, 1], n)
    head = threshold_head(f, t)
    assert np.sum(head.predict(f) != t) == _brute_force(f, t)


@given(st.integers(0, 10_000), st.integers(2, 30))
def test_threshold_separable_zero_error_max_margin(seed, n):
    rng = np.random.default_rng(seed)
    f = np.sort(rng.standard_normal(n))
    cut = int(rng.integers(1, n))
    t = np.r_[-np.ones(cut), np.ones(n - cut)].astype(int)
    head = threshold_head(f, t)
    assert np.all(head.predict(f) == t)
    assert head.threshold == pytest.approx((f[cut - 1] + f[cut]) / 2)


def test_threshold_needs_points():
    with pytest.raises(DataError):
        threshold_head(np.array([]), np.array([]))


# --------------------------------------------------------------------------
# SVM head


def test_svm_two_points():
    head = svm_head(np.array([[-1.0], [1.0]]), np.array([-1, 1]))
    assert head.separable
    assert head.w[0] == pytest.approx(1.0, abs=1e-6)
    assert head.b0 == pytest.approx(0.0, abs=1e-6)


def _active_set_oracle(x, t):
    """Smallest ||w||^2 over support sets whose equality-constrained solution
    is feasible with nonnegative multipliers."""
    n, d = x.shape
    best = np.inf
    for size in range(2, n + 1):
        for sv in itertools.combinations(range(n), size):
            sv = list(sv)
            if len(set(t[sv])) < 2:
                continue
            a = t[sv, None] * np.c_[x[sv], np.ones(size)]
            # KKT: w = sum lam_i t_i x_i, sum lam_i t_i = 0, t_i (w x_i + b) = 1
            kkt = np.zeros((d + 1 + size, d + 1 + size))
            kkt[:d, :d] = np.eye(d)
            kkt[:d + 1, d + 1:] = -a.T
            kkt[d + 1:, :d + 1] = a
            rhs = np.r_[np.zeros(d + 1), np.ones(size)]
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            if np.linalg.norm(kkt @ sol - rhs) > 1e-9:
                continue
            w, b, lam = sol[:d], sol[d], sol[d + 1:]
            if np.any(lam < -1e-9) or np.any(t * (x @ w + b) < 1 - 1e-9):
                continue
            best = min(best, w @ w)
    return best


@given(st.integers(0, 10_000), st.integers(3, 8), st.integers(1, 3))
def test_svm_matches_active_set_oracle(seed, n, d):
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(d)
    x = rng.standard_normal((n, d))
    t = np.where(x @ w_true > 0, 1, -1)
    if len(set(t)) < 2:
        t[0] = -t[0]
        x[0] = -x[0]
    head = svm_head(x, t)
    assert head.separable
    norm = np.linalg.norm(head.w)
    margins = t * head.decision(x)
    assert margins.min() >= 1 - 1e-6
    assert head.w @ head.w == pytest.approx(_active_set_oracle(x, t), rel=1e-6)
    assert norm > 0


def test_svm_soft_margin_fallback():
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    t = np.array([-1, 1, -1, 1])
    head = svm_head(x, t)
    assert not head.separable
    assert np.mean(head.predict(x) == t) >= 0.5


def test_svm_one_class():
    head = svm_head(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1, 1]))
    assert head.constant
    np.testing.assert_array_equal(head.predict(np.zeros((3, 2))), 1)


# --------------------------------------------------------------------------
# error, baseline


def test_transductive_error():
    truth = np.array([1, -1, 1, -1])
    assert transductive_error(truth, truth) == 0.0
    assert transductive_error(-truth, truth) == 1.0
    assert transductive_error(np.array([1, 1, 1, 1]), truth) == 0.5
    with pytest.raises(ValueError):
        transductive_error(truth[:3], truth)


def test_unlabeled_error_counts_unlabeled_only():
    ds = Dataset(np.zeros((4, 1)), [1, 0, 0, -1], truth=[1, 1, -1, -1])
    pred = np.array([-1, 1, 1, 1])  # labeled points wrong, unlabeled half wrong
    assert unlabeled_error(ds, pred) == 0.5
    with pytest.raises(DataError):
        unlabeled_error(Dataset(np.zeros((2, 1)), [1, 0]), pred[:2])


def test_nearest_neighbor():
    ds = Dataset(np.array([[0.0], [1.0], [10.0], [9.0]]), [1, 0, -1, 0])
    np.testing.assert_array_equal(nearest_neighbor_predict(ds), [1, 1, -1, -1])
    with pytest.raises(DataError):
        nearest_neighbor_predict(Dataset(np.zeros((2, 1)), [0, 0]))


# --------------------------------------------------------------------------
# risk bound


def test_risk_constant():
    assert RISK_CONSTANT == pytest.approx(5.0449, abs=1e-3)
    assert RISK_CONSTANT < 5.05
    assert RISK_CONSTANT == pytest.approx(math.sqrt(32 * (math.log(4) + 1) / 3), rel=1e-15)


def test_risk_bound_hand_case():
    l = n = 750
    r = 1 / l + 1 / n
    expected = (math.sqrt(2 * 100 * 750 / (l * n)) + RISK_CONSTANT * r * math.sqrt(750)
                + math.sqrt(2 * r * math.log(1 / 0.05)))
    got = risk_bound(RiskBoundInput(0.0, 100, 750.0, l, n, 0.05))
    assert abs(got - expected) <= 1e-12
    assert got == pytest.approx(1.0112465, abs=1e-6)


def test_risk_bound_term_dropout():
    l, n, delta = 40, 160, 0.1
    r = 1 / l + 1 / n
    for s2 in (0.1, 10.0, 1e4):
        got = risk_bound(RiskBoundInput(0.0, 0, s2, l, n, delta))
        assert got == pytest.approx(RISK_CONSTANT * r * math.sqrt(40)
                                    + math.sqrt(2 * r * math.log(1 / delta)), rel=1e-14)


@given(st.floats(0, 1), st.integers(0, 50), st.floats(0, 1e4), st.integers(1, 100),
       st.integers(1, 100), st.floats(0.001, 0.999))
def test_risk_bound_dominates_empirical(risk, q, s2, l, n, delta):
    q = min(q, l + n)
    assert risk_bound(RiskBoundInput(risk, q, s2, l, n, delta)) >= risk


def test_risk_bound_general_form():
    l, n = 10, 30
    r = 1 / l + 1 / n
    got = risk_bound_general(0.1, 2.0, 5.0, l, n, 0.05)
    expected = 0.1 + math.sqrt(2 * 4.0 / (l * n) * 25.0) + RISK_CONSTANT * r * math.sqrt(10) \
        + math.sqrt(2 * r * math.log(20))
    assert got == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("kwargs", [
    dict(empirical_risk=1.5), dict(l=0), dict(n=0), dict(delta=1.0), dict(delta=0.0),
    dict(q=-1), dict(q=1000), dict(s2=-1.0)])
def test_risk_bound_input_validation(kwargs):
    base = dict(empirical_risk=0.1, q=3, s2=1.0, l=10, n=10, delta=0.05)
    base.update(kwargs)
    with pytest.raises(ValueError):
        RiskBoundInput(**base)


def test_numerical_rank():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((6, 3))
    assert numerical_rank(a @ a.T) == 3
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.diag([1.0, 1e-11])) == 1


# --------------------------------------------------------------------------
# grids and selection


def test_grid_file(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("# v1\nmethod: ls, mv\ngamma: 1 2\nc: 0.5\nrho: 1\n\nhead: threshold svm10\n")
    grid = load_grid(path)
    configs = grid.configs()
    # ls: 2 gammas; mv: 2 gammas x 2 heads (rho ignored)
    assert len(configs) == 6
    assert all("rho" not in c for c in configs if c["method"] == "mv")
    assert all("head" not in c for c in configs if c["method"] == "ls")
    path.write_text("gamma 1 2\n")
    with pytest.raises(ValueError, match=":1:"):
        load_grid(path)
    path.write_text("centered: maybe\n")
    with pytest.raises(ValueError):
        load_grid(path)


def test_grid_validation():
    with pytest.raises(ValueError):
        ParamGrid.from_dict({"method": "ls", "gamma": 1, "c": 1}).configs()
    with pytest.raises(ValueError):
        ParamGrid.from_dict({"method": "bogus", "gamma": 1}).configs()
    with pytest.raises(ValueError):
        ParamGrid.from_dict({"method": "mv", "gamma": 1}).configs()
    with pytest.raises(ValueError):
        ParamGrid.from_dict({"method": "kpca", "gamma": []}).configs()


@pytest.mark.parametrize("name", ["two-moons", "two-moons-lr", "g241c-like",
                                  "g241c-like-lr", "graph"])
def test_shipped_grids_parse(name):
    configs = load_grid(default_grid_path(name)).configs()
    assert configs


def test_lr_grids_are_coarser():
    for name in ("two-moons", "g241c-like"):
        ls = load_grid(default_grid_path(name)).configs()
        lr = load_grid(default_grid_path(name + "-lr")).configs()
        assert len(lr) < len(ls)


@pytest.fixture(scope="module")
def moons():
    return two_moons(200, 0.05, 4, 7)


def test_cv_single_config(moons):
    cfg = {"method": "ls", "gamma": 3.0, "c": 1.0, "s2": 50.0}
    result = cross_validate(moons, [cfg], folds=4, seed=0)
    assert result.best["gamma"] == 3.0 and result.best["c"] == 1.0


def test_cv_duplicates_and_order_invariance(moons):
    grid = ParamGrid.from_dict({"method": ["ls", "kpca"], "gamma": [1, 10], "c": [0.1, 10],
                                "rho": [0.05, 2]})
    configs = grid.configs()
    res = cross_validate(moons, configs + configs[:2], folds=4, seed=3)
    table = list(res.table())
    dup = [row for row in table if row[0] == res.rows[0][0]]
    assert len({row[1] for row in dup}) == 1
    rng = np.random.default_rng(0)
    shuffled = [configs[i] for i in rng.permutation(len(configs))]
    res2 = cross_validate(moons, shuffled, folds=4, seed=3)
    assert res2.best == res.best
    means = {str(sorted(c.items())): m for c, m, _, _ in table}
    best_mean = means[str(sorted(res.best.items()))]
    for cfg, mean, _, _ in table:
        assert mean >= best_mean
        if mean == best_mean:
            assert config_order(cfg) >= config_order(res.best)


def test_cv_tie_break_prefers_small_c_then_gamma(moons):
    grid = ParamGrid.from_dict({"method": "ls", "gamma": [3, 1], "c": [10, 0.1],
                                "rho": [0.5]})
    res = cross_validate(moons, grid, folds=4, seed=0)
    errs = {(c["c"], c["gamma"]): m for c, m, _, _ in res.table()}
    if len(set(errs.values())) == 1:
        assert (res.best["c"], res.best["gamma"]) == (0.1, 1.0)


def test_cv_two_moons_end_to_end(moons):
    grid = load_grid(default_grid_path("two-moons"))
    res = cross_validate(moons, grid, folds=8, seed=0)
    pred = Evaluator(moons.points).predict(moons, res.best)
    assert unlabeled_error(moons, pred) <= 0.02


def test_loo_two_moons(moons):
    grid = ParamGrid.from_dict({"method": "ls", "gamma": [1, 3], "c": [0.1, 1],
                                "rho": [0.5, 1]})
    res = loo_select(moons, grid)
    assert all(len(errs) == 8 for _, errs in res.rows)
    pred = Evaluator(moons.points).predict(moons, res.best)
    assert unlabeled_error(moons, pred) <= 0.02
    single = loo_select(moons, [{"method": "ls", "gamma": 1.0, "c": 1.0, "s2": 10.0}])
    assert single.best["s2"] == 10.0


def test_cv_hides_rather_than_removes(moons):
    # every fold is fit on all 200 points, so a fold's hidden points have
    # values; folds larger than the labeled set are rejected
    with pytest.raises(DataError):
        cross_validate(moons, [{"method": "kpca", "gamma": 1.0}], folds=9)
    with pytest.raises(ValueError):
        cross_validate(moons, [], folds=4)


def test_cv_csv(tmp_path, moons):
    grid = ParamGrid.from_dict({"method": "ls", "gamma": [1], "c": [1], "rho": [0.5, 1]})
    res = cross_validate(moons, grid, folds=4, seed=0)
    res.to_csv(tmp_path / "cv.csv")
    with open(tmp_path / "cv.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert {"fold0", "fold3", "mean", "std", "c", "gamma"} <= set(rows[0])
    for row, (cfg, errs) in zip(rows, res.rows):
        assert float(row["mean"]) == pytest.approx(np.mean(errs))


@pytest.mark.parametrize("method,head", [("kpca", "threshold"), ("kpca", "svm10"),
                                         ("mv", "threshold"), ("mv", "svm10"),
                                         ("ls", None), ("lr", None)])
def test_evaluator_methods(moons, method, head):
    cfg = {"method": method, "gamma": 3.0, "c": 1.0, "s2": 100.0}
    if head:
        cfg["head"] = head
    pred = Evaluator(moons.points).predict(moons, cfg)
    assert pred.shape == (200,) and set(np.unique(pred)) <= {-1, 1}
    assert unlabeled_error(moons, pred) <= 0.25


def test_evaluator_graph_kernels(moons):
    ev = Evaluator(moons.points)
    for kernel in ("diffusion", "mixed", "lpinv"):
        cfg = {"method": "ls", "kernel": kernel, "gamma": 3.0, "tau": 5.0, "w": 0.5,
               "knn": 20, "c": 10.0, "s2": 100.0, "centered": kernel != "lpinv"}
        assert unlabeled_error(moons, ev.predict(moons, cfg)) <= 0.1


def test_benchmark_runner(tmp_path):
    ds = two_moons(100, 0.05, 2, 1)
    grid = ParamGrid.from_dict({"method": "ls", "gamma": [3], "c": [1], "rho": [1]})
    res = run_benchmark(ds, {"ls": grid}, splits=3, labels_per_class=3, folds=3, seed=5)
    again = run_benchmark(ds, {"ls": grid}, splits=3, labels_per_class=3, folds=3, seed=5)
    assert res.errors == again.errors
    assert set(res.errors) == {"ls", "1-NN"} and len(res.errors["ls"]) == 3
    res.to_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0].startswith("method,mean,std,split0")
    summary = res.summary()
    assert 0 <= summary["ls"][0] <= 1
    with pytest.raises(DataError):
        run_benchmark(Dataset(ds.points, ds.labels), {"ls": grid}, 1, 2)


def test_threshold_head_predict_orientation():
    head = ThresholdHead(0.5, -1)
    np.testing.assert_array_equal(head.predict([0.0, 1.0]), [1, -1])


def test_folds_deterministic_in_cv(moons):
    a = make_folds(moons, 4, 11)
    b = make_folds(moons, 4, 11)
    assert all(np.array_equal(x, y) for x, y in zip(a.folds, b.folds))
