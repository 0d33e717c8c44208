import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sskpca.data import (DataError, Dataset, GroupSet, groups_from_labels, hide, load_csv,
                         make_folds, relabel, save_csv, two_gaussians, two_moons)


def test_load_small_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0.5,1.0,1\n1.5,2.0,0\n-1.0,3.0,-1\n")
    ds = load_csv(path)
    assert ds.points.shape == (3, 2)
    assert ds.labeled.tolist() == [0, 2]
    assert ds.unlabeled.tolist() == [1]
    assert ds.targets.tolist() == [1.0, -1.0]


def test_header_and_label_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("label,x,y\n1,0.0,1.0\n-1,2.0,3.0\n")
    ds = load_csv(path, label_column=0)
    assert ds.labels.tolist() == [1, -1]
    np.testing.assert_array_equal(ds.points, [[0.0, 1.0], [2.0, 3.0]])


def test_bad_label_names_row(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0.0,1\n1.0,2\n")
    with pytest.raises(DataError, match=r"d.csv:2: label '2'"):
        load_csv(path)


def test_parse_error_location(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0.0,1\nabc,0\n")
    with pytest.raises(DataError, match=r":2: column 1"):
        load_csv(path)


def test_ragged_rows(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0.0,1.0,1\n1.0,0\n")
    with pytest.raises(DataError, match="expected 3 fields"):
        load_csv(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_csv(tmp_path / "nope.csv")


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_csv_round_trip_bit_exact(tmp_path_factory, seed, header):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 12))
    points = rng.standard_normal((m, 3)) * 10.0 ** rng.integers(-8, 8, size=(m, 3))
    ds = Dataset(points, rng.integers(-1, 2, size=m))
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    save_csv(ds, path, header=header)
    back = load_csv(path)
    assert back.points.tobytes() == ds.points.tobytes()
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 2)), [1, 0])
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 2)), [1, 3])


def test_two_moons_contract():
    ds = two_moons(200, 0.05, 4, 7)
    assert ds.points.shape == (200, 2)
    assert ds.labeled.size == 8
    assert np.sum(ds.labels == 1) == 4 and np.sum(ds.labels == -1) == 4
    assert np.all(ds.labels[ds.labeled] == ds.truth[ds.labeled])


def test_two_moons_noise_free_geometry():
    ds = two_moons(100, 0.0, 2, 3)
    upper = ds.points[ds.truth == 1]
    np.testing.assert_allclose(np.hypot(upper[:, 0], upper[:, 1]), 1.0, atol=1e-15)
    assert np.all(upper[:, 1] >= 0)
    lower = ds.points[ds.truth == -1] - [0.5, -0.25]
    np.testing.assert_allclose(np.hypot(lower[:, 0], lower[:, 1]), 1.0, atol=1e-15)
    assert np.all(lower[:, 1] <= 1e-15)


def test_generators_are_deterministic():
    a, b = two_moons(50, 0.1, 3, 11), two_moons(50, 0.1, 3, 11)
    assert a.fingerprint() == b.fingerprint()
    np.testing.assert_array_equal(a.truth, b.truth)
    c, d = two_gaussians(40, 1.0, 5, 2, 1), two_gaussians(40, 1.0, 5, 2, 1)
    np.testing.assert_array_equal(c.points, d.points)
    assert two_moons(50, 0.1, 3, 12).fingerprint() != a.fingerprint()


def test_generator_errors():
    with pytest.raises(DataError):
        two_moons(201)
    with pytest.raises(DataError):
        two_moons(20, labeled_per_class=11)
    with pytest.raises(DataError):
        two_gaussians(21)
    with pytest.raises(DataError):
        two_gaussians(20, dims=0)


def test_two_gaussians_contract():
    ds = two_gaussians(1500, 2.5, 241, 50, 5)
    assert ds.points.shape == (1500, 241)
    assert ds.labeled.size == 100


@pytest.mark.parametrize("seed", range(5))
def test_two_gaussians_mean_separation(seed):
    # in one dimension the mean difference has sd sqrt(2) / sqrt(m / 2)
    m, sep = 2000, 2.5
    ds = two_gaussians(m, sep, 1, 1, seed)
    diff = ds.points[ds.truth == 1, 0].mean() - ds.points[ds.truth == -1, 0].mean()
    assert abs(abs(diff) - sep) <= 3 * np.sqrt(2.0) / np.sqrt(m / 2)


def test_two_gaussians_zero_separation_symmetric():
    ds = two_gaussians(4000, 0.0, 3, 1, 0)
    diff = ds.points[ds.truth == 1].mean(0) - ds.points[ds.truth == -1].mean(0)
    assert np.all(np.abs(diff) < 3 * np.sqrt(2.0 / 2000))


def test_groups_from_labels():
    ds = Dataset(np.zeros((4, 1)), [1, 0, -1, 1])
    groups = groups_from_labels(ds)
    assert [g.tolist() for g in groups] == [[0, 3], [2]]
    assert len(groups_from_labels(Dataset(np.zeros((3, 1)), [1, 1, 0]))) == 1
    with pytest.raises(DataError):
        groups_from_labels(Dataset(np.zeros((2, 1)), [0, 0]))


@given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=40))
def test_groups_cover_labeled_exactly(labels):
    ds = Dataset(np.zeros((len(labels), 1)), labels)
    if ds.labeled.size == 0:
        return
    groups = groups_from_labels(ds)
    joined = np.sort(np.concatenate(list(groups)))
    np.testing.assert_array_equal(joined, ds.labeled)


def test_groupset_validation():
    with pytest.raises(DataError):
        GroupSet(([0, 1], [1, 2]), 3)
    with pytest.raises(DataError):
        GroupSet(([],), 3)
    with pytest.raises(DataError):
        GroupSet(([5],), 3)


@given(st.integers(2, 60), st.integers(1, 12), st.integers(0, 1000))
def test_folds_partition_labeled(n_labeled, folds, seed):
    rng = np.random.default_rng(seed)
    labels = np.zeros(80, dtype=int)
    labels[:n_labeled] = rng.choice([-1, 1], n_labeled)
    ds = Dataset(np.zeros((80, 1)), labels)
    if folds > n_labeled:
        with pytest.raises(DataError):
            make_folds(ds, folds, seed)
        return
    plan = make_folds(ds, folds, seed)
    sizes = [f.size for f in plan.folds]
    assert min(sizes) >= 1 and max(sizes) - min(sizes) <= 1
    np.testing.assert_array_equal(np.sort(np.concatenate(plan.folds)), ds.labeled)
    again = make_folds(ds, folds, seed)
    assert all(np.array_equal(a, b) for a, b in zip(plan.folds, again.folds))


def test_hide_and_relabel():
    ds = two_moons(40, 0.05, 3, 0)
    hidden = hide(ds, ds.labeled[:2])
    assert hidden.labeled.size == ds.labeled.size - 2
    assert ds.labeled.size == 6  # original untouched
    fresh = relabel(ds, 5, 9)
    assert fresh.labeled.size == 10
    assert np.all(fresh.labels[fresh.labeled] == ds.truth[fresh.labeled])
