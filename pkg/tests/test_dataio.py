from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kpboost.dataio import (Dataset, FoldPlan, Scaler, imbalance_ratio, load_csv, normalize,
                            normalize_whole, save_csv, stratified_kfold, subsample_preserving_imbalance,
                            two_gaussians)
from kpboost.errors import DataError

DATA = Path(__file__).resolve().parents[1] / "data"


def make(counts, d=2, seed=0):
    rng = np.random.default_rng(seed)
    y = np.concatenate([np.full(c, i) for i, c in enumerate(counts)])
    return Dataset(rng.normal(size=(y.size, d)), y)


def test_load_small_csv(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("1,2,a\n3,4,b\n5,6,a\n7,8,b\n")
    ds = load_csv(p)
    assert (ds.n, ds.d, ds.n_classes) == (4, 2, 2)
    assert ds.class_counts.tolist() == [2, 2]
    assert ds.class_names == ("a", "b")


def test_load_header_and_label_column(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("label,x,y\nno,1,2\nyes,3,4\n")
    ds = load_csv(p, label_column=0)
    assert ds.features.tolist() == [[1, 2], [3, 4]]
    assert ds.class_names == ("no", "yes")


def test_load_single_class(tmp_path):
    p = tmp_path / "one.csv"
    p.write_text("1,2,a\n3,4,a\n")
    with pytest.raises(DataError, match="degenerate"):
        load_csv(p)


def test_load_malformed_row_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2,a\n3,b\n5,6,b\n")
    with pytest.raises(DataError, match=":2:"):
        load_csv(p)


def test_load_non_numeric_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2,a\n3,4,b\n5,oops,b\n")
    with pytest.raises(DataError, match=":3:"):
        load_csv(p)


def test_load_iris12vs3():
    ds = load_csv(DATA / "iris12vs3.csv")
    assert (ds.n, ds.d, ds.n_classes) == (150, 4, 2)
    assert imbalance_ratio(ds) == 2.0


def test_csv_roundtrip(tmp_path):
    ds = make([5, 3])
    save_csv(ds, tmp_path / "rt.csv")
    back = load_csv(tmp_path / "rt.csv")
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)


def test_dataset_is_read_only():
    ds = make([3, 3])
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


def test_dataset_rejects_missing_class():
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 1)), np.array([0, 2, 2]))


def test_select_relabels():
    ds = make([2, 3, 4])
    sub = ds.select([2, 0])
    assert sub.class_counts.tolist() == [4, 2]
    assert sub.class_names == ("2", "0")


def test_normalize_population_std():
    train = Dataset(np.array([[1.0, 5.0], [3.0, 5.0]]), np.array([0, 1]))
    test = Dataset(np.array([[2.0, 7.0]]), np.array([0]))
    a, b = normalize(train, test)
    assert a.features[:, 0].tolist() == [-1.0, 1.0]
    assert a.features[:, 1].tolist() == [0.0, 0.0]
    assert b.features[0, 0] == 0.0
    assert b.features[0, 1] == 0.0


@given(st.integers(0, 1000))
def test_normalized_training_statistics(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(loc=3.0, scale=rng.uniform(0.1, 5.0), size=(25, 3))
    X[:, 2] = 4.0
    ds = Dataset(X, np.r_[np.zeros(12, int), np.ones(13, int)])
    Z = normalize_whole(ds).features
    assert np.allclose(Z[:, :2].mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(Z[:, :2].std(axis=0), 1.0, atol=1e-9)
    assert np.all(Z[:, 2] == 0.0)


def test_scaler_uses_train_only():
    sc = Scaler.fit(np.array([[0.0], [2.0]]))
    assert sc.transform(np.array([[4.0]]))[0, 0] == 3.0


def test_kfold_exact_divisibility():
    plan = stratified_kfold(make([10, 10]), 10, seed=1)
    ds = make([10, 10])
    for _, te in plan.folds:
        assert np.bincount(ds.labels[te]).tolist() == [1, 1]


def test_kfold_deterministic():
    ds = make([30, 7])
    a, b = stratified_kfold(ds, 5, 3), stratified_kfold(ds, 5, 3)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a.folds, b.folds))


def test_kfold_small_class_named():
    ds = Dataset(np.zeros((17, 1)), np.r_[np.zeros(10, int), np.ones(7, int)], ("big", "tiny"))
    with pytest.raises(DataError, match="tiny"):
        stratified_kfold(ds, 10, 0)


@settings(max_examples=40)
@given(st.lists(st.integers(5, 40), min_size=2, max_size=4), st.integers(2, 5), st.integers(0, 99))
def test_kfold_partition_and_balance(counts, k, seed):
    ds = make(counts)
    plan = stratified_kfold(ds, k, seed)
    tests = [te for _, te in plan.folds]
    assert np.array_equal(np.sort(np.concatenate(tests)), np.arange(ds.n))
    for tr, te in plan.folds:
        assert np.intersect1d(tr, te).size == 0
        assert tr.size + te.size == ds.n
        per = np.bincount(ds.labels[te], minlength=len(counts))
        assert np.all(np.abs(per - np.array(counts) / k) <= 1)


def test_foldplan_text_roundtrip():
    plan = stratified_kfold(make([12, 6]), 3, 7)
    back = FoldPlan.from_text(plan.to_text())
    assert back.seed == 7
    assert all(np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
               for a, b in zip(plan.folds, back.folds))


@pytest.mark.parametrize("counts,fraction,expected", [
    ([100, 10], 0.5, [50, 5]),
    ([9, 3], 1 / 3, [3, 1]),
])
def test_subsample_counts(counts, fraction, expected):
    sub = subsample_preserving_imbalance(make(counts), fraction, seed=0)
    assert sub.class_counts.tolist() == expected


def test_subsample_identity_is_permutation():
    ds = make([6, 4])
    sub = subsample_preserving_imbalance(ds, 1.0, seed=2)
    rows = sorted(map(tuple, sub.features))
    assert rows == sorted(map(tuple, ds.features))


def test_subsample_empty_class():
    with pytest.raises(DataError):
        subsample_preserving_imbalance(make([100, 1]), 0.1)


@given(st.integers(2, 60), st.integers(1, 20), st.floats(0.05, 1.0), st.integers(0, 50))
def test_subsample_ratio_bound(big, small, fraction, seed):
    ds = make([big, small])
    try:
        sub = subsample_preserving_imbalance(ds, fraction, seed)
    except DataError:
        return
    before, after = imbalance_ratio(ds), imbalance_ratio(sub)
    bound = max(1.0 / c for c in sub.class_counts) * before
    assert abs(before - after) <= bound + 1e-12


def test_two_gaussians_shape():
    ds = two_gaussians(300, seed=1)
    assert ds.class_counts.tolist() == [270, 30]
    assert imbalance_ratio(ds) == 9.0
