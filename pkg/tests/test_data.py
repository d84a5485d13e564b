import json

import numpy as np
import pytest

from dpboost import (
    DataError,
    Dataset,
    FeatureBounds,
    RngStream,
    generate_synthetic,
    load_bounds,
    load_csv,
    subsample_indices,
    subsample_rows,
)


def write_bounds(path, names, lows, highs, label_low, label_high):
    obj = {
        "features": [
            {"name": n, "min": lo, "max": hi} for n, lo, hi in zip(names, lows, highs)
        ],
        "label": {"min": label_low, "max": label_high},
    }
    path.write_text(json.dumps(obj))


@pytest.fixture
def simple_files(tmp_path):
    csv = tmp_path / "d.csv"
    csv.write_text("x,y,label\n1.0,2.0,0\n3.0,4.0,5\n5.0,6.0,10\n")
    bounds = tmp_path / "b.json"
    write_bounds(bounds, ["x", "y"], [0, 0], [10, 10], 0, 10)
    return csv, bounds


def test_label_normalization_endpoints_and_midpoint(simple_files):
    csv, bounds_path = simple_files
    ds = load_csv(str(csv), load_bounds(str(bounds_path)), "label")
    assert ds.n == 3 and ds.m == 2
    assert list(ds.labels) == [-1.0, 0.0, 1.0]


def test_label_round_trip_through_normalization(simple_files):
    _, bounds_path = simple_files
    bounds = load_bounds(str(bounds_path))
    raw = np.array([0.0, 2.5, 7.25, 10.0])
    back = bounds.denormalize_labels(bounds.normalize_labels(raw))
    assert np.abs(back - raw).max() < 1e-12


def test_features_clamped_into_public_bounds(tmp_path):
    csv = tmp_path / "d.csv"
    csv.write_text("x,label\n12.7,1\n-3.0,2\n")
    bounds = FeatureBounds(("x",), np.array([0.0]), np.array([10.0]), 0.0, 10.0)
    ds = load_csv(str(csv), bounds, "label")
    assert list(ds.features[:, 0]) == [10.0, 0.0]


def test_rows_with_missing_or_bad_cells_dropped_and_counted(tmp_path, caplog):
    csv = tmp_path / "d.csv"
    csv.write_text("x,label\n1.0,1\n,2\nfoo,3\n4.0,nan\n5.0,4\n")
    bounds = FeatureBounds(("x",), np.array([0.0]), np.array([10.0]), 0.0, 10.0)
    with caplog.at_level("WARNING"):
        ds = load_csv(str(csv), bounds, "label")
    assert ds.n == 2
    assert "3 row(s)" in caplog.text


def test_load_errors(tmp_path, simple_files):
    csv, bounds_path = simple_files
    bounds = load_bounds(str(bounds_path))
    with pytest.raises(DataError, match="label column"):
        load_csv(str(csv), bounds, "nope")
    with pytest.raises(DataError, match="no bounds"):
        partial = FeatureBounds(("x",), np.array([0.0]), np.array([10.0]), 0.0, 10.0)
        load_csv(str(csv), partial, "label")
    empty = tmp_path / "empty.csv"
    empty.write_text("x,y,label\n")
    with pytest.raises(DataError, match="no usable rows"):
        load_csv(str(empty), bounds, "label")
    with pytest.raises(DataError):
        load_csv(str(tmp_path / "missing.csv"), bounds, "label")


def test_csv_column_order_is_irrelevant(tmp_path, simple_files):
    csv1, bounds_path = simple_files
    bounds = load_bounds(str(bounds_path))
    csv2 = tmp_path / "shuffled.csv"
    csv2.write_text("label,y,x\n0,2.0,1.0\n5,4.0,3.0\n10,6.0,5.0\n")
    a = load_csv(str(csv1), bounds, "label")
    b = load_csv(str(csv2), bounds, "label")
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)


def test_bounds_json_round_trip_and_validation(tmp_path):
    bounds = FeatureBounds(("a", "b"), np.array([-1.0, 0.0]), np.array([1.0, 2.0]), -1.0, 1.0)
    path = tmp_path / "b.json"
    path.write_text(json.dumps(bounds.to_json_obj()))
    again = load_bounds(str(path))
    assert again.names == bounds.names
    assert np.array_equal(again.lower, bounds.lower)
    assert np.array_equal(again.upper, bounds.upper)
    assert (again.label_lower, again.label_upper) == (-1.0, 1.0)
    with pytest.raises(DataError):
        FeatureBounds(("a",), np.array([2.0]), np.array([1.0]), 0.0, 1.0)
    with pytest.raises(DataError):
        FeatureBounds(("a",), np.array([0.0]), np.array([1.0]), 1.0, 1.0)


def test_dataset_rejects_bad_labels():
    bounds = FeatureBounds(("x",), np.array([0.0]), np.array([1.0]), -1.0, 1.0)
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), np.array([0.0, 1.5]), bounds)
    with pytest.raises(DataError):
        Dataset(np.zeros((0, 1)), np.zeros(0), bounds)


# ------------------------------------------------------------- subsampling

def test_subsample_gamma_one_is_identity():
    assert np.array_equal(subsample_indices(17, 1.0, RngStream(0)), np.arange(17))


def test_subsample_cardinality_and_uniqueness():
    idx = subsample_indices(100, 0.1, RngStream(1))
    assert idx.size == 10
    assert np.unique(idx).size == 10
    assert (np.diff(idx) > 0).all()  # sorted


def test_subsample_empty_rejected():
    with pytest.raises(ValueError):
        subsample_indices(5, 0.1, RngStream(0))
    with pytest.raises(ValueError):
        subsample_indices(5, 0.0, RngStream(0))


def test_subsample_inclusion_is_uniform():
    n, gamma, reps = 20, 0.5, 10_000
    counts = np.zeros(n)
    base = RngStream(77)
    for i in range(reps):
        counts[subsample_indices(n, gamma, base.child(i))] += 1
    freqs = counts / reps
    assert np.abs(freqs - gamma).max() < 0.02


def test_subsample_rows_returns_consistent_dataset():
    ds = generate_synthetic("regression", 50, 3, seed=5)
    sub = subsample_rows(ds, 0.5, RngStream(8))
    assert sub.n == 25 and sub.m == 3
    assert sub.bounds is ds.bounds


# ---------------------------------------------------------------- synthetic

def test_synthetic_rejects_bad_sizes():
    with pytest.raises(ValueError):
        generate_synthetic("regression", 0, 3, seed=0)
    with pytest.raises(ValueError):
        generate_synthetic("classification", 10, 0, seed=0)
    with pytest.raises(ValueError):
        generate_synthetic("clustering", 10, 3, seed=0)


def test_synthetic_classification_labels_are_signs():
    ds = generate_synthetic("classification", 1000, 4, seed=3)
    assert set(np.unique(ds.labels)) == {-1.0, 1.0}


def test_synthetic_regression_labels_bounded():
    ds = generate_synthetic("regression", 1000, 4, seed=3)
    assert (np.abs(ds.labels) <= 1.0).all()


def test_synthetic_reproducible_bit_for_bit():
    a = generate_synthetic("regression", 200, 5, seed=11)
    b = generate_synthetic("regression", 200, 5, seed=11)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    c = generate_synthetic("regression", 200, 5, seed=12)
    assert not np.array_equal(a.labels, c.labels)
