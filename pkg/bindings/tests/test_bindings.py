"""Binding-vs-CLI equivalence on shared fixtures, plus wrapper behavior."""

import csv
import json
import math

import numpy as np
import pytest

dpboost_bindings = pytest.importorskip("dpboost_bindings")
from dpboost_bindings import BoundModel, fit, load, predict, save  # noqa: E402

from dpboost.cli import main as cli_main  # noqa: E402

PARAMS = {
    "trees": 3,
    "max_depth": 3,
    "subsample": 0.5,
    "min_child_samples": 5,
    "bins": 16,
    "candidates": 7,
    "epsilon_per_tree": 1.0,
}
SEED = 11


def run_cli(capsys, *argv):
    code = cli_main(list(argv))
    capsys.readouterr()
    return code


def read_csv_arrays(path, bounds_obj, label_column):
    """Parse a CSV the trivial way: float() per cell, columns in bounds order."""
    names = [f["name"] for f in bounds_obj["features"]]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = [header.index(n) for n in names]
        label_col = header.index(label_column)
        features, labels = [], []
        for record in reader:
            features.append([float(record[c]) for c in cols])
            labels.append(float(record[label_col]))
    return np.array(features), np.array(labels)


def synth_fixture(tmp_path, capsys, kind, rows, seed):
    data = tmp_path / f"{kind}{seed}.csv"
    bounds = tmp_path / f"{kind}{seed}.bounds.json"
    assert (
        run_cli(
            capsys, "synth", "--kind", kind, "--rows", str(rows), "--num-features", "3",
            "--seed", str(seed), "--data-out", str(data), "--bounds-out", str(bounds),
        )
        == 0
    )
    return data, bounds


def handmade_fixture(tmp_path):
    """Small CSV whose label bounds make normalization non-trivial."""
    data = tmp_path / "hand.csv"
    rows = ["a,b,label"]
    gen = np.random.Generator(np.random.Philox(4))
    for _ in range(60):
        a, b = gen.uniform(0, 10), gen.uniform(-5, 5)
        rows.append(f"{a!r},{b!r},{a - b + gen.uniform(-1, 1)!r}")
    data.write_text("\n".join(rows) + "\n")
    bounds = tmp_path / "hand.bounds.json"
    bounds.write_text(
        json.dumps(
            {
                "features": [
                    {"name": "a", "min": 0, "max": 10},
                    {"name": "b", "min": -5, "max": 5},
                ],
                "label": {"min": -20, "max": 20},
            }
        )
    )
    return data, bounds


def fixtures(tmp_path, capsys):
    return [
        (*synth_fixture(tmp_path, capsys, "regression", 300, 1), "label"),
        (*synth_fixture(tmp_path, capsys, "classification", 300, 2), "label"),
        (*handmade_fixture(tmp_path), "label"),
    ]


def test_fit_reproduces_cli_models_bit_for_bit(tmp_path, capsys):
    for i, (data, bounds_path, label_column) in enumerate(fixtures(tmp_path, capsys)):
        cli_model = tmp_path / f"cli{i}.json"
        argv = [
            "train", "--train-csv", str(data), "--bounds", str(bounds_path),
            "--label-column", label_column, "--model-out", str(cli_model), "--seed", str(SEED),
        ]
        for key, value in PARAMS.items():
            argv += [f"--{key.replace('_', '-')}", str(value)]
        assert run_cli(capsys, *argv) == 0

        bounds_obj = json.loads(bounds_path.read_text())
        features, labels = read_csv_arrays(data, bounds_obj, label_column)
        model = fit(features, labels, {**PARAMS, "bounds": bounds_obj}, seed=SEED)
        bound_model_path = tmp_path / f"bind{i}.json"
        save(model, str(bound_model_path))
        assert bound_model_path.read_bytes() == cli_model.read_bytes()


def test_predictions_match_cli_bit_for_bit(tmp_path, capsys):
    data, bounds_path, label_column = fixtures(tmp_path, capsys)[0]
    model_path = tmp_path / "m.json"
    argv = [
        "train", "--train-csv", str(data), "--bounds", str(bounds_path),
        "--model-out", str(model_path), "--seed", str(SEED),
    ]
    for key, value in PARAMS.items():
        argv += [f"--{key.replace('_', '-')}", str(value)]
    assert run_cli(capsys, *argv) == 0
    preds_path = tmp_path / "preds.txt"
    assert (
        run_cli(
            capsys, "predict", "--model", str(model_path), "--test-csv", str(data),
            "--bounds", str(bounds_path), "--predictions-out", str(preds_path),
        )
        == 0
    )
    cli_preds = np.array([float(line) for line in preds_path.read_text().splitlines()])

    bounds_obj = json.loads(bounds_path.read_text())
    features, _ = read_csv_arrays(data, bounds_obj, label_column)
    model = load(str(model_path))  # CLI-trained model through the boundary
    assert np.array_equal(predict(model, features), cli_preds)


def test_save_load_save_byte_identical(tmp_path, capsys):
    data, bounds_path, label_column = fixtures(tmp_path, capsys)[2]
    bounds_obj = json.loads(bounds_path.read_text())
    features, labels = read_csv_arrays(data, bounds_obj, label_column)
    model = fit(features, labels, {**PARAMS, "bounds": bounds_obj}, seed=3)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save(model, str(p1))
    save(load(str(p1)), str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_zero_trees_predicts_zero():
    features = np.random.default_rng(0).uniform(-1, 1, size=(40, 2))
    labels = np.zeros(40)
    bounds_obj = {
        "features": [
            {"name": "x", "min": -1, "max": 1},
            {"name": "y", "min": -1, "max": 1},
        ],
        "label": {"min": -1, "max": 1},
    }
    model = fit(features, labels, {**PARAMS, "trees": 0, "bounds": bounds_obj}, seed=0)
    assert model.num_trees == 0
    assert np.array_equal(model.predict(features), np.zeros(40))


def test_core_validation_surfaces_through_binding():
    bounds_obj = {
        "features": [{"name": "x", "min": -1, "max": 1}],
        "label": {"min": -1, "max": 1},
    }
    with pytest.raises(ValueError, match="subsample"):
        fit(np.zeros((10, 1)), np.zeros(10), {**PARAMS, "subsample": 0, "bounds": bounds_obj}, 0)
    with pytest.raises(ValueError, match="bounds"):
        fit(np.zeros((10, 1)), np.zeros(10), dict(PARAMS), 0)
    gen = np.random.default_rng(1)
    features = gen.uniform(-1, 1, size=(80, 1))
    labels = features[:, 0]
    model = fit(features, labels, {**PARAMS, "subsample": 1.0, "min_child_samples": 2,
                "epsilon_per_tree": "inf", "bounds": bounds_obj}, 0)
    assert model.num_trees == PARAMS["trees"]
    with pytest.raises(ValueError):
        model.predict(np.zeros((3, 0)))  # model routes on feature 0


def test_privacy_report_exposed(tmp_path, capsys):
    data, bounds_path, label_column = fixtures(tmp_path, capsys)[0]
    bounds_obj = json.loads(bounds_path.read_text())
    features, labels = read_csv_arrays(data, bounds_obj, label_column)
    model = fit(
        features, labels,
        {k: v for k, v in PARAMS.items() if k != "epsilon_per_tree"}
        | {"trees": 20, "subsample": 0.1, "total_epsilon": 1.0, "bounds": bounds_obj},
        seed=0,
    )
    report = model.privacy
    assert report["total_eps"] == pytest.approx(1.0, abs=1e-9)
    assert report["per_tree_eps"] == pytest.approx(0.41390338136846444, abs=1e-12)
    assert model.params["trees"] == 20
    # loaded models expose the stored summary
    path = tmp_path / "m.json"
    save(model, str(path))
    loaded = load(str(path))
    assert loaded.params is None
    assert loaded.privacy["total_eps"] == pytest.approx(1.0, abs=1e-9)
    assert loaded.privacy["non_private"] is False
    assert not math.isinf(loaded.privacy["per_tree_eps"])
