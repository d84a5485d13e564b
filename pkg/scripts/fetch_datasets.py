#!/usr/bin/env python3
"""Download and prepare the benchmark datasets (needs network access).

Produces, under --data-dir (default: <repo>/data):

  abalone.csv + abalone.bounds.json        label column: rings
  adult.train.csv + adult.test.csv
      + adult.bounds.json                  label column: income (+-1)
  covtype100k.csv + covtype.bounds.json    label column: target (+-1)

Preprocessing is deterministic: categorical features are one-hot
encoded against the sorted union of categories seen in the files, rows
with missing cells are dropped, and the covtype subsample is drawn with
a fixed seed. Feature bounds are fixed public constants (generous
round numbers), not statistics of the data, so they can be treated as
DP-released values.
"""

import argparse
import csv
import gzip
import io
import json
import sys
import urllib.request
from pathlib import Path

import numpy as np

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"

ABALONE_URL = f"{UCI}/abalone/abalone.data"
ADULT_TRAIN_URL = f"{UCI}/adult/adult.data"
ADULT_TEST_URL = f"{UCI}/adult/adult.test"
COVTYPE_URL = f"{UCI}/covtype/covtype.data.gz"

COVTYPE_SUBSAMPLE = 100_000
COVTYPE_SEED = 20240101  # class 2 vs rest; fixed so the file is reproducible


def fetch(url: str) -> bytes:
    print(f"fetching {url} ...", file=sys.stderr)
    with urllib.request.urlopen(url, timeout=120) as resp:
        return resp.read()


def write_bounds(path: Path, feature_bounds: list[tuple[str, float, float]], label_lo, label_hi):
    obj = {
        "features": [{"name": n, "min": lo, "max": hi} for n, lo, hi in feature_bounds],
        "label": {"min": label_lo, "max": label_hi},
    }
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ----------------------------------------------------------------- abalone

def prepare_abalone(data_dir: Path) -> None:
    raw = fetch(ABALONE_URL).decode().strip().splitlines()
    numeric_names = [
        "length",
        "diameter",
        "height",
        "whole_weight",
        "shucked_weight",
        "viscera_weight",
        "shell_weight",
    ]
    header = ["sex_M", "sex_F", "sex_I"] + numeric_names + ["rings"]
    rows = []
    for line in raw:
        parts = line.split(",")
        if len(parts) != 9:
            continue
        sex = parts[0].strip()
        onehot = [1.0 if sex == c else 0.0 for c in ("M", "F", "I")]
        rows.append(onehot + [float(v) for v in parts[1:8]] + [float(parts[8])])
    write_csv(data_dir / "abalone.csv", header, rows)
    bounds = [(n, 0.0, 1.0) for n in ("sex_M", "sex_F", "sex_I")] + [
        ("length", 0.0, 1.0),
        ("diameter", 0.0, 1.0),
        ("height", 0.0, 1.5),
        ("whole_weight", 0.0, 3.0),
        ("shucked_weight", 0.0, 1.5),
        ("viscera_weight", 0.0, 1.0),
        ("shell_weight", 0.0, 1.5),
    ]
    write_bounds(data_dir / "abalone.bounds.json", bounds, 1.0, 29.0)
    print(f"abalone: {len(rows)} rows", file=sys.stderr)


# ------------------------------------------------------------------- adult

ADULT_COLUMNS = [
    ("age", "num"),
    ("workclass", "cat"),
    ("fnlwgt", "num"),
    ("education", "cat"),
    ("education_num", "num"),
    ("marital_status", "cat"),
    ("occupation", "cat"),
    ("relationship", "cat"),
    ("race", "cat"),
    ("sex", "cat"),
    ("capital_gain", "num"),
    ("capital_loss", "num"),
    ("hours_per_week", "num"),
    ("native_country", "cat"),
]

ADULT_NUMERIC_BOUNDS = {
    "age": (17.0, 90.0),
    "fnlwgt": (0.0, 1_600_000.0),
    "education_num": (1.0, 16.0),
    "capital_gain": (0.0, 100_000.0),
    "capital_loss": (0.0, 4_500.0),
    "hours_per_week": (1.0, 99.0),
}


def _sanitize(token: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in token)


def _parse_adult(blob: bytes) -> list[list[str]]:
    rows = []
    for line in blob.decode().splitlines():
        line = line.strip().rstrip(".")
        if not line or line.startswith("|"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 15 or "?" in parts:
            continue
        rows.append(parts)
    return rows


def prepare_adult(data_dir: Path) -> None:
    splits = {
        "train": _parse_adult(fetch(ADULT_TRAIN_URL)),
        "test": _parse_adult(fetch(ADULT_TEST_URL)),
    }
    # one-hot categories from the sorted union across both splits
    categories: dict[str, list[str]] = {}
    for j, (name, kind) in enumerate(ADULT_COLUMNS):
        if kind == "cat":
            seen = {row[j] for rows in splits.values() for row in rows}
            categories[name] = sorted(seen)

    header: list[str] = []
    bounds: list[tuple[str, float, float]] = []
    for name, kind in ADULT_COLUMNS:
        if kind == "num":
            header.append(name)
            lo, hi = ADULT_NUMERIC_BOUNDS[name]
            bounds.append((name, lo, hi))
        else:
            for cat in categories[name]:
                col = f"{name}_{_sanitize(cat)}"
                header.append(col)
                bounds.append((col, 0.0, 1.0))
    header.append("income")

    for split, rows in splits.items():
        encoded = []
        for row in rows:
            out: list[float] = []
            for j, (name, kind) in enumerate(ADULT_COLUMNS):
                if kind == "num":
                    out.append(float(row[j]))
                else:
                    out.extend(1.0 if row[j] == cat else 0.0 for cat in categories[name])
            out.append(1.0 if row[14] == ">50K" else -1.0)
            encoded.append(out)
        write_csv(data_dir / f"adult.{split}.csv", header, encoded)
        print(f"adult {split}: {len(encoded)} rows, {len(header) - 1} features", file=sys.stderr)
    write_bounds(data_dir / "adult.bounds.json", bounds, -1.0, 1.0)


# ----------------------------------------------------------------- covtype

COVTYPE_NUMERIC = [
    ("elevation", 1800.0, 4000.0),
    ("aspect", 0.0, 360.0),
    ("slope", 0.0, 70.0),
    ("hdist_hydrology", 0.0, 1500.0),
    ("vdist_hydrology", -200.0, 700.0),
    ("hdist_roadways", 0.0, 8000.0),
    ("hillshade_9am", 0.0, 254.0),
    ("hillshade_noon", 0.0, 254.0),
    ("hillshade_3pm", 0.0, 254.0),
    ("hdist_fire_points", 0.0, 8000.0),
]


def prepare_covtype(data_dir: Path) -> None:
    blob = gzip.decompress(fetch(COVTYPE_URL))
    matrix = np.loadtxt(io.BytesIO(blob), delimiter=",")
    n = matrix.shape[0]
    print(f"covtype: {n} rows total", file=sys.stderr)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(COVTYPE_SEED)))
    pick = np.sort(rng.choice(n, size=COVTYPE_SUBSAMPLE, replace=False))
    sub = matrix[pick]
    features = sub[:, :54]
    labels = np.where(sub[:, 54] == 2.0, 1.0, -1.0)

    header = [name for name, _, _ in COVTYPE_NUMERIC]
    bounds = list(COVTYPE_NUMERIC)
    for i in range(4):
        header.append(f"wilderness_{i}")
        bounds.append((f"wilderness_{i}", 0.0, 1.0))
    for i in range(40):
        header.append(f"soil_{i}")
        bounds.append((f"soil_{i}", 0.0, 1.0))
    header.append("target")

    rows = np.column_stack([features, labels])
    write_csv(data_dir / "covtype100k.csv", header, rows.tolist())
    write_bounds(data_dir / "covtype.bounds.json", bounds, -1.0, 1.0)
    print(f"covtype subsample: {COVTYPE_SUBSAMPLE} rows", file=sys.stderr)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--data-dir", default=str(Path(__file__).resolve().parent.parent / "data")
    )
    parser.add_argument(
        "--only", choices=("abalone", "adult", "covtype"), help="prepare a single dataset"
    )
    args = parser.parse_args()
    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    steps = {"abalone": prepare_abalone, "adult": prepare_adult, "covtype": prepare_covtype}
    for name, step in steps.items():
        if args.only and args.only != name:
            continue
        step(data_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
