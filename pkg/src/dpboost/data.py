"""Dataset ingestion and generation.

Feature values are clamped into public per-feature bounds at load time
and labels are mapped linearly onto [−1, 1]. The bounds are part of the
privacy contract: they are released constants, never recomputed from
the data, and they cap the sensitivity of every downstream mechanism.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream

logger = logging.getLogger(__name__)


class DataError(ValueError):
    """Unusable input data or files (CLI exit code 2)."""


@dataclass(frozen=True)
class FeatureBounds:
    """Public (lower, upper) range per feature, plus the label range.

    Treated as DP-released constants. Feature order everywhere in the
    package follows ``names``.
    """

    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray
    label_lower: float
    label_upper: float

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(self.names) != lower.size or lower.size != upper.size:
            raise DataError("bounds: names, lower and upper must have equal length")
        if lower.size == 0:
            raise DataError("bounds: at least one feature is required")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise DataError("bounds: feature bounds must be finite")
        if (lower > upper).any():
            bad = self.names[int(np.argmax(lower > upper))]
            raise DataError(f"bounds: lower > upper for feature {bad!r}")
        if not (math.isfinite(self.label_lower) and math.isfinite(self.label_upper)):
            raise DataError("bounds: label bounds must be finite")
        if not self.label_lower < self.label_upper:
            raise DataError("bounds: label lower must be strictly below label upper")
        lower.flags.writeable = False
        upper.flags.writeable = False

    @property
    def num_features(self) -> int:
        return len(self.names)

    def clamp_features(self, features: np.ndarray) -> np.ndarray:
        return np.clip(features, self.lower, self.upper)

    def normalize_labels(self, raw: np.ndarray) -> np.ndarray:
        """Clamp raw labels into the public range, then map them onto [−1, 1]."""
        clamped = np.clip(np.asarray(raw, dtype=float), self.label_lower, self.label_upper)
        span = self.label_upper - self.label_lower
        return 2.0 * (clamped - self.label_lower) / span - 1.0

    def denormalize_labels(self, normalized: np.ndarray) -> np.ndarray:
        span = self.label_upper - self.label_lower
        return (np.asarray(normalized, dtype=float) + 1.0) / 2.0 * span + self.label_lower

    def to_json_obj(self) -> dict:
        return {
            "features": [
                {"name": name, "min": float(lo), "max": float(hi)}
                for name, lo, hi in zip(self.names, self.lower, self.upper)
            ],
            "label": {"min": self.label_lower, "max": self.label_upper},
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FeatureBounds":
        try:
            features = obj["features"]
            names = tuple(str(f["name"]) for f in features)
            lower = np.array([float(f["min"]) for f in features])
            upper = np.array([float(f["max"]) for f in features])
            label = obj["label"]
            return cls(names, lower, upper, float(label["min"]), float(label["max"]))
        except (KeyError, TypeError) as exc:
            raise DataError(f"bounds: malformed bounds object ({exc})") from exc


def load_bounds(path: str) -> FeatureBounds:
    """Read a bounds JSON file: {"features": [{name,min,max},...], "label": {min,max}}."""
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise DataError(f"bounds: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"bounds: {path} is not valid JSON: {exc}") from exc
    return FeatureBounds.from_json_obj(obj)


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix with labels normalized to [−1, 1].

    Immutable after construction; the arrays are marked read-only so a
    dataset can be shared freely.
    """

    features: np.ndarray
    labels: np.ndarray
    bounds: FeatureBounds

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=float)
        labels = np.ascontiguousarray(self.labels, dtype=float)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2:
            raise DataError(f"features must be 2-d, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise DataError("labels must be 1-d with one entry per row")
        if features.shape[0] == 0:
            raise DataError("dataset is empty")
        if features.shape[1] != self.bounds.num_features:
            raise DataError(
                f"feature count {features.shape[1]} does not match bounds "
                f"({self.bounds.num_features})"
            )
        if not np.isfinite(features).all():
            raise DataError("features contain non-finite values")
        if not np.isfinite(labels).all():
            raise DataError("labels contain non-finite values")
        if (np.abs(labels) > 1.0).any():
            raise DataError("labels must lie in [-1, 1] after normalization")
        features.flags.writeable = False
        labels.flags.writeable = False

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]


def load_csv(path: str, bounds: FeatureBounds, label_column: str) -> Dataset:
    """Load a headered numeric CSV under the given public bounds.

    Feature columns are matched to bounds by name and clamped into their
    declared ranges; labels are clamped and mapped onto [−1, 1]. Rows
    with missing or non-numeric cells are dropped (sparse handling is
    out of scope) and the drop count is logged.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: unknown label column {label_column!r}")
        label_idx = header.index(label_column)
        csv_features = [h for h in header if h != label_column]
        missing = [name for name in csv_features if name not in bounds.names]
        if missing:
            raise DataError(f"{path}: no bounds declared for feature(s) {missing}")
        absent = [name for name in bounds.names if name not in csv_features]
        if absent:
            raise DataError(f"{path}: bounds declare feature(s) {absent} not in the file")
        # Columns are read in bounds order so the matrix layout is
        # independent of the CSV column order.
        col_of = {name: header.index(name) for name in bounds.names}
        columns = [col_of[name] for name in bounds.names]

        rows: list[list[float]] = []
        raw_labels: list[float] = []
        rejected = 0
        for record in reader:
            if len(record) != len(header):
                rejected += 1
                continue
            try:
                values = [float(record[c]) for c in columns]
                label = float(record[label_idx])
            except ValueError:
                rejected += 1
                continue
            if not all(math.isfinite(v) for v in values) or not math.isfinite(label):
                rejected += 1
                continue
            rows.append(values)
            raw_labels.append(label)

    if rejected:
        logger.warning("%s: dropped %d row(s) with missing or non-numeric cells", path, rejected)
    if not rows:
        raise DataError(f"{path}: no usable rows")

    features = bounds.clamp_features(np.asarray(rows, dtype=float))
    labels = bounds.normalize_labels(np.asarray(raw_labels, dtype=float))
    return Dataset(features, labels, bounds)


def load_feature_matrix(path: str, bounds: FeatureBounds, label_column: str | None = None) -> np.ndarray:
    """Load only the feature columns of a CSV (for prediction).

    ``label_column`` names a column to ignore if present; the file may
    also omit it entirely. Same cleaning rules as :func:`load_csv`.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        known = set(bounds.names) | ({label_column} if label_column else set())
        unknown = [name for name in header if name not in known]
        if unknown:
            raise DataError(f"{path}: no bounds declared for feature(s) {unknown}")
        absent = [name for name in bounds.names if name not in header]
        if absent:
            raise DataError(f"{path}: bounds declare feature(s) {absent} not in the file")
        columns = [header.index(name) for name in bounds.names]

        rows: list[list[float]] = []
        rejected = 0
        for record in reader:
            if len(record) != len(header):
                rejected += 1
                continue
            try:
                values = [float(record[c]) for c in columns]
            except ValueError:
                rejected += 1
                continue
            if not all(math.isfinite(v) for v in values):
                rejected += 1
                continue
            rows.append(values)
    if rejected:
        logger.warning("%s: dropped %d row(s) with missing or non-numeric cells", path, rejected)
    if not rows:
        raise DataError(f"{path}: no usable rows")
    return bounds.clamp_features(np.asarray(rows, dtype=float))


def subsample_indices(n: int, gamma: float, rng: RngStream) -> np.ndarray:
    """floor(γ·n) distinct row indices, uniform without replacement, sorted."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    k = int(math.floor(gamma * n))
    if k <= 0:
        raise ValueError(f"subsample of {n} rows at gamma={gamma} is empty")
    if k == n:
        return np.arange(n)
    return np.sort(rng.generator.choice(n, size=k, replace=False))


def subsample_rows(dataset: Dataset, gamma: float, rng: RngStream) -> Dataset:
    """Dataset restricted to a uniform γ-fraction of its rows."""
    idx = subsample_indices(dataset.n, gamma, rng)
    return Dataset(dataset.features[idx], dataset.labels[idx], dataset.bounds)


def generate_synthetic(kind: str, n: int, m: int, seed: int) -> Dataset:
    """Fixed linear-teacher synthetic data for benchmarks and tests.

    ``classification``: labels are the sign of a random linear functional
    of uniform features, plus a little Gaussian slack, in {−1, +1}.
    ``regression``: the same functional with Gaussian noise, clipped to
    [−1, 1]. Bounds are the generating ranges and hence public.
    Reproducible: identical (kind, n, m, seed) give identical bits.
    """
    if kind not in ("classification", "regression"):
        raise ValueError(f"kind must be 'classification' or 'regression', got {kind!r}")
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    kind_tag = 0 if kind == "classification" else 1
    gen = RngStream(seed, (kind_tag,)).generator
    features = gen.uniform(-1.0, 1.0, size=(n, m))
    teacher = gen.uniform(-1.0, 1.0, size=m)
    signal = features @ teacher / np.sum(np.abs(teacher))  # stays in [-1, 1]
    noise = 0.1 * gen.standard_normal(n)
    if kind == "classification":
        labels = np.where(signal + noise >= 0.0, 1.0, -1.0)
    else:
        labels = np.clip(signal + noise, -1.0, 1.0)
    names = tuple(f"f{j}" for j in range(m))
    bounds = FeatureBounds(names, -np.ones(m), np.ones(m), -1.0, 1.0)
    return Dataset(features, labels, bounds)
