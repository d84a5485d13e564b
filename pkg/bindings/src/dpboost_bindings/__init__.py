"""Data-science wrapper over the dpboost core.

Fit and predict on in-memory arrays without touching CSV files, read
back the privacy report, and exchange models with the CLI through the
shared JSON format. Everything numeric is delegated to the core: this
package holds no training or inference logic of its own, so predictions
agree with the CLI bit for bit.

Parameter mappings use the same flat keys as the CLI config, plus
``"bounds"``, which takes the bounds JSON object inline::

    params = {
        "trees": 20, "subsample": 0.1, "total_epsilon": 1.0,
        "bounds": {"features": [{"name": "x", "min": 0, "max": 1}],
                   "label": {"min": 0, "max": 10}},
    }
    model = fit(features, labels, params, seed=0)

Feature columns must follow the order of the bounds entries (the same
order the CLI uses regardless of CSV column layout).
"""

from __future__ import annotations

import numpy as np

from dpboost import Dataset, Ensemble, FeatureBounds
from dpboost import train as _core_train
from dpboost.cli import params_from_config

__version__ = "0.1.0"

__all__ = ["BoundModel", "fit", "predict", "save", "load"]


class BoundModel:
    """Handle to a trained ensemble.

    ``params`` echoes the mapping used at fit time (None for models
    loaded from disk); ``privacy`` is always available.
    """

    def __init__(self, ensemble: Ensemble, params: dict | None = None, report=None):
        self._ensemble = ensemble
        self._params = dict(params) if params is not None else None
        self._report = report

    @property
    def num_trees(self) -> int:
        return self._ensemble.num_trees

    @property
    def params(self) -> dict | None:
        return dict(self._params) if self._params is not None else None

    @property
    def privacy(self) -> dict:
        """Privacy report as a plain mapping (full after fit, the stored
        summary after load)."""
        if self._report is not None:
            return self._report.to_json_obj()
        info = self._ensemble.privacy
        enc = lambda v: "inf" if np.isinf(v) else v  # noqa: E731
        return {
            "per_tree_eps": enc(info.per_tree_eps),
            "gamma": info.gamma,
            "total_eps": enc(info.total_eps),
            "non_private": info.non_private,
        }

    def predict(self, features) -> np.ndarray:
        """Raw ensemble scores, identical to the CLI's predict output."""
        features = np.array(features, dtype=float, copy=True)
        return self._ensemble.predict(features)

    def save(self, path: str) -> None:
        self._ensemble.save(path)

    @classmethod
    def load(cls, path: str) -> "BoundModel":
        return cls(Ensemble.load(path))


def fit(features, labels, params: dict, seed: int) -> BoundModel:
    """Train on in-memory arrays with the core trainer.

    ``labels`` are raw (original-scale) values; they are clamped and
    normalized under the public label bounds exactly as the CSV loader
    does, so fitting on arrays parsed from a CSV reproduces the CLI
    model byte for byte.
    """
    if "bounds" not in params:
        raise ValueError("bounds: required but not set (inline bounds object)")
    bounds = FeatureBounds.from_json_obj(params["bounds"])
    features = np.array(features, dtype=float, copy=True)
    labels = np.array(labels, dtype=float, copy=True)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-d, got shape {features.shape}")
    if labels.shape != (features.shape[0],):
        raise ValueError("labels must be 1-d with one entry per feature row")
    train_params = params_from_config({k: v for k, v in params.items() if k != "bounds"})
    dataset = Dataset(
        bounds.clamp_features(features), bounds.normalize_labels(labels), bounds
    )
    ensemble, report = _core_train(dataset, train_params, seed)
    return BoundModel(ensemble, params=params, report=report)


def predict(model: BoundModel, features) -> np.ndarray:
    return model.predict(features)


def save(model: BoundModel, path: str) -> None:
    model.save(path)


def load(path: str) -> BoundModel:
    return BoundModel.load(path)
