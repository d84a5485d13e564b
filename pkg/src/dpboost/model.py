"""Tree and ensemble representation, prediction, JSON serialization.

The on-disk format is a single canonical JSON document (sorted keys, no
whitespace), so serialize → deserialize → serialize is byte-identical:

    {"version": 1, "eta": num, "g_star": num,
     "privacy": {"per_tree_eps": num, "gamma": num, "total_eps": num},
     "trees": [{"nodes": [{"f": int, "t": num, "l": int, "r": int} | {"v": num}]}]}

Node 0 is the root; child ids index into "nodes". Infinite budgets are
spelled as the string "inf" to keep the document strict JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .data import DataError

MODEL_VERSION = 1


class Tree:
    """Binary regression tree stored as flat parallel arrays.

    Routing convention: ``x[feature] <= threshold`` goes left, matching
    the right-closed bins used when histogramming feature values, so a
    sample equal to a threshold follows the bucket it was counted in.
    """

    def __init__(
        self,
        feature: np.ndarray,
        threshold: np.ndarray,
        left: np.ndarray,
        right: np.ndarray,
        value: np.ndarray,
        is_leaf: np.ndarray,
    ):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=float)
        self.is_leaf = np.asarray(is_leaf, dtype=bool)
        self._validate()

    def _validate(self) -> None:
        n = self.feature.size
        if n == 0:
            raise DataError("tree has no nodes")
        referenced: set[int] = set()
        for i in range(n):
            if self.is_leaf[i]:
                continue
            l, r = int(self.left[i]), int(self.right[i])
            for child in (l, r):
                if not 0 < child < n:
                    raise DataError(f"node {i}: child id {child} out of range")
                if child in referenced:
                    raise DataError(f"node {i}: child id {child} referenced twice")
                referenced.add(child)
            if self.feature[i] < 0:
                raise DataError(f"node {i}: negative feature index")
        if referenced != set(range(1, n)):
            orphans = sorted(set(range(1, n)) - referenced)
            raise DataError(f"unreferenced node id(s) {orphans}")

    @property
    def num_nodes(self) -> int:
        return self.feature.size

    @property
    def num_leaves(self) -> int:
        return int(self.is_leaf.sum())

    @property
    def max_feature(self) -> int:
        if self.is_leaf.all():
            return -1
        return int(self.feature[~self.is_leaf].max())

    def predict_row(self, x: np.ndarray) -> float:
        i = 0
        while not self.is_leaf[i]:
            i = int(self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i])
        return float(self.value[i])

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Route every row to its leaf; vectorized level-by-level descent."""
        n = features.shape[0]
        node = np.zeros(n, dtype=np.int32)
        rows = np.arange(n)
        while True:
            interior = ~self.is_leaf[node]
            if not interior.any():
                return self.value[node]
            idx = node[interior]
            go_left = (
                features[rows[interior], self.feature[idx]] <= self.threshold[idx]
            )
            node[interior] = np.where(go_left, self.left[idx], self.right[idx])

    def to_nodes(self) -> list[dict]:
        out: list[dict] = []
        for i in range(self.num_nodes):
            if self.is_leaf[i]:
                out.append({"v": float(self.value[i])})
            else:
                out.append(
                    {
                        "f": int(self.feature[i]),
                        "t": float(self.threshold[i]),
                        "l": int(self.left[i]),
                        "r": int(self.right[i]),
                    }
                )
        return out

    @classmethod
    def from_nodes(cls, nodes: list[dict], where: str = "tree") -> "Tree":
        if not isinstance(nodes, list) or not nodes:
            raise DataError(f"{where}: 'nodes' must be a non-empty list")
        n = len(nodes)
        feature = np.zeros(n, dtype=np.int32)
        threshold = np.zeros(n)
        left = np.full(n, -1, dtype=np.int32)
        right = np.full(n, -1, dtype=np.int32)
        value = np.zeros(n)
        is_leaf = np.zeros(n, dtype=bool)
        for i, node in enumerate(nodes):
            loc = f"{where}.nodes[{i}]"
            if not isinstance(node, dict):
                raise DataError(f"{loc}: expected an object")
            if "v" in node:
                if set(node) != {"v"}:
                    raise DataError(f"{loc}: leaf must have exactly the key 'v'")
                is_leaf[i] = True
                value[i] = _as_number(node["v"], loc + ".v")
            elif {"f", "t", "l", "r"} <= set(node):
                if set(node) != {"f", "t", "l", "r"}:
                    raise DataError(f"{loc}: unexpected keys {sorted(set(node) - {'f','t','l','r'})}")
                feature[i] = _as_int(node["f"], loc + ".f")
                threshold[i] = _as_number(node["t"], loc + ".t")
                left[i] = _as_int(node["l"], loc + ".l")
                right[i] = _as_int(node["r"], loc + ".r")
            else:
                raise DataError(f"{loc}: need either 'v' or all of 'f','t','l','r'")
        return cls(feature, threshold, left, right, value, is_leaf)


def _as_number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DataError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _as_int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise DataError(f"{where}: expected an integer, got {v!r}")
    return v


def _encode_eps(value: float) -> float | str:
    return "inf" if math.isinf(value) else float(value)


def _decode_eps(v, where: str) -> float:
    if v == "inf":
        return math.inf
    return _as_number(v, where)


@dataclass(frozen=True)
class PrivacyInfo:
    """Privacy metadata carried by a model: per-tree budget, subsample
    fraction, and the amplified total over all trees."""

    per_tree_eps: float
    gamma: float
    total_eps: float

    @property
    def non_private(self) -> bool:
        return math.isinf(self.total_eps)


class Ensemble:
    """Additive model: prediction = Σ_k η·tree_k(x), base score 0.

    Raw predictions are reported unclipped; the trainer clips to [−1, 1]
    only when computing gradients.
    """

    def __init__(self, trees: list[Tree], eta: float, g_star: float, privacy: PrivacyInfo):
        self.trees = list(trees)
        self.eta = float(eta)
        self.g_star = float(g_star)
        self.privacy = privacy

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    @property
    def num_features_required(self) -> int:
        """Smallest feature count the model can route (max index + 1)."""
        return max((t.max_feature for t in self.trees), default=-1) + 1

    def _check_width(self, m: int) -> None:
        if m < self.num_features_required:
            raise DataError(
                f"model references feature {self.num_features_required - 1} "
                f"but input has only {m} column(s)"
            )

    def predict_row(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise DataError(f"expected a 1-d row, got shape {x.shape}")
        self._check_width(x.size)
        return self.eta * math.fsum(t.predict_row(x) for t in self.trees)

    def predict(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim != 2:
            raise DataError(f"expected a 2-d matrix, got shape {features.shape}")
        self._check_width(features.shape[1])
        total = np.zeros(features.shape[0])
        for tree in self.trees:
            total += tree.predict(features)
        return self.eta * total

    def to_json(self) -> str:
        obj = {
            "version": MODEL_VERSION,
            "eta": self.eta,
            "g_star": self.g_star,
            "privacy": {
                "per_tree_eps": _encode_eps(self.privacy.per_tree_eps),
                "gamma": self.privacy.gamma,
                "total_eps": _encode_eps(self.privacy.total_eps),
            },
            "trees": [{"nodes": t.to_nodes()} for t in self.trees],
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)

    @classmethod
    def from_json(cls, text: str | bytes) -> "Ensemble":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"model: invalid JSON at line {exc.lineno} col {exc.colno}") from exc
        if not isinstance(obj, dict):
            raise DataError("model: top level must be an object")
        version = obj.get("version")
        if version != MODEL_VERSION:
            raise DataError(f"model: unsupported version {version!r} (expected {MODEL_VERSION})")
        for key in ("eta", "g_star", "privacy", "trees"):
            if key not in obj:
                raise DataError(f"model: missing key {key!r}")
        privacy_obj = obj["privacy"]
        if not isinstance(privacy_obj, dict):
            raise DataError("model.privacy: expected an object")
        privacy = PrivacyInfo(
            per_tree_eps=_decode_eps(privacy_obj.get("per_tree_eps"), "model.privacy.per_tree_eps"),
            gamma=_as_number(privacy_obj.get("gamma"), "model.privacy.gamma"),
            total_eps=_decode_eps(privacy_obj.get("total_eps"), "model.privacy.total_eps"),
        )
        trees_obj = obj["trees"]
        if not isinstance(trees_obj, list):
            raise DataError("model.trees: expected a list")
        g_star = _as_number(obj["g_star"], "model.g_star")
        if not g_star > 0:
            raise DataError(f"model.g_star: must be positive, got {g_star}")
        trees = []
        for i, entry in enumerate(trees_obj):
            if not isinstance(entry, dict) or "nodes" not in entry:
                raise DataError(f"model.trees[{i}]: expected an object with 'nodes'")
            tree = Tree.from_nodes(entry["nodes"], where=f"model.trees[{i}]")
            values = tree.value[tree.is_leaf]
            if values.size and float(np.abs(values).max()) > g_star:
                raise DataError(f"model.trees[{i}]: leaf magnitude exceeds g_star={g_star}")
            trees.append(tree)
        return cls(
            trees,
            eta=_as_number(obj["eta"], "model.eta"),
            g_star=g_star,
            privacy=privacy,
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "Ensemble":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise DataError(f"cannot read model {path}: {exc}") from exc
