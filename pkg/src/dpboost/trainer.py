"""The private boosting loop.

Each boosting round trains one tree on a uniform row subsample, in
three privatized phases that split the per-tree budget ε:

  1. sketch: one noisy hessian histogram per feature (ε·f_sketch, split
     evenly across the m features; bins are disjoint so a histogram
     costs its whole allocation once);
  2. splits: one exponential-mechanism selection per node, where all
     nodes at a depth act on disjoint rows and share one parallel
     budget of ε·f_split/max_depth per level;
  3. leaves: one noisy-average release per leaf (ε·f_leaf, all leaves
     parallel).

Before a tree is built, samples whose gradient magnitude exceeds the
universal constant g* are filtered out, which is what makes the
sensitivities above exact. Running predictions are clipped to [−1, 1]
before differentiating so that g* = 1 really is universal for the
squared loss. Across trees, subsampling amplifies each tree's ε and the
amplified costs add up sequentially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureBounds, subsample_indices
from .model import Ensemble, PrivacyInfo, Tree
from .privacy import (
    PrivacyAccountant,
    check_epsilon,
    laplace_sample,
    laplace_scale,
    select_exponential,
    subsampled_epsilon,
)
from .rng import RngStream
from .sketch import build_dp_histogram, propose_splits

# Leaf release strategies. The noisy average perturbs only the gradient
# sum and divides by the exact count; the two Laplace modes noise the
# finished value, calibrated either to the min-child bound
# 2g*/(N_min+1+λ) or to the loose worst case g*/(1+λ).
LEAF_NOISY_AVERAGE = "noisy-average"
LEAF_LAPLACE_MIN_CHILD = "laplace-min-child"
LEAF_LAPLACE_WORST_CASE = "laplace-worst-case"
LEAF_MODES = (LEAF_NOISY_AVERAGE, LEAF_LAPLACE_MIN_CHILD, LEAF_LAPLACE_WORST_CASE)

# rng sub-path tags under each per-tree stream
_RNG_SUBSAMPLE = 0
_RNG_SKETCH = 1
_RNG_SPLIT = 2
_RNG_LEAF = 3

_FRACTION_TOL = 1e-12


@dataclass(frozen=True)
class TrainParams:
    """Boosting and privacy hyperparameters.

    ``epsilon_per_tree`` is the budget of a single tree before
    subsampling amplification; the three fractions decide how it is
    divided between the sketch, leaf, and split phases and must sum
    to 1.
    """

    trees: int = 20
    max_depth: int = 6
    reg_lambda: float = 0.1
    learning_rate: float = 0.3
    subsample: float = 0.1
    min_child_samples: int = 50
    bins: int = 32
    candidates: int = 31
    epsilon_per_tree: float = math.inf
    sketch_fraction: float = 1.0 / 3.0
    leaf_fraction: float = 1.0 / 3.0
    split_fraction: float = 1.0 / 3.0
    g_star: float = 1.0
    leaf_mode: str = LEAF_NOISY_AVERAGE

    def __post_init__(self):
        if self.trees < 0:
            raise ValueError(f"trees: must be >= 0, got {self.trees}")
        if self.max_depth < 0:
            raise ValueError(f"max_depth: must be >= 0, got {self.max_depth}")
        if self.reg_lambda < 0:
            raise ValueError(f"reg_lambda: must be >= 0, got {self.reg_lambda}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate: must be in (0, 1], got {self.learning_rate}")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError(f"subsample: must be in (0, 1], got {self.subsample}")
        if self.min_child_samples < 1:
            raise ValueError(f"min_child_samples: must be >= 1, got {self.min_child_samples}")
        if self.bins < 2:
            raise ValueError(f"bins: must be >= 2, got {self.bins}")
        if self.candidates < 1:
            raise ValueError(f"candidates: must be >= 1, got {self.candidates}")
        try:
            check_epsilon(self.epsilon_per_tree)
        except ValueError as exc:
            raise ValueError(f"epsilon_per_tree: {exc}") from exc
        fractions = (self.sketch_fraction, self.leaf_fraction, self.split_fraction)
        if any(f <= 0 for f in fractions):
            raise ValueError(f"budget fractions must all be positive, got {fractions}")
        if abs(math.fsum(fractions) - 1.0) > _FRACTION_TOL:
            raise ValueError(f"budget fractions must sum to 1, got {fractions}")
        if not self.g_star > 0:
            raise ValueError(f"g_star: must be positive, got {self.g_star}")
        if self.leaf_mode not in LEAF_MODES:
            raise ValueError(f"leaf_mode: must be one of {LEAF_MODES}, got {self.leaf_mode!r}")


@dataclass(frozen=True)
class PrivacyReport:
    """What the training run cost.

    ``per_tree_ledger_totals`` are the audited accountant totals, one
    per tree; each must equal ``per_tree_eps``. ``total_eps`` is the sum
    of the subsampling-amplified per-tree costs.
    """

    per_tree_eps: float
    gamma: float
    amplified_per_tree: float
    total_eps: float
    trees: int
    non_private: bool
    per_tree_ledger_totals: tuple[float, ...]

    def to_json_obj(self) -> dict:
        enc = lambda v: "inf" if math.isinf(v) else v  # noqa: E731
        return {
            "per_tree_eps": enc(self.per_tree_eps),
            "gamma": self.gamma,
            "amplified_per_tree_eps": enc(self.amplified_per_tree),
            "total_eps": enc(self.total_eps),
            "trees": self.trees,
            "non_private": self.non_private,
        }


def squared_loss_gradients(pred, label):
    """(g, h) of the loss ½(pred − label)² w.r.t. pred: g = pred − label, h = 1."""
    g = np.asarray(pred, dtype=float) - np.asarray(label, dtype=float)
    if g.ndim == 0:
        return float(g), 1.0
    return g, np.ones_like(g)


def gdf_filter(gradients: np.ndarray, g_star: float) -> np.ndarray:
    """Indices of samples with |g| <= g_star (boundary kept).

    Filtered samples take no part in the current tree: no histogram
    mass, no gains, no leaf sums.
    """
    if not g_star > 0:
        raise ValueError(f"g_star must be positive, got {g_star}")
    return np.flatnonzero(np.abs(np.asarray(gradients, dtype=float)) <= g_star)


def split_gain(g_left: float, n_left: int, g_right: float, n_right: int, reg_lambda: float) -> float:
    """Gain of a split: G_L²/(n_L + λ) + G_R²/(n_R + λ); hessians are counts."""
    return g_left**2 / (n_left + reg_lambda) + g_right**2 / (n_right + reg_lambda)


def _gains_from_buckets(
    buckets_by_feature: list[np.ndarray],
    gradients: np.ndarray,
    candidate_sets: list[np.ndarray],
    reg_lambda: float,
    min_child_samples: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Admissible (feature, threshold, gain) triples, feature-major order.

    ``buckets_by_feature[k][i]`` is the candidate bucket of row i along
    feature k: bucket v holds rows with thr[v-1] < x <= thr[v]. Left
    statistics are prefix sums over the bucket histograms, so one pass
    over the node's rows prices every candidate.
    """
    n = gradients.size
    total_g = float(np.sum(gradients))
    feat_out: list[np.ndarray] = []
    thr_out: list[np.ndarray] = []
    gain_out: list[np.ndarray] = []
    for k, thresholds in enumerate(candidate_sets):
        num_thr = thresholds.size
        if num_thr == 0:
            continue
        b = buckets_by_feature[k]
        grad_hist = np.bincount(b, weights=gradients, minlength=num_thr + 1)
        count_hist = np.bincount(b, minlength=num_thr + 1)
        g_left = np.cumsum(grad_hist)[:-1]
        n_left = np.cumsum(count_hist)[:-1]
        g_right = total_g - g_left
        n_right = n - n_left
        ok = (n_left >= min_child_samples) & (n_right >= min_child_samples)
        if not ok.any():
            continue
        gains = g_left[ok] ** 2 / (n_left[ok] + reg_lambda) + g_right[ok] ** 2 / (
            n_right[ok] + reg_lambda
        )
        feat_out.append(np.full(int(ok.sum()), k, dtype=np.int32))
        thr_out.append(thresholds[ok])
        gain_out.append(gains)
    if not feat_out:
        return (np.empty(0, dtype=np.int32), np.empty(0), np.empty(0))
    return (np.concatenate(feat_out), np.concatenate(thr_out), np.concatenate(gain_out))


def enumerate_candidate_gains(
    node_features: np.ndarray,
    node_gradients: np.ndarray,
    candidate_sets: list[np.ndarray],
    reg_lambda: float,
    min_child_samples: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Score every admissible (feature, threshold) split of one node.

    Returns parallel arrays (features, thresholds, gains); empty arrays
    mean no admissible split and the node becomes a leaf.
    """
    node_features = np.asarray(node_features, dtype=float)
    node_gradients = np.asarray(node_gradients, dtype=float)
    if node_features.ndim != 2 or node_features.shape[0] != node_gradients.size:
        raise ValueError("node_features must be (rows, features) matching gradients")
    buckets = [
        np.searchsorted(thr, node_features[:, k], side="left")
        for k, thr in enumerate(candidate_sets)
    ]
    return _gains_from_buckets(
        buckets, node_gradients, candidate_sets, reg_lambda, min_child_samples
    )


def select_split_dp(
    features: np.ndarray,
    thresholds: np.ndarray,
    gains: np.ndarray,
    epsilon: float,
    g_star: float,
    rng: RngStream,
) -> tuple[int, float] | None:
    """Exponential-mechanism choice among candidate splits, or None.

    The gain of a split moves by at most 3g*² when one filtered sample
    changes, so that is the utility sensitivity.
    """
    if gains.size == 0:
        return None
    idx = select_exponential(gains, epsilon, 3.0 * g_star**2, rng)
    return int(features[idx]), float(thresholds[idx])


def noisy_leaf_value(
    gradients: np.ndarray,
    epsilon: float,
    reg_lambda: float,
    g_star: float,
    rng: RngStream,
    mode: str = LEAF_NOISY_AVERAGE,
    min_child_samples: int | None = None,
) -> float:
    """Private leaf value: a perturbed regularized mean gradient, negated.

    noisy-average noises only the gradient sum (sensitivity 2g* under
    GDF) and divides by the exact count, which is never zero for a real
    leaf. The Laplace modes noise the exact value with scale ΔV/ε where
    ΔV = 2g*/(N_min+1+λ) (min-child) or g*/(1+λ) (worst case). All modes
    clip the magnitude to g*.
    """
    gradients = np.asarray(gradients, dtype=float)
    n = gradients.size
    assert n >= 1, "leaves cannot be empty by construction"
    total = float(np.sum(gradients))
    if mode == LEAF_NOISY_AVERAGE:
        noisy_sum = total + laplace_sample(laplace_scale(2.0 * g_star, epsilon), rng)
        v = noisy_sum / (n + reg_lambda)
        if abs(v) > g_star:
            v = math.copysign(g_star, v)
        return -v
    if mode == LEAF_LAPLACE_MIN_CHILD:
        if min_child_samples is None:
            raise ValueError("laplace-min-child needs min_child_samples")
        sensitivity = 2.0 * g_star / (min_child_samples + 1 + reg_lambda)
    elif mode == LEAF_LAPLACE_WORST_CASE:
        sensitivity = g_star / (1.0 + reg_lambda)
    else:
        raise ValueError(f"unknown leaf mode {mode!r}")
    value = -total / (n + reg_lambda) + laplace_sample(laplace_scale(sensitivity, epsilon), rng)
    if abs(value) > g_star:
        value = math.copysign(g_star, value)
    return value


def build_tree(
    features: np.ndarray,
    gradients: np.ndarray,
    bounds: FeatureBounds,
    params: TrainParams,
    accountant: PrivacyAccountant,
    rng: RngStream,
) -> Tree:
    """Grow one DP tree on pre-subsampled, pre-filtered rows.

    Candidates are proposed once per tree from the noisy histograms
    (global method). Nodes expand breadth-first; every depth level is
    charged its split budget even when the tree closes early, since
    reclaiming unused levels would make the consumed budget
    data-dependent. Empty phases are still charged so that the ledger
    always totals exactly ``epsilon_per_tree``.
    """
    features = np.asarray(features, dtype=float)
    gradients = np.asarray(gradients, dtype=float)
    num_rows, m = features.shape
    eps = params.epsilon_per_tree
    eps_sketch_each = eps * params.sketch_fraction / m
    eps_leaf = eps * params.leaf_fraction
    eps_split = eps * params.split_fraction

    # phase 1: noisy histograms -> candidate grid (post-processing)
    hessians = np.ones(num_rows)
    candidate_sets: list[np.ndarray] = []
    for k in range(m):
        hist = build_dp_histogram(
            features[:, k],
            hessians,
            float(bounds.lower[k]),
            float(bounds.upper[k]),
            params.bins,
            eps_sketch_each,
            rng.child(_RNG_SKETCH, k),
            weight_bound=1.0,
        )
        accountant.charge(f"sketch:f{k}", eps_sketch_each)
        if hist.usable:
            candidate_sets.append(propose_splits(hist, params.candidates).thresholds)
        else:
            candidate_sets.append(np.empty(0))

    # phase 2: breadth-first expansion with per-level split budgets
    nodes: list[dict] = [{}]
    frontier: list[tuple[int, np.ndarray]] = [(0, np.arange(num_rows))]
    leaves: list[tuple[int, np.ndarray]] = []
    if num_rows == 0:
        frontier = []
        leaves = [(0, np.arange(0))]
    if params.max_depth == 0:
        accountant.charge("split:reserved", eps_split)
        leaves.extend(frontier)
        frontier = []
    else:
        eps_level = eps_split / params.max_depth
        for depth in range(params.max_depth):
            accountant.charge(f"split:level{depth}:reserved", eps_level, group=("split", depth))
            next_frontier: list[tuple[int, np.ndarray]] = []
            for pos, (node_id, rows) in enumerate(frontier):
                feats, thrs, gains = _gains_from_buckets(
                    [
                        np.searchsorted(thr, features[rows, k], side="left")
                        for k, thr in enumerate(candidate_sets)
                    ],
                    gradients[rows],
                    candidate_sets,
                    params.reg_lambda,
                    params.min_child_samples,
                )
                choice = select_split_dp(
                    feats, thrs, gains, eps_level, params.g_star, rng.child(_RNG_SPLIT, depth, pos)
                )
                if choice is None:
                    leaves.append((node_id, rows))
                    continue
                accountant.charge(
                    f"split:level{depth}:node{node_id}", eps_level, group=("split", depth)
                )
                feat, thr = choice
                go_left = features[rows, feat] <= thr
                left_id, right_id = len(nodes), len(nodes) + 1
                nodes[node_id] = {"f": feat, "t": thr, "l": left_id, "r": right_id}
                nodes.append({})
                nodes.append({})
                next_frontier.append((left_id, rows[go_left]))
                next_frontier.append((right_id, rows[~go_left]))
            frontier = next_frontier
        leaves.extend(frontier)

    # phase 3: leaf values, all in one parallel group
    for leaf_pos, (node_id, rows) in enumerate(leaves):
        if rows.size == 0:
            value = 0.0  # only reachable when filtering left the tree no rows
        else:
            value = noisy_leaf_value(
                gradients[rows],
                eps_leaf,
                params.reg_lambda,
                params.g_star,
                rng.child(_RNG_LEAF, leaf_pos),
                mode=params.leaf_mode,
                min_child_samples=params.min_child_samples,
            )
        accountant.charge(f"leaf:{node_id}", eps_leaf, group=("leaf",))
        nodes[node_id] = {"v": value}

    return Tree.from_nodes(nodes)


def simulate_tree_ledger(params: TrainParams, num_features: int) -> PrivacyAccountant:
    """The ledger one tree will produce, computed without data.

    Per-node charges never exceed their level's reservation (they sit in
    the same parallel group with the same ε), so charging only the
    reservations reproduces :func:`build_tree`'s total bit for bit. This
    is what makes budget previews exactly equal to post-training
    reports.
    """
    if num_features < 1:
        raise ValueError(f"num_features must be >= 1, got {num_features}")
    acc = PrivacyAccountant()
    eps = params.epsilon_per_tree
    eps_sketch_each = eps * params.sketch_fraction / num_features
    for k in range(num_features):
        acc.charge(f"sketch:f{k}", eps_sketch_each)
    if params.max_depth == 0:
        acc.charge("split:reserved", eps * params.split_fraction)
    else:
        eps_level = eps * params.split_fraction / params.max_depth
        for depth in range(params.max_depth):
            acc.charge(f"split:level{depth}:reserved", eps_level, group=("split", depth))
    acc.charge("leaf", eps * params.leaf_fraction, group=("leaf",))
    return acc


def train(dataset: Dataset, params: TrainParams, seed: int) -> tuple[Ensemble, PrivacyReport]:
    """Fit a boosted ensemble of DP trees.

    Per round: subsample rows, differentiate the clipped running
    predictions, drop samples with |g| > g*, grow one tree, and add
    η·tree to the predictions. Each tree keeps its own ledger; the run's
    total cost is the sum of the subsampling-amplified tree totals.
    """
    root = RngStream(seed)
    preds = np.zeros(dataset.n)
    trees: list[Tree] = []
    ledger_totals: list[float] = []
    for k in range(params.trees):
        tree_rng = root.child(k)
        idx = subsample_indices(dataset.n, params.subsample, tree_rng.child(_RNG_SUBSAMPLE))
        g, _ = squared_loss_gradients(np.clip(preds[idx], -1.0, 1.0), dataset.labels[idx])
        kept = gdf_filter(g, params.g_star)
        accountant = PrivacyAccountant()
        tree = build_tree(
            dataset.features[idx[kept]],
            g[kept],
            dataset.bounds,
            params,
            accountant,
            tree_rng,
        )
        trees.append(tree)
        ledger_totals.append(accountant.total())
        preds += params.learning_rate * tree.predict(dataset.features)

    total_eps = math.fsum(
        subsampled_epsilon(tree_eps, params.subsample) for tree_eps in ledger_totals
    )
    report = PrivacyReport(
        per_tree_eps=params.epsilon_per_tree,
        gamma=params.subsample,
        amplified_per_tree=subsampled_epsilon(params.epsilon_per_tree, params.subsample),
        total_eps=total_eps,
        trees=params.trees,
        non_private=math.isinf(params.epsilon_per_tree) and params.trees > 0,
        per_tree_ledger_totals=tuple(ledger_totals),
    )
    info = PrivacyInfo(
        per_tree_eps=params.epsilon_per_tree, gamma=params.subsample, total_eps=total_eps
    )
    ensemble = Ensemble(trees, eta=params.learning_rate, g_star=params.g_star, privacy=info)
    return ensemble, report
