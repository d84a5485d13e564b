"""Noisy per-feature histograms and split-candidate extraction.

Split thresholds are approximate weighted quantiles, but the quantiles
are computed from an equal-width histogram of hessian mass whose bins
were already perturbed with Laplace noise. Everything downstream of the
noisy histogram is post-processing and charges no additional privacy.
Bins are disjoint, so one histogram costs a single ε regardless of the
number of bins (parallel composition).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .privacy import laplace_noise, laplace_scale
from .rng import RngStream


@dataclass
class NoisyHistogram:
    """Equal-width histogram of (noisy) weight mass over public bounds.

    ``raw_weights`` keeps the signed noisy values for debugging; readers
    that need a density must use :meth:`clamped_weights` so the implied
    CDF stays monotone.
    """

    feature: int
    edges: np.ndarray  # num_bins + 1 edges; first/last are the public bounds
    raw_weights: np.ndarray
    epsilon: float
    usable: bool = True

    def clamped_weights(self) -> np.ndarray:
        return np.maximum(self.raw_weights, 0.0)


@dataclass
class SplitCandidates:
    """Strictly increasing thresholds strictly inside the public bounds."""

    feature: int
    thresholds: np.ndarray = field(default_factory=lambda: np.empty(0))


def bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Assign values to bins: half-open [lo, hi) intervals, last bin closed.

    A value sitting exactly on an interior edge lands in the bin to its
    right. Values are assumed clamped into [edges[0], edges[-1]].
    """
    return np.digitize(values, edges[1:-1], right=False)


def build_dp_histogram(
    values: np.ndarray,
    weights: np.ndarray,
    lower: float,
    upper: float,
    num_bins: int,
    epsilon: float,
    rng: RngStream,
    weight_bound: float = 1.0,
) -> NoisyHistogram:
    """Histogram of per-sample weights with Laplace noise on every bin.

    Each bin receives independent Laplace(weight_bound/ε) noise. One
    sample contributes at most ``weight_bound`` to one bin, and bins are
    disjoint, so the full histogram charges exactly ``epsilon``.

    Degenerate bounds (lower == upper) cannot support candidates; the
    returned histogram is flagged unusable.
    """
    if num_bins < 2:
        raise ValueError(f"need at least 2 bins, got {num_bins}")
    if not weight_bound > 0:
        raise ValueError(f"weight_bound must be positive, got {weight_bound}")
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if not lower < upper:
        return NoisyHistogram(
            feature=-1,
            edges=np.array([lower, upper]),
            raw_weights=np.zeros(1),
            epsilon=epsilon,
            usable=False,
        )
    edges = np.linspace(lower, upper, num_bins + 1)
    mass = np.bincount(bin_index(values, edges), weights=weights, minlength=num_bins)
    noisy = mass + laplace_noise(laplace_scale(weight_bound, epsilon), rng, num_bins)
    return NoisyHistogram(feature=-1, edges=edges, raw_weights=noisy, epsilon=epsilon)


def propose_splits(hist: NoisyHistogram, max_candidates: int) -> SplitCandidates:
    """Weighted quantiles of the clamped histogram as split thresholds.

    The histogram is read as a piecewise-constant density; thresholds sit
    at quantile levels j/(l+1) for j = 1..l, interpolated linearly inside
    bins. Duplicates are collapsed. If noise wiped out all mass the
    density carries no signal and an evenly spaced grid is returned.
    Pure post-processing of the histogram: no privacy is charged and no
    private data is read.
    """
    if max_candidates < 1:
        raise ValueError(f"need at least 1 candidate, got {max_candidates}")
    if not hist.usable:
        raise ValueError("histogram is unusable (degenerate feature bounds)")
    lower, upper = float(hist.edges[0]), float(hist.edges[-1])
    levels = np.arange(1, max_candidates + 1) / (max_candidates + 1)

    weights = hist.clamped_weights()
    total = float(weights.sum())
    if total <= 0.0:
        thresholds = lower + levels * (upper - lower)
    else:
        cum = np.concatenate(([0.0], np.cumsum(weights)))
        targets = levels * total
        # bin j covers (cum[j], cum[j+1]]; side='left' guarantees weights[j] > 0
        j = np.searchsorted(cum, targets, side="left") - 1
        widths = hist.edges[1:] - hist.edges[:-1]
        thresholds = hist.edges[j] + (targets - cum[j]) / weights[j] * widths[j]

    thresholds = np.unique(thresholds)
    thresholds = thresholds[(thresholds > lower) & (thresholds < upper)]
    if thresholds.size == 0:
        # all quantiles collapsed onto a bound; fall back to the grid
        thresholds = np.unique(lower + levels * (upper - lower))
        thresholds = thresholds[(thresholds > lower) & (thresholds < upper)]
    return SplitCandidates(feature=hist.feature, thresholds=thresholds)
