"""Epsilon-DP building blocks.

Laplace noise, exponential-mechanism selection via a single-pass race,
privacy amplification by subsampling, and a composition ledger with
sequential-sum / parallel-max semantics.

The distinguished budget ``math.inf`` switches every mechanism to its
noiseless limit (Laplace noise becomes 0, selection becomes argmax).
That mode exists for debugging and oracle tests only and is reported as
non-private by the accountant.
"""

from __future__ import annotations

import math
from typing import Hashable, Iterable

import numpy as np

from .rng import RngStream

#: Zero-noise sentinel budget. Mechanisms become exact; nothing is private.
INFINITE_EPSILON = math.inf


def check_epsilon(epsilon: float) -> float:
    """Validate a privacy budget: a positive real, or the infinite sentinel."""
    epsilon = float(epsilon)
    if math.isnan(epsilon) or epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive or infinite, got {epsilon}")
    return epsilon


def laplace_scale(sensitivity: float, epsilon: float) -> float:
    """Noise scale ``sensitivity / epsilon``; 0 in the infinite-budget mode."""
    if not sensitivity > 0:
        raise ValueError(f"sensitivity must be positive, got {sensitivity}")
    epsilon = check_epsilon(epsilon)
    return 0.0 if math.isinf(epsilon) else sensitivity / epsilon


def _check_scale(scale: float) -> float:
    scale = float(scale)
    if math.isnan(scale) or math.isinf(scale) or scale < 0.0:
        raise ValueError(f"laplace scale must be finite and non-negative, got {scale}")
    return scale


def laplace_sample(scale: float, rng: RngStream) -> float:
    """One draw from Laplace(0, scale), density (1/2b)·exp(−|x|/b).

    Uses the inverse CDF of a single uniform draw so results are
    bit-reproducible across platforms. ``scale == 0`` is the noiseless
    (infinite-budget) mode and returns exactly 0.
    """
    scale = _check_scale(scale)
    if scale == 0.0:
        return 0.0
    u = rng.uniform_open()
    if u < 0.5:
        return scale * math.log(2.0 * u)
    return -scale * math.log(2.0 * (1.0 - u))


def laplace_noise(scale: float, rng: RngStream, size: int) -> np.ndarray:
    """Vector of ``size`` independent Laplace(0, scale) draws."""
    scale = _check_scale(scale)
    if scale == 0.0:
        return np.zeros(size)
    u = rng.uniforms_open(size)
    return np.where(u < 0.5, scale * np.log(2.0 * u), -scale * np.log(2.0 * (1.0 - u)))


def select_exponential(
    utilities: Iterable[float],
    epsilon: float,
    sensitivity: float,
    rng: RngStream,
) -> int:
    """Pick an index with probability ∝ exp(ε·u/(2·sensitivity)).

    Implemented as a race: every candidate draws an Exp(1) clock scaled
    by its weight and the earliest clock wins. That samples the exact
    softmax in one pass without ever forming the normalizing constant,
    and stays stable for utilities spanning ±1e6 because no exp() of a
    utility is taken. Ties (possible in floating point) go to the lowest
    index. With an infinite budget the argmax is returned.
    """
    utilities = np.asarray(utilities, dtype=float)
    if utilities.ndim != 1 or utilities.size == 0:
        raise ValueError("utilities must be a non-empty 1-d sequence")
    if not sensitivity > 0:
        raise ValueError(f"sensitivity must be positive, got {sensitivity}")
    epsilon = check_epsilon(epsilon)
    if math.isinf(epsilon):
        return int(np.argmax(utilities))
    # Subtracting the max makes the weights scale-free: shifting every
    # utility by the same amount leaves the race unchanged.
    log_weights = (epsilon / (2.0 * sensitivity)) * (utilities - utilities.max())
    race = np.log(-np.log(rng.uniforms_open(utilities.size))) - log_weights
    return int(np.argmin(race))


def subsampled_epsilon(epsilon: float, gamma: float) -> float:
    """Effective budget of an ε-DP mechanism run on a γ-fraction subsample.

    Uniform subsampling without replacement amplifies privacy: the
    composite mechanism is log(1 + γ(e^ε − 1))-DP, which is O(γε) for
    small ε and exactly ε at γ = 1.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    epsilon = check_epsilon(epsilon)
    if math.isinf(epsilon):
        return INFINITE_EPSILON
    return math.log1p(gamma * math.expm1(epsilon))


def required_base_epsilon(target: float, gamma: float) -> float:
    """Inverse of :func:`subsampled_epsilon` in its first argument.

    Returns the budget ε such that running an ε-DP mechanism on a
    γ-fraction subsample costs exactly ``target``.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    target = check_epsilon(target)
    if math.isinf(target):
        return INFINITE_EPSILON
    return math.log1p(math.expm1(target) / gamma)


class PrivacyAccountant:
    """Ledger of ε charges with exact composition totals.

    Charges without a group compose sequentially (they sum). Charges
    sharing a group key touch disjoint subsets of the data, so the
    group contributes only the max of its entries. Single-writer: the
    caller serializes concurrent charging.
    """

    def __init__(self) -> None:
        self._sequential: list[tuple[str, float]] = []
        self._groups: dict[Hashable, list[tuple[str, float]]] = {}

    def charge(self, label: str, epsilon: float, group: Hashable | None = None) -> None:
        """Record one mechanism invocation of cost ``epsilon``."""
        epsilon = check_epsilon(epsilon)
        if group is None:
            self._sequential.append((label, epsilon))
        else:
            self._groups.setdefault(group, []).append((label, epsilon))

    def total(self) -> float:
        """Sum of sequential charges plus the max of each parallel group."""
        parts = [eps for _, eps in self._sequential]
        parts.extend(max(eps for _, eps in entries) for entries in self._groups.values())
        return math.fsum(parts)

    @property
    def non_private(self) -> bool:
        """True when any charge was made in the infinite-budget debug mode."""
        return math.isinf(self.total()) if self.num_entries else False

    @property
    def num_entries(self) -> int:
        return len(self._sequential) + sum(len(v) for v in self._groups.values())

    def entries(self) -> list[tuple[str, float, Hashable | None]]:
        """Flat copy of the ledger, sequential entries first."""
        out: list[tuple[str, float, Hashable | None]] = [
            (label, eps, None) for label, eps in self._sequential
        ]
        for group, group_entries in self._groups.items():
            out.extend((label, eps, group) for label, eps in group_entries)
        return out
