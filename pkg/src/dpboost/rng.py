"""Deterministic, splittable random streams.

Every randomized operation in this package takes an explicit
:class:`RngStream`. A stream is addressed by a 64-bit seed plus an
integer path (e.g. ``[tree, stage, node]``); two streams with the same
address produce identical draws, and streams with distinct paths behave
independently. This makes training reproducible and independent of
execution order across features, nodes, and trees.
"""

from __future__ import annotations

import numpy as np

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


class RngStream:
    """A random stream identified by (seed, path).

    Instances are cheap to create; the underlying generator (Philox,
    counter-based and platform-independent) is built lazily on first
    draw. Draws from one instance advance its state sequentially, so a
    fresh instance (or a fresh child) is needed wherever replay of the
    exact same values is required.
    """

    __slots__ = ("seed", "path", "_generator")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed) & _SEED_MASK
        self.path = tuple(int(p) for p in path)
        if any(p < 0 for p in self.path):
            raise ValueError(f"rng path steps must be non-negative, got {self.path}")
        self._generator: np.random.Generator | None = None

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={list(self.path)})"

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
            self._generator = np.random.Generator(np.random.Philox(seq))
        return self._generator

    def child(self, *steps: int) -> "RngStream":
        """Derive the substream at ``path + steps``."""
        return RngStream(self.seed, self.path + tuple(steps))

    def uniform_open(self) -> float:
        """One double in the open interval (0, 1)."""
        u = self.generator.random()
        while u == 0.0:  # probability 2^-53, but inverse-CDF transforms need u > 0
            u = self.generator.random()
        return float(u)

    def uniforms_open(self, n: int) -> np.ndarray:
        """``n`` doubles in (0, 1)."""
        u = self.generator.random(n)
        zero = u == 0.0
        while zero.any():
            u[zero] = self.generator.random(int(zero.sum()))
            zero = u == 0.0
        return u
