"""Seeded 70/10/20 train/validation/test partitions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from marcel.errors import DatasetTooSmall

RATIOS = (0.7, 0.1, 0.2)


@dataclass(frozen=True, eq=False)
class SplitSpec:
    n: int
    seed: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def part(self, name: str) -> np.ndarray:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def split_dataset(n: int, seed: int) -> SplitSpec:
    """Shuffle ``range(n)`` with ``seed`` and cut at ``7n // 10`` and ``8n // 10``."""
    if n < 10:
        raise DatasetTooSmall(f"need at least 10 samples to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    a, b = 7 * n // 10, 8 * n // 10
    return SplitSpec(n, seed, perm[:a].copy(), perm[a:b].copy(), perm[b:].copy())
