from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Fold:
    test: np.ndarray
    train: np.ndarray
    val: np.ndarray


@dataclass
class FoldPlan:
    n: int
    k_folds: int = 10
    val_fraction: float = 0.1
    seed: int = 0
    folds: list = field(default_factory=list)

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def make_folds(n: int, k_folds: int = 10, val_fraction: float = 0.1,
               seed: int = 0) -> FoldPlan:
    """Shuffle ``0..n-1`` into ``k_folds`` near-equal test folds.

    For each fold the remaining ids are shuffled again and split into
    train/validation, with ``round(val_fraction * remaining)`` validation ids.
    """
    if k_folds < 1:
        raise ValueError("k_folds must be positive")
    if n < k_folds:
        raise ValueError(f"cannot make {k_folds} folds from {n} samples")
    if not 0 <= val_fraction < 1:
        raise ValueError("val_fraction must be in [0, 1)")
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(n)
    tests = np.array_split(perm, k_folds)
    folds = []
    for i, test in enumerate(tests):
        if k_folds > 1:
            rest = np.concatenate([t for j, t in enumerate(tests) if j != i])
        else:
            # a single fold has no complement; fit and test on all ids
            rest = perm.copy()
        rest = rest[rng.permutation(len(rest))]
        n_val = int(np.floor(val_fraction * len(rest) + 0.5))
        folds.append(Fold(np.sort(test), np.sort(rest[n_val:]), np.sort(rest[:n_val])))
    return FoldPlan(n, k_folds, val_fraction, seed, folds)
