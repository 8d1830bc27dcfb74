"""Cross-validation fold assignment, optionally stratified by exposure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FoldAssignment:
    """Fold indices in 1..k for each row, plus how they were built."""

    fold_of: np.ndarray
    k: int
    seed: int
    stratified: bool

    def __post_init__(self) -> None:
        f = np.asarray(self.fold_of, dtype=np.int64)
        if f.ndim != 1:
            raise ValueError("fold_of must be 1-d")
        present = np.unique(f)
        if present.min() < 1 or present.max() > self.k or present.size != self.k:
            raise ValueError(f"every fold in 1..{self.k} must be non-empty")
        f = np.ascontiguousarray(f)
        f.flags.writeable = False
        object.__setattr__(self, "fold_of", f)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)


def make_cv_folds(
    exposure: np.ndarray, k: int, seed: int, stratified: bool = True
) -> FoldAssignment:
    """Deterministic k-fold assignment.

    Stratified mode shuffles rows within each exposure class and deals them
    to folds round-robin, so fold sizes within a class differ by at most one
    and every fold sees both classes. Requires each class to have at least
    k members in that mode.
    """
    exposure = np.asarray(exposure)
    n = exposure.size
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows {n}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed)])))
    fold_of = np.empty(n, dtype=np.int64)
    if stratified:
        for cls in (1, 0):
            rows = np.flatnonzero(exposure == cls)
            if rows.size < k:
                raise ValueError(
                    f"exposure class {cls} has {rows.size} rows, fewer than k={k}; "
                    "cannot stratify"
                )
            rows = rng.permutation(rows)
            fold_of[rows] = 1 + np.arange(rows.size) % k
    else:
        order = rng.permutation(n)
        fold_of[order] = 1 + np.arange(n) % k
    return FoldAssignment(fold_of=fold_of, k=k, seed=int(seed), stratified=bool(stratified))
