"""Bootstrap replicates of the labeled pool and the ensembles trained on them."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._seeding import derive_seed
from .classifiers import ClassifierSpec, TrainedModel, fit_arrays, predict_many
from .dataset import Item, items_matrix, labeled_arrays

__all__ = [
    "DEFAULT_ENSEMBLE_SIZE",
    "Ensemble",
    "LabelMatrix",
    "ensemble_labels",
    "member_seed",
    "resample",
    "resample_indices",
    "train_ensemble",
]

DEFAULT_ENSEMBLE_SIZE = 10


def resample_indices(n: int, seed: int) -> np.ndarray:
    """``n`` uniform draws with replacement from ``range(n)``."""
    if n < 1:
        raise ValueError("cannot resample an empty pool")
    return np.random.default_rng(seed).integers(0, n, size=n)


def resample(labeled: Sequence[tuple[Item, int]], seed: int) -> list[tuple[Item, int]]:
    return [labeled[i] for i in resample_indices(len(labeled), seed)]


def member_seed(master_seed: int, k: int) -> int:
    """Seed for ensemble member ``k``; see :func:`crowdal._seeding.derive_seed`."""
    return derive_seed(master_seed, "member", k)


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: tuple[TrainedModel, ...]
    source_size: int

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("an ensemble needs at least 2 members")
        kinds = {(m.kind, m.dimension) for m in self.members}
        if len(kinds) != 1:
            raise ValueError("ensemble members must share kind and dimension")

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def dimension(self) -> int:
        return self.members[0].dimension


def _fit_member(spec, X, y, master_seed, k):
    seed = member_seed(master_seed, k)
    idx = resample_indices(len(y), seed)
    return fit_arrays(spec, X[idx], y[idx], derive_seed(seed, "fit"))


def train_ensemble(
    spec: ClassifierSpec,
    labeled: Sequence[tuple[Item, int]],
    m: int = DEFAULT_ENSEMBLE_SIZE,
    master_seed: int = 0,
    workers: int = 1,
) -> Ensemble:
    """Fit ``m`` models, member ``k`` on its own bootstrap replicate.

    Each member depends only on ``(master_seed, k)``, so any ``workers``
    count gives the same ensemble.  Single-class replicates are kept and
    produce constant members.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    _, X, y = labeled_arrays(labeled)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            members = list(pool.map(lambda k: _fit_member(spec, X, y, master_seed, k), range(m)))
    else:
        members = [_fit_member(spec, X, y, master_seed, k) for k in range(m)]
    return Ensemble(tuple(members), len(y))


def ensemble_labels(ensemble: Ensemble, unlabeled: Sequence[Item] | np.ndarray) -> np.ndarray:
    """``|U| x m`` matrix of member predictions (the label matrix)."""
    X = unlabeled if isinstance(unlabeled, np.ndarray) else items_matrix(unlabeled)
    if X.shape[0] == 0:
        return np.zeros((0, ensemble.m), dtype=np.int64)
    if X.shape[1] != ensemble.dimension:
        raise ValueError(f"ensemble expects {ensemble.dimension} features, got {X.shape[1]}")
    return np.column_stack([predict_many(member, X) for member in ensemble.members])


LabelMatrix = np.ndarray
