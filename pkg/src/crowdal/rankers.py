"""Effectiveness scores for unlabeled items and weighted batch selection.

Rankers return a :class:`ScoreVector` over the current unlabeled pool;
:func:`select_batch` then draws items one at a time without replacement,
each draw proportional to the remaining scores.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._seeding import derive_seed
from .bootstrap import Ensemble, ensemble_labels
from .classifiers import (
    ClassifierSpec,
    TrainedModel,
    _epoch_orders,
    _fit_linear,
    decision_values,
    fit_arrays,
    fold_partition,
    predict_many,
)
from .dataset import Item, items_matrix, labeled_arrays

__all__ = [
    "RANKERS",
    "ScoreVector",
    "SelectionBatch",
    "baseline_scores",
    "cv_error_estimates",
    "margin_distance_scores",
    "min_exp_error_scores",
    "select_batch",
    "uncertainty_scores",
]

RANKERS = ("baseline", "uncertainty", "minexperror", "margindistance")
DEFAULT_SMOOTHING = 1.0


@dataclass(frozen=True, eq=False)
class ScoreVector:
    item_ids: np.ndarray
    scores: np.ndarray
    ranker_kind: str

    def __post_init__(self):
        if self.item_ids.shape != self.scores.shape:
            raise ValueError("ids and scores differ in length")
        if not np.all(np.isfinite(self.scores)) or np.any(self.scores < 0):
            raise ValueError("scores must be finite and non-negative")

    def __len__(self) -> int:
        return len(self.item_ids)

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(s) for i, s in zip(self.item_ids, self.scores)}


@dataclass(frozen=True)
class SelectionBatch:
    item_ids: tuple[int, ...]
    seed: int


def _ids(items: Sequence[Item] | None, n: int) -> np.ndarray:
    if items is None:
        return np.arange(n, dtype=np.int64)
    return np.fromiter((it.id for it in items), dtype=np.int64, count=len(items))


def uncertainty_scores(label_matrix: np.ndarray, item_ids=None) -> ScoreVector:
    """Bootstrap variance ``R(1 - R)`` of each row, ``R`` being the fraction of 1 votes."""
    label_matrix = np.asarray(label_matrix)
    if label_matrix.ndim != 2 or label_matrix.size == 0:
        raise ValueError("label matrix must be a non-empty 2-D array")
    r = label_matrix.mean(axis=1)
    ids = np.arange(len(r), dtype=np.int64) if item_ids is None else np.asarray(item_ids, dtype=np.int64)
    return ScoreVector(ids, r * (1.0 - r), "uncertainty")


def agreement_probability(label_matrix: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Fraction of ensemble members agreeing with ``predicted`` per row."""
    return np.mean(np.asarray(label_matrix) == np.asarray(predicted)[:, None], axis=1)


def _cv_errors_generic(spec, X, y, folds, fit_seeds, cand_X, cand_y):
    errors = np.zeros(len(cand_y))
    for f, test_idx in enumerate(folds):
        mask = np.ones(len(y), dtype=bool)
        mask[test_idx] = False
        Xtr, ytr = X[mask], y[mask]
        for c in range(len(cand_y)):
            model = fit_arrays(spec, np.vstack([Xtr, cand_X[c]]), np.append(ytr, cand_y[c]), fit_seeds[f])
            errors[c] += np.mean(predict_many(model, X[test_idx]) != y[test_idx])
    return errors / len(folds)


def _cv_errors_linear(spec, X, y, folds, fit_seeds, cand_X, cand_y):
    # same arithmetic as _cv_errors_generic with the per-fold setup hoisted
    hp = spec.hyperparameters
    eta0, reg = float(hp["eta0"]), float(hp["reg"])
    errors = np.zeros(len(cand_y))
    for f, test_idx in enumerate(folds):
        mask = np.ones(len(y), dtype=bool)
        mask[test_idx] = False
        n_tr = int(mask.sum())
        Xbuf = np.empty((n_tr + 1, X.shape[1]))
        Xbuf[:n_tr] = X[mask]
        ybuf = np.empty(n_tr + 1, dtype=np.int64)
        ybuf[:n_tr] = y[mask]
        pos = int(ybuf[:n_tr].sum())
        perms = _epoch_orders(fit_seeds[f], n_tr + 1, hp["epochs"])
        Xte, yte = X[test_idx], y[test_idx]
        for c in range(len(cand_y)):
            total_pos = pos + int(cand_y[c])
            if total_pos == 0 or total_pos == n_tr + 1:
                pred = np.full(len(yte), int(cand_y[c]))
            else:
                Xbuf[n_tr] = cand_X[c]
                ybuf[n_tr] = cand_y[c]
                w, b = _fit_linear(Xbuf, ybuf, perms, eta0, reg)
                pred = (Xte @ w + b >= 0).astype(np.int64)
            errors[c] += np.mean(pred != yte)
    return errors / len(folds)


def cv_error_estimates(
    spec: ClassifierSpec,
    labeled: Sequence[tuple[Item, int]],
    candidates_X: np.ndarray,
    candidate_labels: np.ndarray,
    cv_folds: int,
    seed: int,
    workers: int = 1,
    fast: bool = True,
) -> np.ndarray:
    """Cross-validated 0/1 error after adding each candidate with its assumed label.

    One partition of the id-sorted labeled pool is shared by all candidates,
    and the candidate is appended to every training fold (never a test
    fold).  Each fold's learner seed is shared across candidates as well, so
    candidates are independent of each other and of evaluation order.
    """
    ordered = sorted(labeled, key=lambda pair: pair[0].id)
    _, X, y = labeled_arrays(ordered)
    folds = fold_partition(len(y), cv_folds, derive_seed(seed, "mee-folds"))
    fit_seeds = [derive_seed(seed, "mee-fit", f) for f in range(cv_folds)]
    cand_X = np.atleast_2d(np.asarray(candidates_X, dtype=float))
    cand_y = np.asarray(candidate_labels, dtype=np.int64)
    impl = _cv_errors_linear if (fast and spec.kind == "linear") else _cv_errors_generic
    if workers > 1 and len(cand_y) > 1:
        chunks = np.array_split(np.arange(len(cand_y)), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(lambda ix: impl(spec, X, y, folds, fit_seeds, cand_X[ix], cand_y[ix]), chunks)
        return np.concatenate(list(parts))
    return impl(spec, X, y, folds, fit_seeds, cand_X, cand_y)


@dataclass(frozen=True, eq=False)
class MinExpErrorTerms:
    agreement: np.ndarray
    error_right: np.ndarray
    error_wrong: np.ndarray

    @property
    def expected_error(self) -> np.ndarray:
        return self.agreement * self.error_right + (1.0 - self.agreement) * self.error_wrong

    @property
    def expected_accuracy(self) -> np.ndarray:
        return 1.0 - self.expected_error


def smoothed_scores(expected_accuracy: np.ndarray, c: float = DEFAULT_SMOOTHING) -> np.ndarray:
    """Add ``c`` to every score and renormalize to a distribution."""
    raw = np.asarray(expected_accuracy, dtype=float) + c
    total = raw.sum()
    if total <= 0:
        raise ValueError("smoothed scores must have positive mass")
    return raw / total


def min_exp_error_terms(
    spec: ClassifierSpec,
    labeled: Sequence[tuple[Item, int]],
    ensemble: Ensemble,
    unlabeled: Sequence[Item],
    cv_folds: int | None = None,
    seed: int = 0,
    base_model: TrainedModel | None = None,
    workers: int = 1,
) -> MinExpErrorTerms:
    if cv_folds is None:
        cv_folds = min(3, len(labeled))
    if len(labeled) < cv_folds:
        raise ValueError(f"need at least {cv_folds} labeled examples for {cv_folds}-fold estimates")
    if base_model is None:
        _, X, y = labeled_arrays(labeled)
        base_model = fit_arrays(spec, X, y, derive_seed(seed, "base"))
    U = items_matrix(unlabeled)
    predicted = predict_many(base_model, U)
    agreement = agreement_probability(ensemble_labels(ensemble, U), predicted)
    right = cv_error_estimates(spec, labeled, U, predicted, cv_folds, seed, workers)
    wrong = cv_error_estimates(spec, labeled, U, 1 - predicted, cv_folds, seed, workers)
    return MinExpErrorTerms(agreement, right, wrong)


def min_exp_error_scores(
    spec: ClassifierSpec,
    labeled: Sequence[tuple[Item, int]],
    ensemble: Ensemble,
    unlabeled: Sequence[Item],
    cv_folds: int | None = None,
    seed: int = 0,
    c: float = DEFAULT_SMOOTHING,
    base_model: TrainedModel | None = None,
    workers: int = 1,
) -> ScoreVector:
    """Smoothed expected post-acquisition accuracy for every unlabeled item.

    ``cv_folds`` defaults to ``min(3, |labeled|)``.  ``base_model`` is the
    model trained on the full labeled pool whose predictions are taken as
    the "right" labels; it is fitted here when not supplied.
    """
    terms = min_exp_error_terms(spec, labeled, ensemble, unlabeled, cv_folds, seed, base_model, workers)
    return ScoreVector(_ids(unlabeled, len(unlabeled)), smoothed_scores(terms.expected_accuracy, c), "minexperror")


def margin_distance_scores(model: TrainedModel, unlabeled: Sequence[Item]) -> ScoreVector:
    """``1 / (1 + |w.x + b|)``: highest on the separating hyperplane."""
    d = decision_values(model, items_matrix(unlabeled))
    return ScoreVector(_ids(unlabeled, len(unlabeled)), 1.0 / (1.0 + np.abs(d)), "margindistance")


def baseline_scores(unlabeled: Sequence[Item]) -> ScoreVector:
    n = len(unlabeled)
    if n == 0:
        raise ValueError("pool is empty")
    return ScoreVector(_ids(unlabeled, n), np.full(n, 1.0 / n), "baseline")


def select_batch(scores: ScoreVector, batch_size: int, seed: int) -> SelectionBatch:
    """Draw up to ``batch_size`` distinct ids, each draw proportional to the remaining scores.

    Once every remaining score is zero the rest of the draws are uniform.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = len(scores)
    if n == 0:
        raise ValueError("cannot select from an empty pool")
    rng = np.random.default_rng(seed)
    weights = np.array(scores.scores, dtype=float)
    remaining = np.ones(n, dtype=bool)
    chosen = []
    for _ in range(min(batch_size, n)):
        w = np.where(remaining, weights, 0.0)
        total = w.sum()
        if total <= 0:
            w = remaining.astype(float)
            total = w.sum()
        cum = np.cumsum(w)
        i = int(np.searchsorted(cum, rng.random() * total, side="right"))
        i = min(i, n - 1)
        while not remaining[i] or w[i] == 0:
            # guard against landing on a zero-width slot through rounding
            i -= 1
        remaining[i] = False
        chosen.append(int(scores.item_ids[i]))
    return SelectionBatch(tuple(chosen), seed)
