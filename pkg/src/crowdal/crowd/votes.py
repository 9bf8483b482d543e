"""Simulated workers, vote aggregation and subgroup accuracy estimates."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .._seeding import rng_for
from ..dataset import Item

__all__ = [
    "ACCURACY_CLAMP",
    "DawidSkeneResult",
    "VoteSet",
    "WorkerModel",
    "aggregate_dawid_skene",
    "aggregate_majority",
    "dawid_skene",
    "estimate_subgroup_accuracy",
    "simulate_votes",
    "vote_count",
]

log = logging.getLogger(__name__)

# item id -> [(worker id, label), ...]
VoteSet = dict[int, list[tuple[Hashable, int]]]

ACCURACY_CLAMP = (0.51, 0.99)


@dataclass(frozen=True)
class WorkerModel:
    """Per-subgroup probability that a single vote is correct."""

    subgroup_accuracy: Mapping[int, float]
    workers_per_label: int = 1
    seed: int = 0

    def __post_init__(self):
        for g, p in self.subgroup_accuracy.items():
            if not 0.0 < p < 1.0:
                raise ValueError(f"subgroup {g} accuracy {p} must lie strictly inside (0, 1)")
        if self.workers_per_label < 1:
            raise ValueError("workers_per_label must be >= 1")

    @classmethod
    def _unchecked(cls, subgroup_accuracy, workers_per_label=1, seed=0) -> "WorkerModel":
        # degenerate accuracies (0 or 1) for tests; config loading never goes through here
        obj = object.__new__(cls)
        object.__setattr__(obj, "subgroup_accuracy", dict(subgroup_accuracy))
        object.__setattr__(obj, "workers_per_label", workers_per_label)
        object.__setattr__(obj, "seed", seed)
        return obj

    def accuracy(self, item: Item) -> float:
        if item.subgroup not in self.subgroup_accuracy:
            raise KeyError(f"no accuracy for subgroup {item.subgroup!r} of item {item.id}")
        return self.subgroup_accuracy[item.subgroup]


def simulate_votes(
    worker_model: WorkerModel,
    items: Iterable[Item],
    votes_per_item: int | Mapping[int, int] | None = None,
    seed: int | None = None,
    salt: int = 0,
) -> VoteSet:
    """Draw independent votes; each equals the gold label with the item's subgroup accuracy.

    Every item has its own stream keyed by ``(seed, item id, salt)``, so the
    transcript does not depend on item order.  Worker ids are ``"w0"``,
    ``"w1"``, ... per item: workers are memoryless and interchangeable.
    """
    seed = worker_model.seed if seed is None else seed
    votes: VoteSet = {}
    for item in items:
        if item.gold_label is None:
            raise ValueError(f"item {item.id} has no gold label to simulate against")
        if votes_per_item is None:
            k = worker_model.workers_per_label
        elif isinstance(votes_per_item, Mapping):
            k = votes_per_item[item.id]
        else:
            k = votes_per_item
        p = worker_model.accuracy(item)
        correct = rng_for(seed, "votes", item.id, salt).random(k) < p
        labels = np.where(correct, item.gold_label, 1 - item.gold_label)
        votes[item.id] = [(f"w{j}", int(lab)) for j, lab in enumerate(labels)]
    return votes


def vote_count(votes: VoteSet) -> int:
    return sum(len(v) for v in votes.values())


def _majority(labels: Sequence[int]) -> int:
    ones = sum(labels)
    return 1 if 2 * ones >= len(labels) else 0


def aggregate_majority(votes: VoteSet) -> dict[int, int]:
    """Most frequent label per item; an even split goes to class 1."""
    out = {}
    for item_id, vs in votes.items():
        if not vs:
            raise ValueError(f"item {item_id} has no votes")
        out[item_id] = _majority([lab for _, lab in vs])
    return out


@dataclass(frozen=True)
class DawidSkeneResult:
    labels: dict[int, int]
    posterior: dict[int, float]  # P(class 1) per item
    worker_accuracy: dict[Hashable, float]
    class_prior: tuple[float, float]
    iterations: int
    converged: bool
    confusion: dict[Hashable, np.ndarray] = field(repr=False, default_factory=dict)


def dawid_skene(
    votes: VoteSet,
    max_iter: int = 100,
    tol: float = 1e-6,
    smoothing: float = 0.01,
) -> DawidSkeneResult:
    """Binary Dawid-Skene EM.

    Posteriors start from the majority vote.  Each M-step fits a class prior
    and one 2x2 confusion matrix per worker (with ``smoothing`` pseudo-counts
    per cell); each E-step recomputes item posteriors.  Stops when no
    posterior moves by more than ``tol`` or after ``max_iter`` rounds.
    """
    item_ids = sorted(votes)
    if not item_ids:
        return DawidSkeneResult({}, {}, {}, (0.5, 0.5), 0, True)
    workers = sorted({w for vs in votes.values() for w, _ in vs}, key=str)
    w_index = {w: j for j, w in enumerate(workers)}
    rows, cols, labs = [], [], []
    for i, item_id in enumerate(item_ids):
        if not votes[item_id]:
            raise ValueError(f"item {item_id} has no votes")
        for w, lab in votes[item_id]:
            rows.append(i)
            cols.append(w_index[w])
            labs.append(int(lab))
    rows, cols, labs = np.array(rows), np.array(cols), np.array(labs)
    n, k = len(item_ids), len(workers)

    T = np.zeros((n, 2))
    maj = aggregate_majority(votes)
    T[np.arange(n), [maj[i] for i in item_ids]] = 1.0

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        prior = (T.sum(axis=0) + smoothing) / (n + 2 * smoothing)
        counts = np.full((k, 2, 2), smoothing)
        for c in (0, 1):
            np.add.at(counts[:, c, :], (cols, labs), T[rows, c])
        confusion = counts / counts.sum(axis=2, keepdims=True)
        log_t = np.tile(np.log(prior), (n, 1))
        for c in (0, 1):
            np.add.at(log_t[:, c], rows, np.log(confusion[cols, c, labs]))
        log_t -= log_t.max(axis=1, keepdims=True)
        new_t = np.exp(log_t)
        new_t /= new_t.sum(axis=1, keepdims=True)
        delta = float(np.max(np.abs(new_t - T)))
        T = new_t
        if delta < tol:
            converged = True
            break

    agree = T[rows, labs]
    per_worker = np.bincount(cols, weights=agree, minlength=k) / np.bincount(cols, minlength=k)
    labels = {item_id: int(T[i, 1] >= T[i, 0]) for i, item_id in enumerate(item_ids)}
    return DawidSkeneResult(
        labels=labels,
        posterior={item_id: float(T[i, 1]) for i, item_id in enumerate(item_ids)},
        worker_accuracy={w: float(per_worker[j]) for j, w in enumerate(workers)},
        class_prior=(float(prior[0]), float(prior[1])),
        iterations=it,
        converged=converged,
        confusion={w: confusion[j] for j, w in enumerate(workers)},
    )


def aggregate_dawid_skene(votes: VoteSet, **kw) -> dict[int, int]:
    return dawid_skene(votes, **kw).labels


def estimate_subgroup_accuracy(
    votes: VoteSet,
    subgroup_of: Mapping[int, int],
    mode: str = "gold",
    gold: Mapping[int, int] | None = None,
    groups: Iterable[int] | None = None,
    clamp: tuple[float, float] = ACCURACY_CLAMP,
) -> dict[int, float]:
    """Estimate each subgroup's per-vote accuracy from probe votes.

    ``mode="gold"`` scores votes against known labels; ``"majority"`` scores
    them against each probe item's own majority vote.  Estimates are clamped
    into ``clamp`` (clamping is logged).  Every group listed in ``groups``
    must have at least one probe.
    """
    if mode not in ("gold", "majority"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "gold" and gold is None:
        raise ValueError("gold mode needs gold labels")
    hits: Counter = Counter()
    totals: Counter = Counter()
    majority = aggregate_majority(votes) if mode == "majority" else {}
    for item_id, vs in votes.items():
        g = subgroup_of[item_id]
        truth = gold[item_id] if mode == "gold" else majority[item_id]
        hits[g] += sum(1 for _, lab in vs if lab == truth)
        totals[g] += len(vs)
    wanted = sorted(set(groups)) if groups is not None else sorted(totals)
    missing = [g for g in wanted if totals[g] == 0]
    if missing:
        raise ValueError(f"no probe votes for subgroups {missing}")
    lo, hi = clamp
    out = {}
    for g in wanted:
        raw = hits[g] / totals[g]
        out[g] = min(max(raw, lo), hi)
        if out[g] != raw:
            log.info("subgroup %s accuracy %.3f clamped to %.3f", g, raw, out[g])
    return out


def group_counts(item_ids: Iterable[int], subgroup_of: Mapping[int, int]) -> dict[int, int]:
    counts: defaultdict[int, int] = defaultdict(int)
    for i in item_ids:
        counts[subgroup_of[i]] += 1
    return dict(counts)
