"""Upfront and iterative labeling loops.

Both loops take a :class:`~crowdal.dataset.PoolSplit`, a classifier spec, a
ranker name and an answer source, and return a :class:`RunLog` holding one
record per round of questions plus the final label of every unlabeled item
and where it came from.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ._seeding import derive_seed, rng_for
from .bootstrap import DEFAULT_ENSEMBLE_SIZE, Ensemble, ensemble_labels, train_ensemble
from .classifiers import ClassifierSpec, TrainedModel, fit_arrays, k_fold_quality, predict_many
from .crowd.pba import PBAConfig, pba_allocate
from .crowd.sources import AnswerSource
from .crowd.votes import (
    aggregate_dawid_skene,
    aggregate_majority,
    estimate_subgroup_accuracy,
    group_counts,
    vote_count,
)
from .dataset import Item, PoolSplit, items_matrix, labeled_arrays
from .metrics import METRICS, quality
from .rankers import (
    RANKERS,
    ScoreVector,
    agreement_probability,
    baseline_scores,
    margin_distance_scores,
    min_exp_error_scores,
    select_batch,
    uncertainty_scores,
)

__all__ = [
    "Budget",
    "IterationRecord",
    "LoopConfig",
    "QualityTarget",
    "RunLog",
    "default_batch_size",
    "run_iterative",
    "run_upfront",
]

log = logging.getLogger(__name__)


@dataclass
class Budget:
    total_questions: int
    spent: int = 0

    def __post_init__(self):
        if self.total_questions < 0:
            raise ValueError("budget must be >= 0")
        if not 0 <= self.spent <= self.total_questions:
            raise ValueError("spent must lie in [0, total_questions]")

    @property
    def remaining(self) -> int:
        return self.total_questions - self.spent


@dataclass(frozen=True)
class QualityTarget:
    metric: str
    threshold: float

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if not 0 < self.threshold <= 1:
            raise ValueError("quality threshold must lie in (0, 1]")


@dataclass(frozen=True)
class LoopConfig:
    ensemble_size: int = DEFAULT_ENSEMBLE_SIZE
    cv_folds: int | None = None  # MinExpError folds; None means min(3, |labeled|)
    smoothing: float = 1.0
    quality_folds: int = 5
    quality_metric: str = "accuracy"
    votes_per_item: int = 1
    aggregation: str = "majority"
    pba: PBAConfig | None = None
    probe_mode: str = "majority"
    track_quality: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.ensemble_size < 2:
            raise ValueError("ensemble_size must be >= 2")
        if self.aggregation not in ("majority", "dawid_skene"):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.quality_metric not in METRICS:
            raise ValueError(f"unknown metric {self.quality_metric!r}")
        if self.votes_per_item < 1:
            raise ValueError("votes_per_item must be >= 1")
        if self.probe_mode not in ("gold", "majority"):
            raise ValueError(f"unknown probe mode {self.probe_mode!r}")


def default_batch_size(budget: int) -> int:
    """Ten percent of the question budget, at least one."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    return max(1, math.floor(0.1 * budget + 0.5))


@dataclass
class IterationRecord:
    iteration: int
    asked: list[int]
    votes_used: int
    answers: dict[int, list]
    crowd_labels: dict[int, int]
    labeled_size: int
    unlabeled_size: int
    cv_quality: float | None = None
    test_quality: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self)
        d["answers"] = {str(k): [[w, lab] for w, lab in v] for k, v in self.answers.items()}
        d["crowd_labels"] = {str(k): v for k, v in self.crowd_labels.items()}
        return {"type": "iteration", **d}

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "IterationRecord":
        d = dict(d)
        d.pop("type", None)
        d["answers"] = {int(k): [tuple(v) for v in vs] for k, vs in d["answers"].items()}
        d["crowd_labels"] = {int(k): v for k, v in d["crowd_labels"].items()}
        return cls(**d)


@dataclass
class RunLog:
    meta: dict = field(default_factory=dict)
    iterations: list[IterationRecord] = field(default_factory=list)
    final_labels: dict[int, tuple[int, str]] = field(default_factory=dict)
    gold: dict[int, int] = field(default_factory=dict)
    probe_votes: dict[int, list] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def questions(self) -> int:
        return sum(1 for _, src in self.final_labels.values() if src == "crowd")

    @property
    def votes_used(self) -> int:
        return vote_count(self.probe_votes) + sum(rec.votes_used for rec in self.iterations)

    def transcript(self) -> dict[int, list]:
        """Every vote received, per item, in arrival order (probe votes first)."""
        out: dict[int, list] = {i: list(v) for i, v in self.probe_votes.items()}
        for rec in self.iterations:
            for i, vs in rec.answers.items():
                out.setdefault(i, []).extend(vs)
        return out

    def to_jsonl(self, path: str | Path, header: Mapping[str, Any] | None = None) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"type": "header", **(header or {}), "meta": self.meta}, sort_keys=True) + "\n")
            if self.probe_votes:
                probes = {str(k): [[w, lab] for w, lab in v] for k, v in self.probe_votes.items()}
                fh.write(json.dumps({"type": "probes", "votes": probes}, sort_keys=True) + "\n")
            for rec in self.iterations:
                fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
            final = {
                "type": "final",
                "labels": {str(k): [lab, src] for k, (lab, src) in sorted(self.final_labels.items())},
                "gold": {str(k): v for k, v in sorted(self.gold.items())},
                "warnings": self.warnings,
            }
            fh.write(json.dumps(final, sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path: str | Path) -> tuple["RunLog", dict]:
        run = cls()
        header: dict = {}
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                kind = rec.get("type")
                if kind == "header":
                    header = rec
                    run.meta = rec.get("meta", {})
                elif kind == "probes":
                    run.probe_votes = {int(k): [tuple(v) for v in vs] for k, vs in rec["votes"].items()}
                elif kind == "iteration":
                    run.iterations.append(IterationRecord.from_json(rec))
                elif kind == "final":
                    run.final_labels = {int(k): (v[0], v[1]) for k, v in rec["labels"].items()}
                    run.gold = {int(k): v for k, v in rec["gold"].items()}
                    run.warnings = list(rec.get("warnings", []))
        return run, header


# ---------------------------------------------------------------------------
# shared machinery


class _Crowd:
    """Wraps an answer source with vote accounting, aggregation and PBA."""

    def __init__(self, source: AnswerSource, config: LoopConfig, seed: int, run: RunLog):
        self.source = source
        self.config = config
        self.seed = seed
        self.run = run
        self.p_hat: dict[int, float] | None = None
        self.votes_left: int | None = None

    def probe(self, pool: Sequence[Item], question_budget: int) -> None:
        pba = self.config.pba
        if pba is None:
            return
        if any(it.subgroup is None for it in pool):
            raise ValueError("every item needs a subgroup when PBA is enabled")
        need = pba.probe_cost + question_budget
        if pba.vote_budget < need:
            raise ValueError(
                f"vote budget {pba.vote_budget} cannot cover probes ({pba.probe_cost}) "
                f"plus one vote per question ({question_budget})"
            )
        rng = rng_for(self.seed, "probes")
        by_group: dict[int, list[Item]] = {}
        for it in pool:
            by_group.setdefault(it.subgroup, []).append(it)
        probe_ids = []
        for g in sorted(by_group):
            members = by_group[g]
            take = min(pba.n0, len(members))
            probe_ids += [members[i].id for i in sorted(rng.choice(len(members), size=take, replace=False))]
        votes = self.source.request(probe_ids, pba.v0)
        self.run.probe_votes = votes
        subgroup_of = {it.id: it.subgroup for it in pool}
        gold = {it.id: it.gold_label for it in pool} if self.config.probe_mode == "gold" else None
        self.p_hat = estimate_subgroup_accuracy(votes, subgroup_of, self.config.probe_mode, gold, by_group)
        self.votes_left = pba.vote_budget - vote_count(votes)

    def ask(self, items: Sequence[Item], questions_left: int, record: IterationRecord) -> dict[int, int]:
        ids = [it.id for it in items]
        if self.p_hat is not None:
            subgroup_of = {it.id: it.subgroup for it in items}
            f = group_counts(ids, subgroup_of)
            share = self.votes_left * len(ids) // max(questions_left, len(ids))
            alloc = pba_allocate(
                PBAConfig(self.config.pba.num_groups, self.config.pba.n0, self.config.pba.v0,
                          self.config.pba.b_max, share),
                self.p_hat,
                f,
            )
            wanted: int | dict[int, int] = {i: alloc.votes_per_group[subgroup_of[i]] for i in ids}
        else:
            wanted = self.config.votes_per_item
        answers = self.source.request(ids, wanted)
        accepted = {}
        for i, vs in answers.items():
            if i not in ids:
                record.notes.append(f"ignored answers for item {i}, which was not asked")
                continue
            accepted[i] = list(vs)
        missing = [i for i in ids if not accepted.get(i)]
        if missing:
            raise RuntimeError(f"answer source returned no votes for items {missing}")
        used = vote_count(accepted)
        if self.votes_left is not None:
            self.votes_left -= used
        record.answers = accepted
        record.votes_used = used
        if self.config.aggregation == "dawid_skene":
            return aggregate_dawid_skene(accepted)
        return aggregate_majority(accepted)


def _fit(spec: ClassifierSpec, labeled: Sequence[tuple[Item, int]], seed: int) -> TrainedModel:
    _, X, y = labeled_arrays(labeled)
    return fit_arrays(spec, X, y, seed)


def _rank(
    ranker: str,
    spec: ClassifierSpec,
    labeled: Sequence[tuple[Item, int]],
    pool: Sequence[Item],
    base: TrainedModel,
    config: LoopConfig,
    seed: int,
    iteration: int,
    need_ensemble: bool = False,
) -> tuple[ScoreVector, Ensemble | None]:
    ensemble = None
    if ranker in ("uncertainty", "minexperror") or need_ensemble:
        ensemble = train_ensemble(
            spec, labeled, config.ensemble_size, derive_seed(seed, "ensemble", iteration), config.workers
        )
    if ranker == "baseline":
        scores = baseline_scores(pool)
    elif ranker == "uncertainty":
        scores = uncertainty_scores(ensemble_labels(ensemble, pool), [it.id for it in pool])
    elif ranker == "minexperror":
        scores = min_exp_error_scores(
            spec, labeled, ensemble, pool, config.cv_folds, derive_seed(seed, "mee", iteration),
            config.smoothing, base, config.workers,
        )
    elif ranker == "margindistance":
        scores = margin_distance_scores(base, pool)
    else:
        raise ValueError(f"unknown ranker {ranker!r}")
    return scores, ensemble


def _check_inputs(pools: PoolSplit, spec: ClassifierSpec, ranker: str):
    if ranker not in RANKERS:
        raise ValueError(f"unknown ranker {ranker!r}; expected one of {RANKERS}")
    if ranker == "margindistance" and spec.kind != "linear":
        raise ValueError("margindistance needs the linear classifier")


def _resolve_stop(stop, pool_size: int, run: RunLog) -> tuple[int, QualityTarget | None]:
    if isinstance(stop, QualityTarget):
        return pool_size, stop
    if isinstance(stop, Budget):
        total = stop.remaining
    elif isinstance(stop, (int, np.integer)):
        total = int(stop)
    else:
        raise TypeError("stop must be a Budget, an int budget, or a QualityTarget")
    if total < 0:
        raise ValueError("budget must be >= 0")
    if total > pool_size:
        run.warnings.append(f"budget {total} exceeds the {pool_size} unlabeled items; clamped")
        total = pool_size
    return total, None


def _estimated_quality(metric: str, agreement: np.ndarray, predicted: np.ndarray) -> float:
    """Expected quality of machine labels given per-item correctness probabilities."""
    if metric == "accuracy":
        return float(agreement.mean())
    tp = float(np.sum(agreement[predicted == 1]))
    fp = float(np.sum(1 - agreement[predicted == 1]))
    fn = float(np.sum(1 - agreement[predicted == 0]))
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


def _test_quality(model: TrainedModel, pools: PoolSplit, metric: str) -> float | None:
    if not pools.test:
        return None
    _, X, y = labeled_arrays(pools.test)
    return quality(metric, predict_many(model, X), y)


def _new_run(pools, spec, ranker, scenario, seed, config) -> RunLog:
    return RunLog(
        meta={
            "scenario": scenario,
            "ranker": ranker,
            "seed": seed,
            "classifier": spec.to_dict(),
            "initial_labeled": [it.id for it, _ in pools.initial_labeled],
            "unlabeled": [it.id for it in pools.unlabeled],
            "aggregation": config.aggregation,
        },
        gold={it.id: it.gold_label for it in pools.unlabeled if it.gold_label is not None},
    )


# ---------------------------------------------------------------------------
# scenarios


def run_upfront(
    pools: PoolSplit,
    spec: ClassifierSpec,
    ranker: str,
    stop: Budget | QualityTarget | int,
    answer_source: AnswerSource,
    config: LoopConfig | None = None,
    seed: int = 0,
) -> RunLog:
    """One model trained on the initial pool; one scoring pass; one round of questions.

    Under a budget the ranker's weighted sample of ``B`` items goes to the
    crowd and the model labels the rest.  Under a quality target the model
    keeps the longest prefix of items in ascending score order whose
    estimated quality (mean bootstrap agreement with the model) meets the
    target, and the crowd labels everything else.  Crowd answers never
    reach the training set.
    """
    config = config or LoopConfig()
    _check_inputs(pools, spec, ranker)
    run = _new_run(pools, spec, ranker, "upfront", seed, config)
    L0 = list(pools.initial_labeled)
    pool = list(pools.unlabeled)
    budget, target = _resolve_stop(stop, len(pool), run)
    crowd = _Crowd(answer_source, config, seed, run)

    base = _fit(spec, L0, derive_seed(seed, "base", 0))
    model_labels = dict(zip((it.id for it in pool), predict_many(base, items_matrix(pool)).tolist())) if pool else {}
    record = IterationRecord(0, [], 0, {}, {}, len(L0), len(pool))
    if config.track_quality and len(L0) >= 2:
        k = min(config.quality_folds, len(L0))
        record.cv_quality = k_fold_quality(spec, L0, k, config.quality_metric, derive_seed(seed, "quality", 0)).value
    record.test_quality = _test_quality(base, pools, config.quality_metric)

    if pool and (target is not None or budget > 0):
        scores, ensemble = _rank(ranker, spec, L0, pool, base, config, seed, 0, need_ensemble=target is not None)
        if target is None:
            chosen_ids = list(select_batch(scores, budget, derive_seed(seed, "select", 0)).item_ids)
        else:
            X = items_matrix(pool)
            predicted = predict_many(base, X)
            agree = agreement_probability(ensemble_labels(ensemble, X), predicted)
            ids = np.array([it.id for it in pool])
            order = np.lexsort((ids, scores.scores))
            keep = 0
            for k in range(len(pool), 0, -1):
                head = order[:k]
                if _estimated_quality(target.metric, agree[head], predicted[head]) >= target.threshold:
                    keep = k
                    break
            chosen_ids = [int(ids[i]) for i in sorted(order[keep:])]
        by_id = {it.id: it for it in pool}
        chosen = [by_id[i] for i in chosen_ids]
        crowd.probe(pool, len(chosen))
        if chosen:
            record.asked = chosen_ids
            record.crowd_labels = crowd.ask(chosen, len(chosen), record)

    # the model that labels U - U' is still the one trained on L0 alone
    assert base.training_size == len(L0)
    for i, lab in model_labels.items():
        run.final_labels[i] = (int(lab), "model")
    for i, lab in record.crowd_labels.items():
        run.final_labels[i] = (int(lab), "crowd")
    record.unlabeled_size = len(pool) - len(record.crowd_labels)
    run.iterations.append(record)
    return run


def run_iterative(
    pools: PoolSplit,
    spec: ClassifierSpec,
    ranker: str,
    stop: Budget | QualityTarget | int,
    batch_size: int | None,
    answer_source: AnswerSource,
    config: LoopConfig | None = None,
    seed: int = 0,
) -> RunLog:
    """Alternate scoring, asking one batch and retraining on the grown labeled pool.

    Stops when the question budget is spent, the pool is empty, or (under a
    quality target) the k-fold estimate on the labeled pool reaches the
    target.  The check runs at the top of each round, before selection.
    Items still unlabeled at the end get labels from the last model.
    """
    config = config or LoopConfig()
    _check_inputs(pools, spec, ranker)
    run = _new_run(pools, spec, ranker, "iterative", seed, config)
    L0 = list(pools.initial_labeled)
    pool = list(pools.unlabeled)
    original = len(pool)
    budget, target = _resolve_stop(stop, len(pool), run)
    if batch_size is None:
        batch_size = default_batch_size(max(budget, 1))
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    run.meta["batch_size"] = batch_size
    crowd = _Crowd(answer_source, config, seed, run)
    crowd.probe(pool, budget)

    CL: list[tuple[Item, int]] = []
    spent = 0
    model = _fit(spec, L0, derive_seed(seed, "base", 0))
    it = 0
    while pool and spent < budget:
        labeled = L0 + CL
        if target is not None:
            k = min(config.quality_folds, len(labeled))
            est = k_fold_quality(spec, labeled, k, target.metric, derive_seed(seed, "quality", it)).value
            if est >= target.threshold:
                run.meta["stopped_on_quality"] = est
                break
        scores, _ = _rank(ranker, spec, labeled, pool, model, config, seed, it)
        size = min(batch_size, budget - spent)
        batch_ids = select_batch(scores, size, derive_seed(seed, "select", it)).item_ids
        by_id = {item.id: item for item in pool}
        batch = [by_id[i] for i in batch_ids]
        record = IterationRecord(it, list(batch_ids), 0, {}, {}, 0, 0)
        labels = crowd.ask(batch, budget - spent, record)
        known = {item.id for item, _ in CL}
        for i in batch_ids:
            if i in known:
                record.notes.append(f"item {i} already labeled; later answer ignored")
                continue
            CL.append((by_id[i], int(labels[i])))
        record.crowd_labels = {i: int(labels[i]) for i in batch_ids}
        asked = set(batch_ids)
        pool = [item for item in pool if item.id not in asked]
        spent += len(batch_ids)

        labeled = L0 + CL
        assert len(labeled) == len(L0) + len(CL) and len(CL) + len(pool) == original
        model = _fit(spec, labeled, derive_seed(seed, "base", it + 1))
        record.labeled_size = len(labeled)
        record.unlabeled_size = len(pool)
        if config.track_quality and len(labeled) >= 2:
            k = min(config.quality_folds, len(labeled))
            record.cv_quality = k_fold_quality(
                spec, labeled, k, config.quality_metric, derive_seed(seed, "quality", it + 1)
            ).value
        record.test_quality = _test_quality(model, pools, config.quality_metric)
        run.iterations.append(record)
        it += 1

    for item, lab in CL:
        run.final_labels[item.id] = (lab, "crowd")
    if pool:
        for item, lab in zip(pool, predict_many(model, items_matrix(pool)).tolist()):
            run.final_labels[item.id] = (int(lab), "model")
    return run
