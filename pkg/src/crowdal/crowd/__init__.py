"""Crowd simulation, vote aggregation and redundancy allocation."""

from .pba import (
    PBAAllocation,
    PBAConfig,
    allocation_error,
    majority_correct_prob,
    pba_allocate,
    pba_brute_force,
    uniform_allocation,
)
from .sources import AnswerSource, FileQueue, GoldReplay, SimulatedCrowd, TranscriptReplay
from .votes import (
    ACCURACY_CLAMP,
    DawidSkeneResult,
    VoteSet,
    WorkerModel,
    aggregate_dawid_skene,
    aggregate_majority,
    dawid_skene,
    estimate_subgroup_accuracy,
    group_counts,
    simulate_votes,
    vote_count,
)

__all__ = [
    "ACCURACY_CLAMP",
    "AnswerSource",
    "DawidSkeneResult",
    "FileQueue",
    "GoldReplay",
    "PBAAllocation",
    "PBAConfig",
    "SimulatedCrowd",
    "TranscriptReplay",
    "VoteSet",
    "WorkerModel",
    "aggregate_dawid_skene",
    "aggregate_majority",
    "allocation_error",
    "dawid_skene",
    "estimate_subgroup_accuracy",
    "group_counts",
    "majority_correct_prob",
    "pba_allocate",
    "pba_brute_force",
    "simulate_votes",
    "uniform_allocation",
    "vote_count",
]
