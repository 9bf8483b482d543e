"""Partitioning-based allocation of redundant votes across item subgroups.

Given per-subgroup worker accuracies ``p_g`` and item counts ``f_g``, pick
one odd vote count ``V_g`` per subgroup minimizing the expected number of
wrongly aggregated items ``sum_g f_g * (1 - P(p_g, V_g))`` subject to
``sum_g V_g * f_g <= budget``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

__all__ = [
    "PBAAllocation",
    "PBAConfig",
    "allocation_error",
    "majority_correct_prob",
    "pba_allocate",
    "pba_brute_force",
    "uniform_allocation",
]

TIE_TOL = 1e-12
BRUTE_FORCE_MAX_GROUPS = 6
BRUTE_FORCE_MAX_VOTES = 7


def majority_correct_prob(p: float, b: int) -> float:
    """Probability that a majority of ``b`` (odd) independent votes is correct."""
    if b < 1 or b % 2 == 0:
        raise ValueError(f"vote count must be a positive odd integer, got {b}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    v = (b - 1) // 2
    return math.fsum(math.comb(b, i) * p ** (b - i) * (1.0 - p) ** i for i in range(v + 1))


@dataclass(frozen=True)
class PBAConfig:
    num_groups: int
    n0: int = 2
    v0: int = 9
    b_max: int = 9
    vote_budget: int = 0

    def __post_init__(self):
        if self.num_groups < 1:
            raise ValueError("num_groups must be >= 1")
        if self.n0 <= 1:
            raise ValueError("n0 must be > 1")
        if self.v0 < 1 or self.v0 % 2 == 0:
            raise ValueError("v0 must be a positive odd integer")
        if self.b_max < 1 or self.b_max % 2 == 0:
            raise ValueError("b_max must be a positive odd integer")
        if self.vote_budget < 0:
            raise ValueError("vote_budget must be >= 0")

    @property
    def vote_options(self) -> tuple[int, ...]:
        return tuple(range(1, self.b_max + 1, 2))

    @property
    def probe_cost(self) -> int:
        return self.num_groups * self.n0 * self.v0


@dataclass(frozen=True)
class PBAAllocation:
    votes_per_group: dict[int, int]
    expected_error: float
    cost: int


def _groups(p_hat: Mapping[int, float], f: Mapping[int, int]) -> list[int]:
    missing = [g for g in f if g not in p_hat]
    if missing:
        raise ValueError(f"no accuracy estimate for subgroups {sorted(missing)}")
    if any(n < 0 for n in f.values()):
        raise ValueError("item counts must be non-negative")
    return sorted(f)


def allocation_error(p_hat: Mapping[int, float], f: Mapping[int, int], votes: Mapping[int, int]) -> float:
    """Expected number of items whose majority label is wrong."""
    return math.fsum(f[g] * (1.0 - majority_correct_prob(p_hat[g], votes[g])) for g in sorted(f))


def _finish(p_hat, f, groups, chosen) -> PBAAllocation:
    votes = dict(zip(groups, chosen))
    return PBAAllocation(votes, allocation_error(p_hat, f, votes), sum(votes[g] * f[g] for g in groups))


def _check_budget(f, groups, budget):
    minimum = sum(f[g] for g in groups)
    if budget < minimum:
        raise ValueError(f"vote budget {budget} is infeasible; the minimum feasible budget is {minimum}")


def pba_allocate(pba: PBAConfig, p_hat: Mapping[int, float], f: Mapping[int, int]) -> PBAAllocation:
    """Exact optimum by dynamic programming over (subgroup, votes spent).

    Among allocations within ``TIE_TOL`` of the optimum, the one with the
    lowest total cost wins, then the lexicographically smallest vote vector
    (subgroups in ascending id order).
    """
    groups = _groups(p_hat, f)
    budget = int(pba.vote_budget)
    _check_budget(f, groups, budget)
    options = pba.vote_options
    G = len(groups)
    err = [[f[g] * (1.0 - majority_correct_prob(p_hat[g], b)) for b in options] for g in groups]
    cost = [[b * f[g] for b in options] for g in groups]

    # suffix[i][r]: least error of groups i.. spending exactly r votes
    suffix = np.full((G + 1, budget + 1), np.inf)
    suffix[G, 0] = 0.0
    for i in range(G - 1, -1, -1):
        row = suffix[i]
        nxt = suffix[i + 1]
        for j in range(len(options)):
            c = cost[i][j]
            if c > budget:
                continue
            cand = nxt[: budget + 1 - c] + err[i][j]
            np.minimum(row[c:], cand, out=row[c:])

    best = float(np.min(suffix[0]))
    spent = int(np.flatnonzero(suffix[0] <= best + TIE_TOL)[0])
    target = suffix[0, spent]
    chosen = []
    for i in range(G):
        for j, b in enumerate(options):
            c = cost[i][j]
            if c <= spent and suffix[i + 1, spent - c] + err[i][j] <= target + TIE_TOL:
                chosen.append(b)
                target = suffix[i + 1, spent - c]
                spent -= c
                break
        else:  # pragma: no cover - the DP table guarantees a feasible choice
            raise RuntimeError("allocation reconstruction failed")
    return _finish(p_hat, f, groups, chosen)


def pba_brute_force(pba: PBAConfig, p_hat: Mapping[int, float], f: Mapping[int, int]) -> PBAAllocation:
    """Enumerate every odd vote vector; reference for :func:`pba_allocate`."""
    groups = _groups(p_hat, f)
    if len(groups) > BRUTE_FORCE_MAX_GROUPS or pba.b_max > BRUTE_FORCE_MAX_VOTES:
        raise ValueError(
            f"brute force limited to {BRUTE_FORCE_MAX_GROUPS} groups and b_max <= {BRUTE_FORCE_MAX_VOTES}"
        )
    budget = int(pba.vote_budget)
    _check_budget(f, groups, budget)
    err = {(g, b): f[g] * (1.0 - majority_correct_prob(p_hat[g], b)) for g in groups for b in pba.vote_options}
    feasible = []
    for vec in itertools.product(pba.vote_options, repeat=len(groups)):
        c = sum(b * f[g] for g, b in zip(groups, vec))
        if c <= budget:
            feasible.append((math.fsum(err[g, b] for g, b in zip(groups, vec)), c, vec))
    best = min(e for e, _, _ in feasible)
    near = [(c, vec) for e, c, vec in feasible if e <= best + TIE_TOL]
    _, vec = min(near)
    return _finish(p_hat, f, groups, list(vec))


def uniform_allocation(pba: PBAConfig, p_hat: Mapping[int, float], f: Mapping[int, int]) -> PBAAllocation:
    """Largest odd vote count, the same for every subgroup, that fits the budget."""
    groups = _groups(p_hat, f)
    budget = int(pba.vote_budget)
    _check_budget(f, groups, budget)
    total = sum(f[g] for g in groups)
    fits = [b for b in pba.vote_options if b * total <= budget]
    return _finish(p_hat, f, groups, [fits[-1]] * len(groups))
