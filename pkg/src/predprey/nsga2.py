"""NSGA-II machinery for maximisation problems."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class RankedIndividual:
    id: int
    objectives: tuple[float, ...]
    front_rank: int = 0
    crowding: float = 0.0


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    if len(a) != len(b):
        raise ValueError(f"objective vectors differ in length: {len(a)} vs {len(b)}")
    better = False
    for x, y in zip(a, b):
        if x < y:
            return False
        if x > y:
            better = True
    return better


def sort_fronts(pop: Sequence[Sequence[float]]) -> list[list[int]]:
    """Fast non-dominated sort; returns fronts of indices, best first."""
    if len(pop) == 0:
        return []
    f = np.asarray(pop, dtype=float)
    if f.ndim != 2:
        raise ValueError("population must be a sequence of equal-length vectors")
    ge = (f[:, None, :] >= f[None, :, :]).all(axis=2)
    gt = (f[:, None, :] > f[None, :, :]).any(axis=2)
    dom = ge & gt  # dom[p, q]: p dominates q
    count = dom.sum(axis=0)
    fronts: list[list[int]] = []
    current = [int(i) for i in np.flatnonzero(count == 0)]
    while current:
        fronts.append(current)
        nxt: list[int] = []
        for p in current:
            for q in np.flatnonzero(dom[p]):
                count[q] -= 1
                if count[q] == 0:
                    nxt.append(int(q))
        current = sorted(nxt)
    return fronts


def crowding_distance(front: Sequence[Sequence[float]]) -> list[float]:
    n = len(front)
    if n == 0:
        raise ValueError("empty front")
    dist = [0.0] * n
    if n <= 2:
        return [math.inf] * n
    m = len(front[0])
    for k in range(m):
        order = sorted(range(n), key=lambda i: front[i][k])
        lo, hi = front[order[0]][k], front[order[-1]][k]
        dist[order[0]] = dist[order[-1]] = math.inf
        span = hi - lo
        if span == 0:
            continue
        for r in range(1, n - 1):
            i = order[r]
            if dist[i] != math.inf:
                dist[i] += (front[order[r + 1]][k] - front[order[r - 1]][k]) / span
    return dist


def rank_population(objectives: Sequence[Sequence[float]], ids: Sequence[int] | None = None):
    """Assign front rank and crowding to every member."""
    ids = list(range(len(objectives))) if ids is None else list(ids)
    ranked = [RankedIndividual(i, tuple(v)) for i, v in zip(ids, objectives)]
    for r, front in enumerate(sort_fronts(objectives)):
        crowd = crowding_distance([objectives[i] for i in front])
        for i, c in zip(front, crowd):
            ranked[i].front_rank = r
            ranked[i].crowding = c
    return ranked


def select_parents(combined: Sequence[RankedIndividual], mu: int) -> list[int]:
    """Fill by front; truncate the cutoff front by descending crowding."""
    if len(combined) < mu:
        raise ValueError(f"need at least {mu} individuals, got {len(combined)}")
    by_rank: dict[int, list[RankedIndividual]] = {}
    for ind in combined:
        by_rank.setdefault(ind.front_rank, []).append(ind)
    chosen: list[int] = []
    for r in sorted(by_rank):
        front = by_rank[r]
        room = mu - len(chosen)
        if room <= 0:
            break
        if len(front) <= room:
            chosen += [ind.id for ind in front]
        else:
            front = sorted(front, key=lambda ind: -ind.crowding)
            chosen += [ind.id for ind in front[:room]]
    return chosen


def better(a: RankedIndividual, b: RankedIndividual) -> int:
    """1 if ``a`` wins the crowded comparison, -1 if ``b`` does, 0 on a tie."""
    if a.front_rank != b.front_rank:
        return 1 if a.front_rank < b.front_rank else -1
    if a.crowding != b.crowding:
        return 1 if a.crowding > b.crowding else -1
    return 0


def tournament_pick(pool: Sequence[RankedIndividual], rng) -> int:
    if not pool:
        raise ValueError("empty tournament pool")
    a = pool[int(rng.integers(len(pool)))]
    b = pool[int(rng.integers(len(pool)))]
    cmp = better(a, b)
    if cmp == 0:
        return a.id if rng.random() < 0.5 else b.id
    return a.id if cmp > 0 else b.id
