"""Pareto dominance, SPEA2 fitness and the non-dominated archive."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """``a`` is no worse than ``b`` everywhere and strictly better somewhere (minimisation)."""
    better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def non_dominated_sort(points: Sequence[Sequence[float]]) -> list[int]:
    """Indices of the non-dominated points, in input order.

    Of several identical points only the first is kept.  Two objectives are
    handled by a sort-and-sweep; more fall back to pairwise comparison.
    """
    pts = [tuple(float(v) for v in p) for p in points]
    if not pts:
        return []
    m = len(pts[0])
    if m == 1:
        best = min(range(len(pts)), key=lambda i: (pts[i][0], i))
        return [best]
    if m == 2:
        order = sorted(range(len(pts)), key=lambda i: (pts[i][0], pts[i][1], i))
        keep = []
        best_second = math.inf
        first = True
        for i in order:
            if first or pts[i][1] < best_second:
                keep.append(i)
                best_second = pts[i][1]
                first = False
        return sorted(keep)
    keep = []
    for i, p in enumerate(pts):
        if any(dominates(q, p) for q in pts):
            continue
        if any(pts[j] == p for j in keep):
            continue
        keep.append(i)
    return keep


def _finite(values: np.ndarray) -> np.ndarray:
    # failed fits carry +inf; keep distances finite so density stays defined
    return np.nan_to_num(values, nan=1e150, posinf=1e150, neginf=-1e150)


def spea2_fitness(points: Sequence[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    """SPEA2 raw fitness and density of every point (lower total is better).

    Strength of ``i`` is the number of points it dominates; raw fitness of
    ``i`` sums the strengths of its dominators; density is
    ``1 / (sigma_k + 2)`` with ``sigma_k`` the distance to the k-th nearest
    neighbour in objective space, ``k = ceil(sqrt(N))``.
    """
    P = [tuple(p) for p in points]
    n = len(P)
    dom = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            if i != j and dominates(P[i], P[j]):
                dom[i, j] = True
    strength = dom.sum(axis=1)
    raw = np.array([strength[dom[:, j]].sum() for j in range(n)], dtype=float)
    if n == 1:
        return raw, np.array([0.5])
    V = _finite(np.asarray(P, dtype=float))
    dist = np.sqrt(((V[:, None, :] - V[None, :, :]) ** 2).sum(axis=-1))
    k = min(math.ceil(math.sqrt(n)), n - 1)
    sigma = np.sort(dist, axis=1)[:, k]  # column 0 is the point itself
    density = 1.0 / (sigma + 2.0)
    return raw, density


def spea2_sort(points: Sequence[Sequence[float]], tiebreak: Sequence[Any] | None = None) -> list[int]:
    """Order of indices by ascending SPEA2 fitness.

    Ties fall back to the objective vectors, then to ``tiebreak`` keys.
    """
    if not points:
        return []
    raw, density = spea2_fitness(points)
    fitness = raw + density
    keys = tiebreak if tiebreak is not None else [0] * len(points)
    return sorted(range(len(points)),
                  key=lambda i: (fitness[i], tuple(points[i]), keys[i]))


@dataclass
class ParetoArchive:
    """Mutually non-dominated (item, objective vector) pairs.

    A candidate equal in every objective to a member is treated as already
    represented and rejected, as is any candidate with a non-finite value
    (failed estimations).
    """

    items: list = field(default_factory=list)
    values: list[tuple[float, ...]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(zip(self.items, self.values))

    def insert(self, item, values: Sequence[float]) -> bool:
        """Add ``item`` unless dominated; evict members it dominates. True if changed."""
        v = tuple(float(x) for x in values)
        if not all(math.isfinite(x) for x in v):
            return False
        for m in self.values:
            if dominates(m, v) or m == v:
                return False
        keep = [i for i, m in enumerate(self.values) if not dominates(v, m)]
        self.items = [self.items[i] for i in keep] + [item]
        self.values = [self.values[i] for i in keep] + [v]
        return True

    def best(self, objective: int = 0) -> float:
        return min((v[objective] for v in self.values), default=math.inf)
