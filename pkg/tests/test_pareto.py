import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from countsearch.search.pareto import (ParetoArchive, dominates, non_dominated_sort,
                                       spea2_fitness, spea2_sort)


def brute_front(points):
    keep = []
    for i, p in enumerate(points):
        if any(dominates(q, p) for q in points):
            continue
        if any(tuple(points[j]) == tuple(p) for j in keep):
            continue
        keep.append(i)
    return keep


def brute_raw(points):
    n = len(points)
    strength = [sum(dominates(points[i], points[j]) for j in range(n)) for i in range(n)]
    return [sum(strength[i] for i in range(n) if dominates(points[i], points[j]))
            for j in range(n)]


def test_dominates():
    assert dominates((1, 2), (2, 2))
    assert not dominates((1, 2), (1, 2))
    assert not dominates((1, 3), (2, 2))


def test_small_front():
    pts = [(1, 2), (2, 1), (2, 2)]
    assert non_dominated_sort(pts) == [0, 1]
    assert non_dominated_sort([(3, 4)]) == [0]
    assert non_dominated_sort([(1, 1), (1, 1), (2, 0)]) == [0, 2]
    assert non_dominated_sort([(1, math.inf), (2, 3)]) == [0, 1]


def test_front_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(100):
        pts = [tuple(p) for p in rng.integers(0, 30, size=(200, 2)).astype(float)]
        assert non_dominated_sort(pts) == brute_front(pts)


# (x ranks fixed at 0, 1, 2) y ranks -> raw fitness worked out by hand
HAND_RAW = {
    (0, 1, 2): [0, 2, 3],
    (0, 2, 1): [0, 2, 2],
    (1, 0, 2): [0, 0, 2],
    (1, 2, 0): [0, 1, 0],
    (2, 0, 1): [0, 0, 1],
    (2, 1, 0): [0, 0, 0],
}


@pytest.mark.parametrize("ys,expected", HAND_RAW.items())
def test_spea2_raw_fitness_hand_enumeration(ys, expected):
    pts = [(float(x), float(y)) for x, y in zip(range(3), ys)]
    raw, _ = spea2_fitness(pts)
    assert raw.tolist() == expected


def test_spea2_raw_fitness_all_grid_triples():
    grid = [(float(a), float(b)) for a in range(3) for b in range(3)]
    for triple in itertools.combinations(grid, 3):
        raw, _ = spea2_fitness(list(triple))
        assert raw.tolist() == brute_raw(list(triple))


def test_spea2_density_and_order():
    pts = [(0.0, 3.0), (1.0, 1.0), (3.0, 0.0), (3.0, 3.0)]
    raw, dens = spea2_fitness(pts)
    assert raw[-1] > 0 and raw[:3].tolist() == [0, 0, 0]
    assert np.all(dens < 0.5) and np.all(dens > 0)
    order = spea2_sort(pts)
    assert order[-1] == 3


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=1, max_size=25,
                unique=True), st.randoms())
def test_spea2_sort_permutation_invariant(points, rnd):
    pts = [(float(a), float(b)) for a, b in points]
    perm = list(range(len(pts)))
    rnd.shuffle(perm)
    shuffled = [pts[i] for i in perm]
    a = [pts[i] for i in spea2_sort(pts)]
    b = [shuffled[i] for i in spea2_sort(shuffled)]
    assert a == b
    front = set(non_dominated_sort(pts))
    ranks = {i: r for r, i in enumerate(spea2_sort(pts))}
    dominated = [i for i in range(len(pts)) if i not in front]
    if dominated and front:
        assert max(ranks[i] for i in front) < min(ranks[i] for i in dominated)


def test_archive_insert_rules():
    ar = ParetoArchive()
    assert ar.insert("a", (2, 2))
    assert not ar.insert("b", (3, 3))                   # dominated
    assert not ar.insert("c", (2, 2))                   # equal
    assert ar.insert("d", (1, 3))
    assert ar.insert("e", (1, 1))                       # dominates both
    assert ar.items == ["e"]
    assert not ar.insert("f", (math.inf, 0.0))          # failed fit
    assert ar.best(0) == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=60))
def test_archive_soundness_property(points):
    ar = ParetoArchive()
    for i, p in enumerate(points):
        ar.insert(i, p)
        vals = ar.values
        assert not any(dominates(a, b) for a in vals for b in vals)
    assert sorted(ar.values) == sorted(tuple(points[i]) for i in brute_front(points))
