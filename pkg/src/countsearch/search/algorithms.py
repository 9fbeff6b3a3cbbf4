"""Harmony search, simulated annealing and differential evolution over specifications."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..space import ModelSpecification, SearchSpace, de_index_update
from .core import (Hyperparameters, Objective, SearchResult, SearchRun, initial_population,
                   make_rng, no_worse, sort_members)


def _finite(vals) -> bool:
    return all(math.isfinite(v) for v in vals)


# --- harmony search -------------------------------------------------------------------

def improvise(space: SearchSpace, memory: list[ModelSpecification], hp: Hyperparameters,
              rng: np.random.Generator) -> ModelSpecification:
    """One harmony: memory consideration, pitch adjustment, then repair."""
    encoded = [space.encode(s) for s in memory]
    idx = np.empty(len(space), dtype=np.int64)
    for j in range(len(space)):
        card = len(space.domains[j])
        if rng.random() <= hp.hmcr:
            v = int(encoded[int(rng.integers(len(encoded)))][j])
            u = rng.random()
            adjust = u >= hp.par if hp.pitch_rule == "literal" else u <= hp.par
            if adjust and hp.mpai > 0 and card > 1:
                step = int(rng.integers(1, hp.mpai + 1)) * (1 if rng.random() < 0.5 else -1)
                v = (v + step) % card
        else:
            v = space.random_value_index(j, rng)
        idx[j] = v
    return space.repair(space.decode(idx))


def harmony_search(objective: Objective, initial: ModelSpecification | None = None,
                   hp: Hyperparameters | None = None, seed=0,
                   on_record: Callable | None = None, clock=None) -> SearchResult:
    hp = hp or Hyperparameters()
    rng = make_rng(seed)
    run = SearchRun(objective, hp, "hs", on_record, *(() if clock is None else (clock,)))
    memory = sort_members(initial_population(run, hp.hms, rng, initial))
    space = run.space
    while memory and not run.stopped():
        cand = improvise(space, [m[0].spec for m in memory], hp, rng)
        if not space.is_valid(cand):
            run.record(None, None, "invalid", False, False, cand)
            continue
        ev, vals, changed = run.evaluate(cand, "search")
        accepted = False
        worst = memory[-1]
        in_memory = any(m[0].spec == cand for m in memory)
        if not in_memory and _finite(vals) and no_worse(vals, worst[1]):
            memory[-1] = (ev, vals)
            memory = sort_members(memory)
            accepted = True
        run.record(ev, vals, "search", accepted, changed)
    return run.result([m[0] for m in memory])


# --- simulated annealing ----------------------------------------------------------------

def objective_scales(values: list[tuple]) -> np.ndarray:
    """Interquartile range of each objective over finite values (std, then 1, as fallbacks)."""
    V = np.asarray(values, dtype=float)
    out = np.ones(V.shape[1])
    for c in range(V.shape[1]):
        col = V[:, c][np.isfinite(V[:, c])]
        if col.size >= 2:
            q75, q25 = np.percentile(col, [75, 25])
            s = q75 - q25
            if not s > 0:
                s = float(np.std(col))
            out[c] = s if s > 0 else 1.0
    return out


def normalized_delta(new: tuple, old: tuple, scales: np.ndarray) -> float:
    """Sum of scaled objective increases ``new - old``; +inf when the new fit failed."""
    total = 0.0
    for a, b, s in zip(new, old, scales):
        if not math.isfinite(a):
            return math.inf
        if not math.isfinite(b):
            return -math.inf
        total += (a - b) / s
    return total


def initial_temperature(values: list[tuple], scales: np.ndarray, intl_acpt: float) -> float:
    """Temperature at which the mean uphill move of the population is accepted with ``intl_acpt``."""
    ups = []
    for i, a in enumerate(values):
        for j, b in enumerate(values):
            if i != j:
                d = normalized_delta(a, b, scales)
                if math.isfinite(d) and d > 0:
                    ups.append(d)
    if not ups:
        return 1.0
    return -float(np.mean(ups)) / math.log(intl_acpt)


def acceptance_probability(delta: float, temperature: float) -> float:
    if delta <= 0:
        return 1.0
    if not math.isfinite(delta):
        return 0.0
    return math.exp(-delta / temperature)


def _crossover(space: SearchSpace, a: ModelSpecification, b: ModelSpecification,
               rng: np.random.Generator) -> ModelSpecification:
    ia, ib = space.encode(a), space.encode(b)
    mask = rng.random(len(ia)) < 0.5
    return space.repair(space.decode(np.where(mask, ib, ia)))


def simulated_annealing(objective: Objective, initial: ModelSpecification | None = None,
                        hp: Hyperparameters | None = None, seed=0,
                        on_record: Callable | None = None, clock=None) -> SearchResult:
    hp = hp or Hyperparameters()
    rng = make_rng(seed)
    run = SearchRun(objective, hp, "sa", on_record, *(() if clock is None else (clock,)))
    space = run.space
    pop = initial_population(run, hp.num_intl_slns, rng, initial)
    if not pop:
        return run.result()
    vals0 = [v for _, v in pop]
    scales = objective_scales(vals0)
    temperature = initial_temperature(vals0, scales, hp.intl_acpt)
    pool = [m for m in pop if _finite(m[1])] or pop
    current = sort_members(pool)[0]
    while not run.stopped():
        for _ in range(hp.ts):
            if run.stopped():
                break
            cand = None
            if hp.crossover_perc > 0 and len(run.archive) and rng.random() < hp.crossover_perc:
                mate = run.archive.items[int(rng.integers(len(run.archive)))].spec
                cand = _crossover(space, current[0].spec, mate, rng)
                if cand == current[0].spec or not space.is_valid(cand):
                    cand = None
            if cand is None:
                cand = space.neighbor(current[0].spec, rng)
            if not space.is_valid(cand):
                run.record(None, None, "invalid", False, False, cand)
                continue
            ev, vals, changed = run.evaluate(cand, "search")
            if any(a < b for a, b in zip(vals, current[1])):
                accepted = True
            else:
                q = acceptance_probability(normalized_delta(vals, current[1], scales), temperature)
                accepted = rng.random() < q
            if accepted:
                current = (ev, vals)
            run.record(ev, vals, "search", accepted, changed)
        temperature *= hp.alpha
    return run.result([current[0]])


# --- differential evolution ---------------------------------------------------------------

def pick_donors(p: int, size: int, rng: np.random.Generator) -> tuple[int, int, int]:
    """Three distinct population indices, all different from ``p``."""
    if size < 4:
        raise ValueError("differential evolution needs a population of at least 4")
    others = [i for i in range(size) if i != p]
    r = rng.choice(len(others), size=3, replace=False)
    return tuple(others[int(i)] for i in r)


def de_offspring(space: SearchSpace, parent: np.ndarray, donors: tuple[np.ndarray, ...],
                 hp: Hyperparameters, rng: np.random.Generator) -> ModelSpecification:
    """Slot-wise mutation from the donors, binomial crossover with the parent, repair."""
    b, f, s = donors
    child = parent.copy()
    for j in range(len(parent)):
        if rng.random() < hp.cr:
            child[j] = de_index_update(int(b[j]), int(f[j]), int(s[j]), hp.ai,
                                       len(space.domains[j]))
    return space.repair(space.decode(child))


def differential_evolution(objective: Objective, initial: ModelSpecification | None = None,
                           hp: Hyperparameters | None = None, seed=0,
                           on_record: Callable | None = None, clock=None) -> SearchResult:
    hp = hp or Hyperparameters()
    if hp.pop_size < 4:
        raise ValueError("differential evolution needs _pop_size >= 4")
    rng = make_rng(seed)
    run = SearchRun(objective, hp, "de", on_record, *(() if clock is None else (clock,)))
    space = run.space
    pop = sort_members(initial_population(run, hp.pop_size, rng, initial))
    if len(pop) < 4:
        return run.result([m[0] for m in pop])
    while not run.stopped():
        for p in range(len(pop)):
            if run.stopped():
                break
            r = pick_donors(p, len(pop), rng)
            parent = pop[p]
            enc = [space.encode(pop[i][0].spec) for i in r]
            cand = de_offspring(space, space.encode(parent[0].spec), tuple(enc), hp, rng)
            if not space.is_valid(cand):
                run.record(None, None, "invalid", False, False, cand)
                continue
            ev, vals, changed = run.evaluate(cand, "search")
            accepted = (cand != parent[0].spec and _finite(vals)
                        and no_worse(vals, parent[1])
                        and not any(m[0].spec == cand for m in pop))
            if accepted:
                pop[p] = (ev, vals)
            run.record(ev, vals, "search", accepted, changed)
        pop = sort_members(pop)
    return run.result([m[0] for m in pop])


ALGORITHMS = {
    "hs": harmony_search,
    "sa": simulated_annealing,
    "de": differential_evolution,
}
