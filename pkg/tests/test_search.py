import json
import math

import numpy as np
import pytest

from countsearch.dataset import SplitPlan, split
from countsearch.estimator import FitSettings
from countsearch.search import (ConstraintBreach, Hyperparameters, Objective, TerminationState,
                                acceptance_probability, check_termination, de_offspring,
                                differential_evolution, dominates, harmony_search, improvise,
                                initial_temperature, normalized_delta, objective_scales,
                                pick_donors, simulated_annealing)
from countsearch.search import pareto as pareto_mod
from countsearch.space import ConstraintSet, ModelSpecification, SearchSpace
from countsearch.synthetic import search_benchmark


@pytest.fixture(scope="module")
def problem():
    ds = search_benchmark(n_panels=60, per_panel=4, seed=3)
    train, test = split(ds, SplitPlan(0.3, 0))
    cs = ConstraintSet.for_dataset(ds, complexity_level=[0, 1, 2], transformations=["no"],
                                   distributions=["n"])
    return SearchSpace(cs), train, test


def make_objective(problem, names=("BIC", "MSPE")):
    space, train, test = problem
    return Objective(space, train, test, names, FitSettings(n_draws=20, compute_se=False))


# --- termination ---------------------------------------------------------------------------

def test_termination_time_limit():
    hp = Hyperparameters()
    st = TerminationState(start_time=0.0)
    assert check_termination(st, hp, now=3600.0) is None
    assert check_termination(st, hp, now=3601.0) == "time"


def test_termination_no_improvement_and_reset():
    hp = Hyperparameters()
    st = TerminationState(0.0)
    for _ in range(49):
        st.record(False)
    assert check_termination(st, hp, now=1.0) is None
    st.record(True)                                  # acceptance at iteration 50 resets
    assert st.since_acceptance == 0
    for _ in range(49):
        st.record(False)
    assert check_termination(st, hp, now=1.0) is None
    st.record(False)
    assert check_termination(st, hp, now=1.0) == "no_improvement"


def test_termination_max_iter():
    hp = Hyperparameters(max_iter=10)
    st = TerminationState(0.0, iteration=10)
    assert check_termination(st, hp, now=0.0) == "max_iter"


def test_hyperparameter_validation():
    with pytest.raises(ValueError):
        Hyperparameters(hmcr=1.5)
    with pytest.raises(ValueError):
        Hyperparameters(alpha=1.0)
    with pytest.raises(ValueError):
        Hyperparameters(pitch_rule="sideways")


# --- operators -----------------------------------------------------------------------------

def test_improvise_degenerate_closure(problem):
    space = problem[0]
    rng = np.random.default_rng(0)
    s = space.random_specification(rng)
    hp = Hyperparameters(hmcr=1.0, par=1.0, pitch_rule="literal")   # U >= 1 never happens
    for _ in range(20):
        assert improvise(space, [s] * 5, hp, rng) == s


def test_improvise_pitch_rule_switch(problem):
    space = problem[0]
    rng = np.random.default_rng(1)
    s = space.random_specification(rng)
    classic_never = Hyperparameters(hmcr=1.0, par=0.0, pitch_rule="classic")
    assert improvise(space, [s] * 3, classic_never, rng) == s
    literal_always = Hyperparameters(hmcr=1.0, par=0.0, pitch_rule="literal", mpai=1)
    moved = [improvise(space, [s] * 3, literal_always, rng) != s for _ in range(10)]
    assert any(moved)


def test_pick_donors_distinct():
    rng = np.random.default_rng(0)
    for p in range(6):
        for _ in range(50):
            r = pick_donors(p, 6, rng)
            assert len({p, *r}) == 4
    with pytest.raises(ValueError):
        pick_donors(0, 3, rng)


def test_de_offspring_closed_forms(problem):
    space = problem[0]
    rng = np.random.default_rng(2)
    specs = [space.random_specification(rng) for _ in range(4)]
    enc = [space.encode(s) for s in specs]
    parent, donors = enc[0], tuple(enc[1:])
    assert de_offspring(space, parent, donors, Hyperparameters(cr=0.0), rng) == specs[0]
    assert de_offspring(space, parent, donors, Hyperparameters(cr=1.0, ai=0), rng) == specs[1]


def test_sa_acceptance_rules():
    assert acceptance_probability(0.0, 1.0) == 1.0
    assert acceptance_probability(-2.0, 1.0) == 1.0
    assert acceptance_probability(math.inf, 1.0) == 0.0
    assert acceptance_probability(1.0, 1.0) == pytest.approx(math.exp(-1))
    scales = np.array([10.0, 0.5])
    assert normalized_delta((110.0, 1.5), (100.0, 1.0), scales) == pytest.approx(2.0)


def test_initial_temperature_calibration():
    rng = np.random.default_rng(0)
    vals = [tuple(v) for v in np.column_stack([rng.normal(2000, 50, 25), rng.normal(2, 0.1, 25)])]
    scales = objective_scales(vals)
    T0 = initial_temperature(vals, scales, 0.5)
    ups = [normalized_delta(a, b, scales) for a in vals for b in vals if a is not b]
    mean_up = np.mean([d for d in ups if d > 0])
    u = rng.random(20000)
    rate = np.mean(u < acceptance_probability(mean_up, T0))
    assert abs(rate - 0.5) <= 0.05


# --- full runs -----------------------------------------------------------------------------

@pytest.fixture
def archive_monitor(monkeypatch):
    """Check archive soundness and best-so-far monotonicity after every insertion."""
    state = {"checks": 0, "best": None}
    original = pareto_mod.ParetoArchive.insert

    def insert(self, item, values):
        changed = original(self, item, values)
        vals = self.values
        assert not any(dominates(a, b) for a in vals for b in vals)
        v = tuple(float(x) for x in values)
        if all(math.isfinite(x) for x in v):
            best = state["best"] or (math.inf,) * len(v)
            state["best"] = tuple(min(a, b) for a, b in zip(best, v))
            assert tuple(self.best(i) for i in range(len(v))) == state["best"]
        state["checks"] += 1
        return changed

    monkeypatch.setattr(pareto_mod.ParetoArchive, "insert", insert)
    return state


ALGOS = {"hs": harmony_search, "de": differential_evolution, "sa": simulated_annealing}
SMALL = dict(hms=6, pop_size=6, num_intl_slns=6, max_iter=25)


@pytest.mark.parametrize("name", sorted(ALGOS))
def test_seeded_run_invariants(problem, archive_monitor, name):
    obj = make_objective(problem)
    res = ALGOS[name](obj, hp=Hyperparameters(**SMALL), seed=11)
    assert len(res.archive) >= 1
    assert obj.violations == 0
    assert archive_monitor["checks"] > 0
    space = problem[0]
    for ev in res.archive.items:
        assert space.is_valid(ev.spec)
    assert res.iterations <= 25
    for rec in res.log:
        json.dumps(rec)


@pytest.mark.parametrize("name", sorted(ALGOS))
def test_determinism(problem, name):
    logs = []
    for _ in range(2):
        res = ALGOS[name](make_objective(problem), hp=Hyperparameters(**SMALL), seed=5)
        logs.append((res.log_lines(), [e.spec.code() for e in res.ranked()]))
    assert logs[0] == logs[1]


def test_initial_spec_is_first_evaluated(problem):
    space = problem[0]
    f = space.factors
    initial = ModelSpecification.fixed_effects(f, ["X1"]).with_factor("X2", 2, "no", "n")
    for algo in ALGOS.values():
        res = algo(make_objective(problem), initial, Hyperparameters(**SMALL), seed=0)
        assert res.log[0]["spec"] == initial.code()


def test_hs_memory_size_and_order(problem):
    res = harmony_search(make_objective(problem), hp=Hyperparameters(**SMALL), seed=2)
    assert len(res.population) == 6
    from countsearch.search.pareto import spea2_sort
    obj_vals = [make_objective(problem).values(e) for e in res.population]
    order = spea2_sort(obj_vals, [e.spec.code() for e in res.population])
    assert order == list(range(6))


def test_single_objective_mode(problem):
    res = simulated_annealing(make_objective(problem, ("BIC",)),
                              hp=Hyperparameters(**SMALL), seed=1)
    assert len(res.archive) == 1
    finite = [r["objectives"]["BIC"] for r in res.log if r["objectives"] and
              r["objectives"]["BIC"] is not None]
    assert res.archive.values[0][0] == pytest.approx(min(finite))


def test_no_improvement_stop(problem):
    res = simulated_annealing(make_objective(problem),
                              hp=Hyperparameters(num_intl_slns=4, max_no_improve=3, max_iter=500,
                                                 alpha=0.01), seed=3)
    assert res.stop_reason == "no_improvement"
    assert res.iterations < 500
    tail = [r for r in res.log if r["phase"] != "init"][-3:]
    assert not any(r["accepted"] for r in tail)


def test_time_limit_with_fake_clock(problem):
    t = {"now": 0.0}

    def clock():
        t["now"] += 1.0
        return t["now"]

    res = harmony_search(make_objective(problem),
                         hp=Hyperparameters(hms=4, max_time=10.0, max_iter=1000), seed=0,
                         clock=clock)
    assert res.stop_reason == "time"
    assert res.iterations < 10


def test_objective_refuses_invalid(problem):
    obj = make_objective(problem)
    f = obj.space.factors
    bad = ModelSpecification.fixed_effects(f).with_factor("X1", 3, "no", "n")
    with pytest.raises(ConstraintBreach):
        obj(bad)
    assert obj.violations == 1


def test_objective_cache(problem):
    obj = make_objective(problem)
    s = ModelSpecification.fixed_effects(obj.space.factors, ["X1"])
    a = obj(s)
    b = obj(s)
    assert a is b and obj.fits == 1


def test_de_requires_population_of_four(problem):
    with pytest.raises(ValueError):
        differential_evolution(make_objective(problem), hp=Hyperparameters(pop_size=3))
