"""Acceptance criteria, one verdict line per criterion.

Each test appends ``criterion NN PASS|FAIL: detail`` to the summary printed
at the end of the session (and prints it, visible with ``-s``).  Expected
values come from independent oracles: mpmath, scipy.stats, brute force,
closed forms and known data-generating truths.
"""

import csv
import io
import itertools
import math
import time

import mpmath
import numpy as np
import pytest
import yaml
from scipy import stats

from conftest import ACCEPTANCE
from countsearch.cli import EXIT_OK, main
from countsearch.dataset import SplitPlan, split, write_csv
from countsearch.estimator import FitSettings, evaluate, fit, information_criteria
from countsearch.likelihood import (DrawBank, SimulatedLikelihood, correlated_coefficients,
                                    make_draws, negbin_logpmf, poisson_logpmf, standardized_draw)
from countsearch.search import (ALGORITHMS, Hyperparameters, Objective, TerminationState,
                                check_termination, dominates, non_dominated_sort, spea2_fitness)
from countsearch.search import core as core_mod
from countsearch.space import ConstraintSet, ModelSpecification, SearchSpace, validate
from countsearch.synthetic import (BENCHMARK_TRUTH, negbin_data, panel_rp_data, poisson_data,
                                   search_benchmark)


def verdict(label, ok: bool, detail: str) -> bool:
    line = f"criterion {label} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE.append(line)
    return ok


# --- 1. exact arithmetic ---------------------------------------------------------------

def test_criterion_01_information_criteria():
    mpmath.mp.dps = 50
    ll, k, n = mpmath.mpf(-50), mpmath.mpf(2), mpmath.mpf(100)
    oracle = {
        "bic": -2 * ll + k * mpmath.log(n),
        "aic": -2 * ll + 2 * k,
        "caic": -2 * ll + k * (mpmath.log(n) + 1),
        "aicc": -2 * ll + 2 * k + 2 * k * (k + 1) / (n - k - 1),
        "hqic": -2 * ll + 2 * k * mpmath.log(mpmath.log(n)),
    }
    stated = {"bic": 109.2103404, "aic": 104.0, "caic": 111.2103404, "aicc": 104.1237113,
              "hqic": 103.0558}
    got = information_criteria(-50, 2, 100)
    vs_oracle = {m: abs(getattr(got, m) - float(v)) for m, v in oracle.items()}
    vs_stated = {m: abs(getattr(got, m) - v) for m, v in stated.items()}
    # the stated figures carry 7 decimals, so they agree with the oracle to 5e-8
    stated_ok = {m: abs(float(oracle[m]) - v) <= 1e-6 for m, v in stated.items()}
    ok_oracle = all(d <= 1e-6 for d in vs_oracle.values())
    ok_stated = all(d <= 1e-6 for d in vs_stated.values())
    detail = (f"max |impl - mpmath| = {max(vs_oracle.values()):.2e}; "
              f"HQIC impl {got.hqic:.7f}, mpmath {float(oracle['hqic']):.7f}, stated 103.0558 "
              f"(stated value matches no oracle: {not stated_ok['hqic']})")
    verdict("01", ok_oracle and ok_stated, detail)
    assert ok_oracle
    for m in ("bic", "aic", "caic", "aicc"):
        assert vs_stated[m] <= 1e-6, m
    if not ok_stated:
        pytest.xfail("stated HQIC 103.0558 disagrees with -2LL + 2k ln ln n = 106.1087 "
                     "(see decisions ledger)")


# --- 2. Poisson recovery ----------------------------------------------------------------

def test_criterion_02_poisson_recovery():
    ds = poisson_data(2000, seed=0)
    spec = ModelSpecification.fixed_effects(ds.candidates, ds.candidates)
    t0 = time.perf_counter()
    res = fit(spec, ds, FitSettings())
    took = time.perf_counter() - t0
    truth = (0.5, -0.3, 0.8)
    errs = [abs(r.estimate - b) for r, b in zip(res.rows, truth)]
    zs = [e / r.std_err for e, r in zip(errs, res.rows)]
    ok = res.converged and max(errs) <= 0.1 and max(zs) <= 3 and took < 5
    verdict("02", ok, f"max |err| {max(errs):.4f}, max |err|/SE {max(zs):.2f}, {took:.2f} s")
    assert ok


# --- 3. NB recovery ---------------------------------------------------------------------

def test_criterion_03_negbin_alpha():
    ds = negbin_data(3000, alpha=0.6, seed=0)
    spec = ModelSpecification.fixed_effects(ds.candidates, ds.candidates, dispersion=1)
    t0 = time.perf_counter()
    res = fit(spec, ds, FitSettings())
    took = time.perf_counter() - t0
    alpha = res.rows[-1].estimate
    rel = abs(alpha - 0.6) / 0.6
    ok = res.converged and rel <= 0.2 and took < 10
    verdict("03", ok, f"alpha-hat {alpha:.4f} (rel err {rel:.3f}), {took:.2f} s")
    assert ok


# --- 4. random-parameter recovery -------------------------------------------------------

def test_criterion_04_panel_random_parameter():
    ds = panel_rp_data(n_panels=500, per_panel=4, mean=0.5, sd=0.3, seed=0)
    spec = ModelSpecification.from_code("Poisson|X1:2:no:n", ["X1"])
    t0 = time.perf_counter()
    res = fit(spec, ds, FitSettings(n_draws=500, draw_type="halton", compute_se=False))
    took = time.perf_counter() - t0
    mean, sd = res.theta[1], abs(res.theta[2])
    ok = res.converged and abs(mean - 0.5) <= 0.1 and abs(sd - 0.3) <= 0.15 and took < 180
    verdict("04", ok, f"mean {mean:.4f}, sd {sd:.4f}, {took:.1f} s")
    assert ok


# --- 5. correlated block covariance -----------------------------------------------------

def test_criterion_05_correlated_covariance():
    L = np.array([[0.6, 0.0], [0.3, 0.4]])
    t0 = time.perf_counter()
    u = make_draws(10**6, 1, 2)[:, 0, :]
    z = standardized_draw(u, "n")
    beta = correlated_coefficients(np.array([0.5, -0.2]), L, z)
    cov = np.cov(beta, rowvar=False)
    took = time.perf_counter() - t0
    err = np.abs(cov - L @ L.T).max()
    ok = err <= 0.01 and took < 30
    verdict("05", ok, f"max |cov - LL'| {err:.2e} over 1e6 Halton draws, {took:.1f} s")
    assert ok


# --- 6. Pareto oracles ------------------------------------------------------------------

def _brute_front(points):
    keep = []
    for i, p in enumerate(points):
        if any(dominates(q, p) for q in points):
            continue
        if any(points[j] == p for j in keep):
            continue
        keep.append(i)
    return keep


def _brute_raw(points):
    n = len(points)
    strength = [sum(dominates(points[i], points[j]) for j in range(n)) for i in range(n)]
    return [sum(strength[i] for i in range(n) if dominates(points[i], points[j]))
            for j in range(n)]


# x ranks fixed at 0, 1, 2; y ranks -> raw fitness worked out by hand
HAND_RAW = {(0, 1, 2): [0, 2, 3], (0, 2, 1): [0, 2, 2], (1, 0, 2): [0, 0, 2],
            (1, 2, 0): [0, 1, 0], (2, 0, 1): [0, 0, 1], (2, 1, 0): [0, 0, 0]}


def test_criterion_06_pareto_oracles():
    rng = np.random.default_rng(2024)
    mismatches = 0
    for k in range(1000):
        # alternate tie-heavy integer grids and continuous points
        if k % 2:
            raw = rng.random((200, 2))
        else:
            raw = rng.integers(0, 40, size=(200, 2)).astype(float)
        pts = [tuple(p) for p in raw]
        mismatches += non_dominated_sort(pts) != _brute_front(pts)
    # every 3-point configuration with distinct objective pairs, up to relabelling of values
    grid = [(float(a), float(b)) for a in range(3) for b in range(3)]
    configs = 0
    raw_bad = 0
    for triple in itertools.combinations(grid, 3):
        for perm in itertools.permutations(triple):
            configs += 1
            raw_bad += spea2_fitness(list(perm))[0].tolist() != _brute_raw(list(perm))
    for ys, expected in HAND_RAW.items():
        configs += 1
        raw_bad += spea2_fitness([(float(x), float(y)) for x, y in enumerate(ys)])[0].tolist() \
            != expected
    ok = mismatches == 0 and raw_bad == 0
    verdict("06", ok, f"{mismatches} front mismatches in 1000 instances; "
                      f"{raw_bad} raw-fitness mismatches in {configs} 3-point configurations")
    assert ok


# --- 7. search correctness ---------------------------------------------------------------

@pytest.fixture(scope="module")
def benchmark_problem():
    ds = search_benchmark()
    train, test = split(ds, SplitPlan(0.3, 0))
    cs = ConstraintSet.for_dataset(ds, transformations=["no"])
    settings = FitSettings(n_draws=50, compute_se=False)
    null = evaluate(ModelSpecification.fixed_effects(cs.factors), train, test, settings)
    return ds, train, test, cs, settings, null.objectives.bic


@pytest.mark.parametrize("name", ["hs", "de", "sa"])
def test_criterion_07_search_recovers_truth(benchmark_problem, name):
    ds, train, test, cs, settings, null_bic = benchmark_problem
    truth = {f for f in BENCHMARK_TRUTH if f != "intercept"}     # X1, X2, X3
    obj = Objective(SearchSpace(cs), train, test, ("BIC", "MSPE"), settings)
    t0 = time.perf_counter()
    res = ALGORITHMS[name](obj, hp=Hyperparameters(max_iter=300), seed=1)
    took = time.perf_counter() - t0
    hits = [e for e in res.archive.items
            if truth <= set(e.spec.active) and e.objectives.bic <= null_bic - 10]
    best = min((e.objectives.bic for e in hits), default=math.nan)
    ok = bool(hits) and res.iterations <= 300 and took < 900
    verdict(f"07/{name}", ok,
            f"{len(hits)} archive spec(s) with {sorted(truth)} active; best BIC {best:.2f} vs "
            f"intercept-only {null_bic:.2f}; {res.iterations} iterations, {took:.0f} s")
    assert ok


# --- 8. constraint compliance ------------------------------------------------------------

ANALYST_BLOCK = {
    "X1": {"levels": [0, 1], "transformations": ["no"], "distributions": []},
    "X2": {"levels": [1, 2, 5], "transformations": ["no"], "distributions": ["n", "t"]},
    "X3": {"levels": [0, 2, 6], "transformations": ["no"], "distributions": ["n", "ln"]},
    "Z1": {"levels": [0, 5], "transformations": ["no"], "distributions": ["n"]},
    "Z2": {"levels": [0, 2, 5], "transformations": ["no"], "distributions": ["ln"]},
}


def test_criterion_08_constraint_compliance(monkeypatch):
    ds = search_benchmark(n_panels=80, per_panel=5, seed=8)
    train, test = split(ds, SplitPlan(0.3, 0))
    cs = ConstraintSet.for_dataset(ds, decisions=ANALYST_BLOCK)
    seen = {"evaluations": 0, "invalid": 0}
    original = core_mod.evaluate

    def instrumented(spec, *args, **kwargs):
        seen["evaluations"] += 1
        seen["invalid"] += bool(validate(spec, cs))
        return original(spec, *args, **kwargs)

    monkeypatch.setattr(core_mod, "evaluate", instrumented)
    refused = 0
    stops = {}
    for name in ("hs", "de", "sa"):
        obj = Objective(SearchSpace(cs), train, test, ("BIC", "MSPE"),
                        FitSettings(n_draws=25, compute_se=False))
        res = ALGORITHMS[name](obj, hp=Hyperparameters(max_iter=120), seed=4)
        refused += obj.violations
        stops[name] = f"{res.stop_reason}@{res.iterations}"
    ok = seen["invalid"] == 0 and refused == 0 and seen["evaluations"] > 0
    verdict("08", ok, f"{seen['invalid']} invalid of {seen['evaluations']} estimator calls, "
                      f"{refused} refused proposals; runs {stops}")
    assert ok


# --- 9. termination contracts ------------------------------------------------------------

@pytest.fixture(scope="module")
def small_problem():
    ds = search_benchmark(n_panels=60, per_panel=4, seed=3)
    train, test = split(ds, SplitPlan(0.3, 0))
    cs = ConstraintSet.for_dataset(ds, complexity_level=[0, 1, 2], transformations=["no"],
                                   distributions=["n"])
    return SearchSpace(cs), train, test


def test_criterion_09_termination(monkeypatch, benchmark_problem, small_problem):
    # (a) wall-clock limit on the full benchmark with a 5 s budget
    _, train, test, cs, settings, _ = benchmark_problem
    durations = []
    original = core_mod.evaluate

    def timed(*args, **kwargs):
        t = time.monotonic()
        try:
            return original(*args, **kwargs)
        finally:
            durations.append(time.monotonic() - t)

    monkeypatch.setattr(core_mod, "evaluate", timed)
    obj = Objective(SearchSpace(cs), train, test, ("BIC", "MSPE"), settings)
    t0 = time.monotonic()
    res = ALGORITHMS["hs"](obj, hp=Hyperparameters(max_time=5.0, max_iter=10**6), seed=0)
    elapsed = time.monotonic() - t0
    slack = max(durations)
    time_ok = res.stop_reason == "time" and 5.0 < elapsed <= 5.0 + slack
    monkeypatch.setattr(core_mod, "evaluate", original)

    # (b) 50 consecutive rejections: with a one-member memory and no pitch moves
    # every improvisation reproduces that member
    space, train, test = small_problem
    frozen = Hyperparameters(hms=1, hmcr=1.0, par=1.0, pitch_rule="literal", max_iter=10**6)
    res_b = ALGORITHMS["hs"](Objective(space, train, test, settings=FitSettings(
        n_draws=20, compute_se=False)), hp=frozen, seed=0)
    main_loop = [r for r in res_b.log if r["phase"] != "init"]
    rejections_ok = (res_b.stop_reason == "no_improvement" and res_b.iterations == 50
                     and not any(r["accepted"] for r in main_loop))

    # (c) the counter resets on every acceptance: replay a real run's flags
    flags = []
    res_c = ALGORITHMS["hs"](Objective(space, train, test, settings=FitSettings(
        n_draws=20, compute_se=False)), hp=Hyperparameters(hms=6, max_iter=600),
        seed=2, on_record=lambda rec, changed: flags.append(
            (rec["phase"], rec["accepted"] or changed)))
    runs, cur = [], 0
    for phase, acc in flags:
        if phase == "init":
            continue
        cur = 0 if acc else cur + 1
        runs.append(cur)
    expected_stop = "no_improvement" if runs and runs[-1] == 50 else "max_iter"
    reset_ok = (max(runs[:-1], default=0) < 50 and res_c.stop_reason == expected_stop
                and any(a for _, a in flags[1:]))
    st = TerminationState(0.0)
    for _ in range(49):
        st.record(False)
    st.record(True)
    unit_ok = st.since_acceptance == 0 and check_termination(st, Hyperparameters(), 1.0) is None

    ok = time_ok and rejections_ok and reset_ok and unit_ok
    verdict("09", ok, f"time stop at {elapsed:.2f} s (limit 5, slack {slack:.2f} s, "
                      f"reason {res.stop_reason}); frozen HS stopped '{res_b.stop_reason}' after "
                      f"{res_b.iterations} rejections; HS replay longest pre-stop run "
                      f"{max(runs[:-1], default=0)}, stop '{res_c.stop_reason}'")
    assert ok


# --- 10. numerical hygiene ---------------------------------------------------------------

def test_criterion_10_numerical_hygiene():
    y = np.arange(201)
    lams = [0.1, 0.5, 1, 2, 5, 10, 15, 20]
    pois = max(abs(1 - np.exp(poisson_logpmf(y, lam)).sum()) for lam in lams)
    # the NB-2 tail beyond 200 is itself above 1e-8 once alpha*lambda is large, so mass
    # is checked against 1 - P(Y > 200) from scipy, and directly where that tail is negligible
    nb_full, nb_direct = 0.0, 0.0
    for lam, a in itertools.product(lams, [0.05, 0.1, 0.25, 0.5, 1.0, 2.0]):
        mass = np.exp(negbin_logpmf(y, lam, a)).sum()
        tail = stats.nbinom.sf(200, 1 / a, 1 / (1 + a * lam))
        nb_full = max(nb_full, abs(1 - tail - mass))
        if tail < 1e-10:
            nb_direct = max(nb_direct, abs(1 - mass))
    pmf_ok = max(pois, nb_full, nb_direct) <= 1e-8

    ds = search_benchmark()
    spec = ModelSpecification.from_code(
        "NB|X1:1:no|X2:2:no:n|X3:5:no:n:member|Z1:5:no:n:covariate", ds.candidates)
    res = fit(spec, ds, FitSettings(n_draws=50, compute_se=False))
    sl = SimulatedLikelihood(spec, ds, DrawBank(50))
    x, n = res.theta, len(res.theta)
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1e-5 * max(1.0, abs(x[j]))
        J[:, j] = (sl.gradient(x + e) - sl.gradient(x - e)) / (2 * e[j])
    asym = np.abs(J - J.T).max()

    panel = panel_rp_data(n_panels=200, per_panel=4, seed=1)
    exact = SimulatedLikelihood(ModelSpecification.from_code("Poisson|X1:1:no", ["X1"]),
                                panel).loglik([0.4, 0.5])
    collapse = 0.0
    for code, mean in [("n", 0.5), ("t", 0.5), ("u", 0.5), ("tn_n", 0.5),
                       ("ln_n", math.log(0.5))]:
        rp = ModelSpecification.from_code(f"Poisson|X1:2:no:{code}", ["X1"])
        sim = SimulatedLikelihood(rp, panel, DrawBank(100)).loglik([0.4, mean, 0.0])
        collapse = max(collapse, abs(sim - exact))

    ok = pmf_ok and asym <= 1e-5 and collapse <= 1e-6
    verdict("10", ok, f"pmf mass error Poisson {pois:.1e}, NB {max(nb_full, nb_direct):.1e}; "
                      f"raw Hessian asymmetry {asym:.1e} (entries up to {np.abs(J).max():.0f}); "
                      f"zero-spread gap {collapse:.1e}")
    assert ok


# --- 11. determinism --------------------------------------------------------------------

def test_criterion_11_determinism(tmp_path):
    data = tmp_path / "counts.csv"
    write_csv(search_benchmark(n_panels=50, per_panel=4, seed=2), data)
    identical = {}
    for algorithm in ("hs", "de", "sa"):
        cfg = {"data": str(data), "model_terms": {"Y": "Y", "panels": "ID"},
               "algorithm": algorithm, "_r_draws": 15, "_max_iter": 15, "_hms": 5,
               "_pop_size": 5, "_num_intl_slns": 5, "verbose": 0, "seed": 9}
        path = tmp_path / f"{algorithm}.yaml"
        path.write_text(yaml.safe_dump(cfg))
        outs = []
        for k in range(2):
            folder = tmp_path / f"{algorithm}_{k}"
            assert main(["run", str(path), "--out", str(folder)], io.StringIO(),
                        io.StringIO()) == EXIT_OK
            outs.append(((folder / "iterations.jsonl").read_bytes(),
                         (folder / "pareto.csv").read_bytes()))
        rows = len(list(csv.reader(io.StringIO(outs[0][1].decode())))) - 1
        identical[algorithm] = (outs[0] == outs[1], rows)
    ok = all(same for same, _ in identical.values())
    verdict("11", ok, "byte-identical logs and archive CSVs: " + ", ".join(
        f"{a}={same} ({rows} archive rows)" for a, (same, rows) in identical.items()))
    assert ok
