import math

import mpmath
import numpy as np
import pytest

from countsearch.estimator import (FAILED, FitSettings, evaluate, fit, information_criteria, mspe,
                                   numerical_hessian, standard_errors, stars)
from countsearch.space import ModelSpecification
from countsearch.synthetic import negbin_data, poisson_data


def _oracle(ll, k, n):
    mpmath.mp.dps = 50
    ll, k, n = mpmath.mpf(ll), mpmath.mpf(k), mpmath.mpf(n)
    dev = -2 * ll
    return {
        "bic": dev + k * mpmath.log(n),
        "aic": dev + 2 * k,
        "caic": dev + k * (mpmath.log(n) + 1),
        "aicc": dev + 2 * k + 2 * k * (k + 1) / (n - k - 1),
        "hqic": dev + 2 * k * mpmath.log(mpmath.log(n)),
    }


@pytest.mark.parametrize("ll,k,n", [(-50, 2, 100), (-3084.44, 13, 5000), (-1.5, 1, 4)])
def test_information_criteria_match_high_precision(ll, k, n):
    got = information_criteria(ll, k, n)
    for name, v in _oracle(ll, k, n).items():
        assert abs(getattr(got, name) - float(v)) < 1e-6 * max(1.0, abs(float(v)))


def test_aicc_undefined_for_small_samples():
    assert information_criteria(-10, 5, 6).aicc is None


def test_stars_thresholds():
    assert stars(0.0004) == "***"
    assert stars(0.004) == "**"
    assert stars(0.04) == "*"
    assert stars(0.07) == "."
    assert stars(0.5) == ""
    assert stars(None) == ""


def test_numerical_hessian_quadratic():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])

    def f(x):
        return -0.5 * x @ A @ x

    H = numerical_hessian(f, np.array([0.3, -0.2]))
    np.testing.assert_allclose(H, -A, atol=1e-5)
    assert np.max(np.abs(H - H.T)) < 1e-5
    se = standard_errors(np.zeros(2), f)
    np.testing.assert_allclose(se, np.sqrt(np.diag(np.linalg.inv(A))), rtol=1e-4)
    assert standard_errors(np.zeros(2), lambda x: 0.5 * x @ A @ x) is None


def test_poisson_fit_with_standard_errors():
    ds = poisson_data(800, seed=3)
    spec = ModelSpecification.fixed_effects(ds.candidates, ds.candidates)
    res = fit(spec, ds, FitSettings())
    assert res.converged and res.se_available
    assert [r.name for r in res.rows] == ["const", "X1", "X2"]
    for r, b in zip(res.rows, (0.5, -0.3, 0.8)):
        assert abs(r.estimate - b) < 4 * r.std_err


def test_nb_fit_reports_alpha_row():
    ds = negbin_data(1500, seed=2)
    spec = ModelSpecification.fixed_effects(ds.candidates, ds.candidates, dispersion=1)
    res = fit(spec, ds)
    assert res.converged
    row = res.rows[-1]
    assert row.name == "nb dispersion (alpha)"
    assert 0.4 < row.estimate < 0.8


def test_bfgs_and_nelder_mead_variants_agree():
    ds = poisson_data(500, seed=4)
    spec = ModelSpecification.fixed_effects(ds.candidates, ds.candidates)
    lls = [fit(spec, ds, FitSettings(method=m, compute_se=False)).loglik
           for m in ("L-BFGS-B", "BFGS_2", "Nelder-Mead-BFGS")]
    assert max(lls) - min(lls) < 1e-4


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        FitSettings(method="Newton")


def test_failure_is_reported_not_raised():
    ds = poisson_data(50, seed=1)
    # log transformation of a variable with negative values cannot be built
    spec = ModelSpecification.fixed_effects(ds.candidates).with_factor("X1", 1, "log")
    res = fit(spec, ds)
    assert not res.converged and res.loglik == -math.inf
    ev = evaluate(spec, ds, ds)
    assert ev.objectives == FAILED


def test_mspe_empty_and_value():
    ds = poisson_data(300, seed=5)
    spec = ModelSpecification.fixed_effects(ds.candidates, ds.candidates)
    res = fit(spec, ds, FitSettings(compute_se=False))
    assert mspe(res, ds.subset(np.array([], dtype=int))) is None
    lam = np.exp(res.theta[0] + res.theta[1] * ds.column("X1") + res.theta[2] * ds.column("X2"))
    assert mspe(res, ds) == pytest.approx(np.mean((ds.y - lam) ** 2))


def test_evaluate_objectives():
    ds = poisson_data(400, seed=6)
    spec = ModelSpecification.fixed_effects(ds.candidates, ["X1"])
    ev = evaluate(spec, ds, ds, FitSettings(compute_se=False))
    ic = information_criteria(ev.fit.loglik, 2, 400)
    assert ev.objectives.bic == pytest.approx(ic.bic)
    assert ev.objectives.get("MSPE") > 0
