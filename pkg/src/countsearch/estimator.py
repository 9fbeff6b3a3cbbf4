"""Maximum (simulated) likelihood fitting of a single specification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from .dataset import Dataset
from .likelihood import DrawBank, Layout, SimulatedLikelihood
from .space import (CORRELATED, FIXED, GROUPED, HETERO, MEMBER, RANDOM, OFF,
                    ModelSpecification)

METHODS = ("L-BFGS-B", "BFGS", "BFGS_2", "Nelder-Mead-BFGS")
LOG_ALPHA_BOUNDS = (-15.0, 8.0)
_PENALTY = 1e20


@dataclass
class FitSettings:
    method: str = "L-BFGS-B"
    max_iter: int = 500
    gtol: float = 1e-5
    n_draws: int = 200
    draw_type: str = "halton"
    seed: int = 0
    truncation: float = 1.96
    compute_se: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method_ll must be one of {METHODS}, got {self.method!r}")

    def draw_bank(self) -> DrawBank:
        return DrawBank(self.n_draws, self.draw_type, self.seed, self.truncation)


def stars(p: float | None) -> str:
    if p is None or not np.isfinite(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


@dataclass
class CoefficientRow:
    name: str
    transformation: str
    estimate: float
    std_err: float | None = None
    z: float | None = None
    p: float | None = None
    kind: str = "fixed"

    @property
    def stars(self) -> str:
        return stars(self.p)


@dataclass
class FitResult:
    spec: ModelSpecification
    theta: np.ndarray
    loglik: float
    converged: bool
    n_obs: int
    rows: list[CoefficientRow] = field(default_factory=list)
    clamp_count: int = 0
    message: str = ""
    iterations: int = 0
    se_available: bool = False

    @property
    def n_params(self) -> int:
        return int(len(self.theta))

    @property
    def layout(self) -> Layout:
        return Layout(self.spec)

    @property
    def params(self):
        return self.layout.unflatten(self.theta)


@dataclass(frozen=True)
class ObjectiveValues:
    bic: float
    aic: float
    hqic: float
    caic: float
    aicc: float | None
    mspe: float | None = None
    loglik: float | None = None

    def get(self, name: str) -> float | None:
        return getattr(self, name.lower())

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("loglik", "bic", "aic", "hqic", "caic", "aicc", "mspe")}


INF = float("inf")
FAILED = ObjectiveValues(INF, INF, INF, INF, INF, INF, None)
CRITERIA = ("BIC", "AIC", "HQIC", "CAIC", "AICc")


def information_criteria(loglik: float, k: int, n: int) -> ObjectiveValues:
    """BIC, AIC, HQIC, CAIC and AICc; AICc is ``None`` unless ``n > k + 1``."""
    dev = -2.0 * loglik
    ln_n = math.log(n)
    aic = dev + 2 * k
    aicc = aic + 2.0 * k * (k + 1) / (n - k - 1) if n > k + 1 else None
    return ObjectiveValues(
        bic=dev + k * ln_n,
        aic=aic,
        hqic=dev + 2 * k * math.log(ln_n),
        caic=dev + k * (ln_n + 1.0),
        aicc=aicc,
        loglik=loglik,
    )


# --- Hessian and standard errors ---------------------------------------------------

def numerical_hessian(f, x, grad=None, rel_step: float | None = None) -> np.ndarray:
    """Central finite-difference Hessian of a scalar function.

    With ``grad`` the Hessian is differenced from the gradient; otherwise the
    four-point formula on function values is used.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    H = np.empty((n, n))
    if grad is not None:
        h = (rel_step or 1e-5) * np.maximum(1.0, np.abs(x))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h[j]
            H[:, j] = (np.asarray(grad(x + e)) - np.asarray(grad(x - e))) / (2 * h[j])
        return 0.5 * (H + H.T)
    h = (rel_step or 1e-4) * np.maximum(1.0, np.abs(x))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + 2 * ei) - 2 * f0 + f(x - 2 * ei)) / (4 * h[i] ** 2)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            v = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) \
                / (4 * h[i] * h[j])
            H[i, j] = H[j, i] = v
    return H


def standard_errors(theta, loglik, grad=None) -> np.ndarray | None:
    """``sqrt(diag((-H)^-1))`` at ``theta``; ``None`` if ``-H`` is not positive definite."""
    H = numerical_hessian(loglik, theta, grad)
    if not np.all(np.isfinite(H)):
        return None
    try:
        np.linalg.cholesky(-H)
        cov = np.linalg.inv(-H)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(cov)
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        return None
    return np.sqrt(d)


def _rows(spec: ModelSpecification, theta: np.ndarray, se: np.ndarray | None) -> list[CoefficientRow]:
    lay = Layout(spec)
    rows = []
    for i, (name, kind) in enumerate(zip(lay.names, lay.kinds())):
        est = float(theta[i])
        s = None if se is None else float(se[i])
        if kind in ("spread", "chol_diag"):
            est = abs(est)
        elif kind == "log_alpha":
            est = math.exp(est)
            s = None if s is None else est * s
            name = "nb dispersion (alpha)"
        if kind in ("fixed", "mean") and name != "const":
            tr = spec.factor(name)[1]
        elif kind == "delta":
            tr = spec.factor(name.split(":")[0])[1]
        elif name == "const":
            tr = "no"
        else:
            tr = ""
        z = p = None
        if s is not None and s > 0:
            z = est / s
            p = float(2.0 * ndtr(-abs(z)))
        rows.append(CoefficientRow(name, tr, est, s, z, p, kind))
    return rows


# --- fitting ------------------------------------------------------------------------

def _start(spec: ModelSpecification, train: Dataset, bank: DrawBank, lay: Layout) -> np.ndarray:
    """Fixed-effects Poisson pre-fit for every factor carrying a coefficient."""
    carried = [f for f, l, r in zip(spec.factors, spec.levels, spec.roles)
               if l in (FIXED, RANDOM, CORRELATED, GROUPED) or (l == HETERO and r == MEMBER)]
    fe = ModelSpecification(spec.factors,
                            tuple(FIXED if f in carried else OFF for f in spec.factors),
                            spec.transformations, (None,) * len(spec.factors),
                            (None,) * len(spec.factors), 0)
    sl = SimulatedLikelihood(fe, train, bank)
    ybar = float(np.mean(train.y))
    b0 = np.zeros(len(sl.layout))
    b0[0] = math.log(ybar) if ybar > 0 else -5.0
    n = max(train.n_obs, 1)
    res = minimize(lambda t: -sl.loglik(t) / n, b0, jac=lambda t: -sl.gradient(t) / n,
                   method="L-BFGS-B", options={"maxiter": 200})
    coef = dict(zip(sl.layout.fixed, res.x if np.all(np.isfinite(res.x)) else b0))
    p = lay.unflatten(np.zeros(len(lay)))
    p.fixed = np.array([coef[f] for f in lay.fixed])
    p.means = np.array([coef[f] for f in lay.uncorrelated])
    p.corr_means = np.array([coef[f] for f in lay.correlated])
    p.spreads = np.full(len(lay.uncorrelated), 0.1)
    np.fill_diagonal(p.chol, 0.1)
    if lay.nb:
        p.log_alpha = math.log(0.5)
    return lay.flatten(p)


def _bounds(lay: Layout):
    return [LOG_ALPHA_BOUNDS if k == "log_alpha" else (None, None) for k in lay.kinds()]


def _optimize(fun, x0, settings: FitSettings, bounds):
    """``fun`` returns (objective, gradient)."""
    opts = {"maxiter": settings.max_iter}
    if settings.method == "L-BFGS-B":
        return minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                        options={**opts, "gtol": settings.gtol})
    if settings.method in ("BFGS", "BFGS_2"):
        return minimize(fun, x0, jac=True, method="BFGS", options={**opts, "gtol": settings.gtol})
    first = minimize(lambda t: fun(t)[0], x0, method="Nelder-Mead", options=opts)
    return minimize(fun, first.x, jac=True, method="BFGS",
                    options={**opts, "gtol": settings.gtol})


def fit(spec: ModelSpecification, train: Dataset, settings: FitSettings | None = None,
        draws: DrawBank | None = None) -> FitResult:
    """Maximise the (simulated) log-likelihood of ``spec`` on ``train``.

    Estimation failures are returned as ``converged=False`` results with a
    ``-inf`` log-likelihood rather than raised.
    """
    settings = settings or FitSettings()
    bank = draws or settings.draw_bank()
    n = train.n_obs
    try:
        sl = SimulatedLikelihood(spec, train, bank)
        lay = sl.layout
        x0 = _start(spec, train, bank, lay)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return FitResult(spec, np.zeros(len(Layout(spec))), -INF, False, n, message=str(exc))

    def fun(t):
        v, g = sl.loglik_and_gradient(t)
        if not (np.isfinite(v) and np.all(np.isfinite(g))):
            return _PENALTY, np.zeros_like(t)
        return -v / n, -g / n

    if not np.isfinite(sl.loglik(x0)):
        return FitResult(spec, x0, -INF, False, n, message="non-finite likelihood at start")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        res = _optimize(fun, x0, settings, _bounds(lay))
        theta = np.asarray(res.x, dtype=float)
        sl.clamp_events = 0
        ll = sl.loglik(theta) if np.all(np.isfinite(theta)) else -INF
        clamps = sl.clamp_events
    grad_norm = float(np.max(np.abs(res.jac))) if getattr(res, "jac", None) is not None \
        and len(res.jac) else 0.0
    converged = bool(res.success) or (res.status == 2 and grad_norm <= 1e-3)
    if not np.isfinite(ll):
        converged = False
    result = FitResult(spec, theta, float(ll) if np.isfinite(ll) else -INF, converged, n,
                       clamp_count=clamps, message=str(res.message),
                       iterations=int(getattr(res, "nit", 0)))
    if converged and settings.compute_se:
        attach_standard_errors(result, train, bank)
    else:
        result.rows = _rows(spec, theta, None)
    return result


def attach_standard_errors(result: FitResult, train: Dataset, draws: DrawBank) -> FitResult:
    sl = SimulatedLikelihood(result.spec, train, draws)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        se = standard_errors(result.theta, sl.loglik, sl.gradient)
    result.rows = _rows(result.spec, result.theta, se)
    result.se_available = se is not None
    return result


def predict(result: FitResult, ds: Dataset) -> np.ndarray:
    return SimulatedLikelihood(result.spec, ds, DrawBank(1)).predict(result.theta)


def mspe(result: FitResult, test: Dataset) -> float | None:
    """Mean squared error of the draw-free prediction on ``test``; ``None`` when empty."""
    if test is None or test.n_obs == 0:
        return None
    lam = predict(result, test)
    return float(np.mean((np.asarray(test.y, dtype=float) - lam) ** 2))


@dataclass
class Evaluation:
    spec: ModelSpecification
    fit: FitResult
    objectives: ObjectiveValues


def evaluate(spec: ModelSpecification, train: Dataset, test: Dataset | None,
             settings: FitSettings | None = None, draws: DrawBank | None = None) -> Evaluation:
    """Fit on ``train`` and score: information criteria plus held-out MSPE."""
    result = fit(spec, train, settings, draws)
    if not result.converged:
        return Evaluation(spec, result, FAILED)
    ic = information_criteria(result.loglik, result.n_params, train.n_obs)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            err = mspe(result, test)
    except ValueError:
        err = INF
    if err is not None and not np.isfinite(err):
        return Evaluation(spec, result, FAILED)
    return Evaluation(spec, result, ObjectiveValues(ic.bic, ic.aic, ic.hqic, ic.caic, ic.aicc,
                                                    err, result.loglik))
