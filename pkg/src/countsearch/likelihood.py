"""Simulated log-likelihood of Poisson and NB-2 count models with random parameters.

Coefficients of random factors vary by draw:

    beta = mean + sum(delta * z) + spread * g(u)          (levels 2, 4, 5)
    beta_block = means + L @ g(u_block)                    (level 3)

where ``g`` maps a uniform draw to the standardised law of the factor's
distribution and ``L`` is lower triangular.  Log-normal factors take
``exp`` of the expression.  Draws are shared within a panel; grouped
factors share a draw across all rows of a group.  The panel (or group, when
grouped factors are present) likelihood is the draw average of the product
of row probabilities, computed in log space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import digamma, gammaln, ndtr, ndtri

from .dataset import Dataset, apply_transformation
from .space import (COVARIATE, CORRELATED, FIXED, GROUPED, HETERO, MEMBER, RANDOM,
                    DISTRIBUTION_NAMES, ModelSpecification)

ETA_BOUND = 30.0
TRUNCATION = 1.96
HALTON_SKIP = 50


# --- draws -------------------------------------------------------------------

def _primes(count: int) -> list[int]:
    out: list[int] = []
    n = 2
    while len(out) < count:
        if all(n % p for p in out if p * p <= n):
            out.append(n)
        n += 1
    return out


def radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    """Van der Corput radical inverse of non-negative integers in ``base``."""
    i = np.asarray(indices, dtype=np.int64).copy()
    out = np.zeros(i.shape)
    f = 1.0 / base
    while np.any(i > 0):
        out += f * (i % base)
        i //= base
        f /= base
    return out


def make_draws(n_units: int, n_draws: int, n_dims: int, generator: str = "halton",
               seed: int = 0, first_prime: int = 0) -> np.ndarray:
    """Uniform draws of shape ``(n_units, n_draws, n_dims)`` in the open unit interval.

    Halton draws use prime ``first_prime + d`` (0-based prime index) for
    dimension ``d``, drop the first 50 points, and give each unit a
    consecutive run of ``n_draws`` points.  ``seed`` only affects the
    pseudorandom generator.
    """
    if generator == "halton":
        primes = _primes(first_prime + n_dims)[first_prime:]
        idx = np.arange(HALTON_SKIP, HALTON_SKIP + n_units * n_draws)
        cols = [radical_inverse(idx, p) for p in primes]
        u = np.stack(cols, axis=-1) if cols else np.empty((n_units * n_draws, 0))
        return u.reshape(n_units, n_draws, n_dims)
    if generator == "pseudorandom":
        rng = np.random.default_rng(seed)
        u = rng.random((n_units, n_draws, n_dims))
        return np.clip(u, 1e-12, 1 - 1e-12)
    raise ValueError(f"unknown draw generator {generator!r}")


class DrawBank:
    """Per-factor draws shared by every specification fitted on one dataset.

    Factor ``k`` always reads the same draw columns (panel-level and
    group-level streams use distinct Halton bases), so objective differences
    between specifications are not draw noise.
    """

    def __init__(self, n_draws: int = 200, generator: str = "halton", seed: int = 0,
                 truncation: float = TRUNCATION):
        self.n_draws = int(n_draws)
        self.generator = generator
        self.seed = int(seed)
        self.truncation = truncation
        self._cache: dict = {}

    def uniforms(self, kind: str, factor: int, n_units: int) -> np.ndarray:
        key = (kind, factor, n_units)
        if key not in self._cache:
            stream = 2 * factor + (1 if kind == "group" else 0)
            if self.generator == "halton":
                u = make_draws(n_units, self.n_draws, 1, "halton", first_prime=stream)
            else:
                u = make_draws(n_units, self.n_draws, 1, self.generator,
                               seed=self.seed * 1009 + stream)
            self._cache[key] = u[:, :, 0]
        return self._cache[key]

    def standardized(self, kind: str, factor: int, n_units: int, code: str) -> np.ndarray:
        key = (kind, factor, n_units, code)
        if key not in self._cache:
            self._cache[key] = standardized_draw(self.uniforms(kind, factor, n_units),
                                                 code, self.truncation)
        return self._cache[key]


# --- marginal transforms ---------------------------------------------------------

def _check_unit(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("uniform draws must lie strictly inside (0, 1)")
    return u


def standardized_draw(u, code: str, truncation: float = TRUNCATION) -> np.ndarray:
    """Map uniforms to the zero-centred law of ``code`` (unit scale)."""
    u = _check_unit(u)
    if code in ("n", "ln_n"):
        return ndtri(u)
    if code == "u":
        return 2.0 * u - 1.0
    if code == "t":
        return np.where(u < 0.5, np.sqrt(2.0 * u) - 1.0, 1.0 - np.sqrt(2.0 * (1.0 - u)))
    if code == "tn_n":
        lo = ndtr(-truncation)
        return ndtri(lo + u * (ndtr(truncation) - lo))
    raise ValueError(f"unknown distribution code {code!r}")


def marginal_transform(u, code: str, mean: float, spread: float,
                       truncation: float = TRUNCATION):
    """Coefficient value for uniform draw ``u`` under distribution ``code``."""
    g = standardized_draw(u, code, truncation)
    value = mean + abs(spread) * g
    out = np.exp(value) if code == "ln_n" else value
    return out if np.ndim(out) else float(out)


def correlated_coefficients(means: np.ndarray, chol: np.ndarray, std_draws: np.ndarray,
                            codes=None) -> np.ndarray:
    """``means + L @ z`` for a correlated block, with ``|diag(L)|`` applied.

    ``std_draws`` has the block dimension last; log-normal members are
    exponentiated.
    """
    L = np.tril(np.asarray(chol, dtype=float))
    d = np.diag_indices_from(L)
    L[d] = np.abs(L[d])
    beta = np.asarray(means) + std_draws @ L.T
    if codes is not None:
        for j, c in enumerate(codes):
            if c == "ln_n":
                beta[..., j] = np.exp(beta[..., j])
    return beta


# --- probability mass ---------------------------------------------------------

def conditional_mean(x, beta, offset=0.0, bound: float = ETA_BOUND):
    """``exp(x . beta + offset)`` with the linear predictor clamped to +-bound."""
    eta = np.dot(np.asarray(x, dtype=float), np.asarray(beta, dtype=float)) + offset
    return np.exp(np.clip(eta, -bound, bound))


def poisson_logpmf(y, lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("Poisson mean must be positive")
    y = np.asarray(y, dtype=float)
    out = -lam + y * np.log(lam) - gammaln(y + 1.0)
    return out if np.ndim(out) else float(out)


def negbin_logpmf(y, lam, alpha):
    """NB-2 log mass: variance ``lam + alpha * lam**2``."""
    lam = np.asarray(lam, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(lam <= 0) or np.any(alpha <= 0):
        raise ValueError("NB mean and dispersion must be positive")
    y = np.asarray(y, dtype=float)
    r = 1.0 / alpha
    al = alpha * lam
    out = (gammaln(y + r) - gammaln(r) - gammaln(y + 1.0)
           - r * np.log1p(al) + y * (np.log(al) - np.log1p(al)))
    return out if np.ndim(out) else float(out)


# --- parameter layout ---------------------------------------------------------

@dataclass
class ParameterVector:
    fixed: np.ndarray          # intercept first
    means: np.ndarray          # uncorrelated random parameters
    corr_means: np.ndarray
    spreads: np.ndarray        # raw; |value| is the scale
    chol: np.ndarray           # lower triangular, raw diagonal
    delta: np.ndarray          # one per (member, covariate) pair
    log_alpha: float | None = None


class Layout:
    """Deterministic flattening of a specification's parameters.

    Order: fixed (intercept first), random means, correlated means, random
    spreads, Cholesky entries (row-major lower triangle), heterogeneity
    shifts, then log dispersion for NB models.
    """

    def __init__(self, spec: ModelSpecification):
        self.spec = spec
        self.fixed = ["const"] + spec.names_at(FIXED)
        self.uncorrelated = [f for f, l, r in zip(spec.factors, spec.levels, spec.roles)
                             if l in (RANDOM, GROUPED) or (l == HETERO and r == MEMBER)]
        self.correlated = spec.names_at(CORRELATED)
        self.pairs = [(m, c) for g in spec.hetero_groups
                      for m in g.members for c in g.covariates]
        self.pairs.sort(key=lambda p: (spec.factors.index(p[0]), spec.factors.index(p[1])))
        self.nb = bool(spec.dispersion)
        nc = len(self.correlated)
        self.tril = np.tril_indices(nc)
        sizes = [len(self.fixed), len(self.uncorrelated), nc, len(self.uncorrelated),
                 len(self.tril[0]), len(self.pairs), int(self.nb)]
        bounds = np.cumsum([0] + sizes)
        self._slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        self.size = int(bounds[-1])

    def __len__(self) -> int:
        return self.size

    def _dist(self, name: str) -> str:
        return self.spec.factor(name)[2]

    @property
    def names(self) -> list[str]:
        out = list(self.fixed)
        out += self.uncorrelated
        out += self.correlated
        out += [f"{f} (Std. Dev.) {DISTRIBUTION_NAMES[self._dist(f)]}" for f in self.uncorrelated]
        for i, j in zip(*self.tril):
            a, b = self.correlated[i], self.correlated[j]
            out.append(f"{a} (Std. Dev.) {DISTRIBUTION_NAMES[self._dist(a)]}" if i == j
                       else f"{a} x {b} (Chol.)")
        out += [f"{c}: hetro mean of {m}" for m, c in self.pairs]
        if self.nb:
            out.append("nb dispersion (log alpha)")
        return out

    def kinds(self) -> list[str]:
        """Role of every flattened entry: fixed/mean/spread/chol_diag/chol/delta/log_alpha."""
        out = ["fixed"] * len(self.fixed) + ["mean"] * (len(self.uncorrelated) + len(self.correlated))
        out += ["spread"] * len(self.uncorrelated)
        out += ["chol_diag" if i == j else "chol" for i, j in zip(*self.tril)]
        out += ["delta"] * len(self.pairs)
        out += ["log_alpha"] * int(self.nb)
        return out

    def unflatten(self, theta) -> ParameterVector:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {theta.shape}")
        s = self._slices
        nc = len(self.correlated)
        chol = np.zeros((nc, nc))
        chol[self.tril] = theta[s[4]]
        return ParameterVector(theta[s[0]].copy(), theta[s[1]].copy(), theta[s[2]].copy(),
                               theta[s[3]].copy(), chol, theta[s[5]].copy(),
                               float(theta[s[6]][0]) if self.nb else None)

    def flatten(self, p: ParameterVector) -> np.ndarray:
        parts = [p.fixed, p.means, p.corr_means, p.spreads, np.asarray(p.chol)[self.tril],
                 p.delta, [p.log_alpha] if self.nb else []]
        return np.concatenate([np.asarray(x, dtype=float).ravel() for x in parts])


# --- the likelihood evaluator -------------------------------------------------

class SimulatedLikelihood:
    """Log-likelihood of one specification on one dataset.

    Rows are kept sorted by integration unit so unit sums reduce to
    ``np.add.reduceat``.
    """

    def __init__(self, spec: ModelSpecification, ds: Dataset, draws: DrawBank | None = None):
        self.spec = spec
        self.layout = Layout(spec)
        self.draws = draws or DrawBank()
        lay = self.layout
        factor_index = {f: i for i, f in enumerate(spec.factors)}

        def col(name):
            return apply_transformation(ds.column(name), spec.factor(name)[1])

        n = ds.n_obs
        panel_unit = ds.panel_ids if ds.panel_ids is not None else np.arange(n)
        n_panel_units = ds.n_panels if ds.panel_ids is not None else n
        grouped = [f for f in lay.uncorrelated if spec.factor(f)[0] == GROUPED]
        if grouped:
            unit = ds.group_ids
        else:
            unit = panel_unit
        order = np.argsort(unit, kind="stable")
        self.order = order
        unit = unit[order]
        starts = np.flatnonzero(np.r_[True, unit[1:] != unit[:-1]]) if n else np.array([], int)
        self.unit_starts = starts
        self.n = n
        self.y = np.asarray(ds.y, dtype=float)[order]
        self.lgy = gammaln(self.y + 1.0)
        off = ds.offset
        self.offset = np.zeros(n) if off is None else np.asarray(off, dtype=float)[order]
        self.Xf = np.column_stack([np.ones(n)] + [col(f)[order] for f in lay.fixed[1:]])
        self.Xr = (np.column_stack([col(f)[order] for f in lay.uncorrelated])
                   if lay.uncorrelated else np.empty((n, 0)))
        self.Xc = (np.column_stack([col(f)[order] for f in lay.correlated])
                   if lay.correlated else np.empty((n, 0)))
        self.Z = (np.column_stack([col(c)[order] for _, c in lay.pairs])
                  if lay.pairs else np.empty((n, 0)))
        self.pair_member = np.array([lay.uncorrelated.index(m) for m, _ in lay.pairs], dtype=int)
        self.codes_r = [spec.factor(f)[2] for f in lay.uncorrelated]
        self.codes_c = [spec.factor(f)[2] for f in lay.correlated]
        self.n_random = len(lay.uncorrelated) + len(lay.correlated)
        self._ln_r = np.array([c == "ln_n" for c in self.codes_r], dtype=bool)
        self._ln_c = np.array([c == "ln_n" for c in self.codes_c], dtype=bool)
        self.unit_of_row = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, n]))

        self._factor_index = factor_index
        self._panel_sorted = panel_unit[order]
        self._n_panel_units = n_panel_units
        self._group_sorted = None if ds.group_ids is None else ds.group_ids[order]
        self._n_groups = ds.n_groups
        self.clamp_events = 0

    @cached_property
    def Gr(self) -> np.ndarray:
        lay, spec = self.layout, self.spec
        out = np.empty((self.n, self.draws.n_draws, len(lay.uncorrelated)))
        for j, f in enumerate(lay.uncorrelated):
            k = self._factor_index[f]
            if spec.factor(f)[0] == GROUPED:
                g = self.draws.standardized("group", k, self._n_groups, self.codes_r[j])
                out[:, :, j] = g[self._group_sorted]
            else:
                g = self.draws.standardized("panel", k, self._n_panel_units, self.codes_r[j])
                out[:, :, j] = g[self._panel_sorted]
        return out

    @cached_property
    def Gc(self) -> np.ndarray:
        out = np.empty((self.n, self.draws.n_draws, len(self.layout.correlated)))
        for j, f in enumerate(self.layout.correlated):
            g = self.draws.standardized("panel", self._factor_index[f],
                                        self._n_panel_units, self.codes_c[j])
            out[:, :, j] = g[self._panel_sorted]
        return out

    # coefficient construction

    def random_means(self, p: ParameterVector) -> np.ndarray:
        """Row-specific means of the uncorrelated random factors, shape (n, d)."""
        m = np.broadcast_to(p.means, (self.n, len(p.means))).copy()
        for q, j in enumerate(self.pair_member):
            m[:, j] += p.delta[q] * self.Z[:, q]
        return m

    def betas(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """Simulated coefficients: (n, R, d_uncorrelated) and (n, R, d_correlated)."""
        p = self.layout.unflatten(theta)
        m = self.random_means(p)
        Br = m[:, None, :] + np.abs(p.spreads) * self.Gr
        for j, c in enumerate(self.codes_r):
            if c == "ln_n":
                Br[:, :, j] = np.exp(Br[:, :, j])
        Bc = correlated_coefficients(p.corr_means, p.chol, self.Gc, self.codes_c)
        return Br, Bc

    def _logpmf(self, eta, alpha):
        clipped = np.clip(eta, -ETA_BOUND, ETA_BOUND)
        self.clamp_events += int(np.count_nonzero(clipped != eta))
        lam = np.exp(clipped)
        y = self.y if eta.ndim == 1 else self.y[:, None]
        lgy = self.lgy if eta.ndim == 1 else self.lgy[:, None]
        if alpha is None:
            return -lam + y * clipped - lgy
        r = 1.0 / alpha
        nb_const = gammaln(self.y + r) - gammaln(r) - self.lgy
        if eta.ndim > 1:
            nb_const = nb_const[:, None]
        al = alpha * lam
        l1 = np.log1p(al)
        return nb_const - r * l1 + y * (np.log(alpha) + clipped - l1)

    def linear_predictor(self, theta) -> np.ndarray:
        p = self.layout.unflatten(theta)
        eta = self.Xf @ p.fixed + self.offset
        if not self.n_random:
            return eta
        Br, Bc = self.betas(theta)
        eta = eta[:, None] + np.einsum("nrd,nd->nr", Br, self.Xr) \
            + np.einsum("nrd,nd->nr", Bc, self.Xc)
        return eta

    def loglik(self, theta) -> float:
        p = self.layout.unflatten(theta)
        alpha = None if p.log_alpha is None else float(np.exp(p.log_alpha))
        eta = self.linear_predictor(theta)
        ll = self._logpmf(eta, alpha)
        if ll.ndim == 1:
            return float(ll.sum())
        per_unit = np.add.reduceat(ll, self.unit_starts, axis=0)
        top = per_unit.max(axis=1, keepdims=True)
        top = np.where(np.isfinite(top), top, 0.0)
        lme = np.log(np.mean(np.exp(per_unit - top), axis=1)) + top[:, 0]
        return float(lme.sum())

    def _dlogpmf(self, eta, alpha):
        """Derivatives of the log mass in eta and in log alpha (``None`` for Poisson).

        Rows whose predictor sits on the clamp get zero slope in eta.
        """
        inside = (eta > -ETA_BOUND) & (eta < ETA_BOUND)
        lam = np.exp(np.clip(eta, -ETA_BOUND, ETA_BOUND))
        y = self.y if eta.ndim == 1 else self.y[:, None]
        if alpha is None:
            return (y - lam) * inside, None
        r = 1.0 / alpha
        al = alpha * lam
        resid = (y - lam) / (1.0 + al)
        d_la = (np.log1p(al) - digamma(y + r) + digamma(r)) / alpha + resid
        return resid * inside, d_la

    def loglik_and_gradient(self, theta) -> tuple[float, np.ndarray]:
        """Log-likelihood and its exact gradient in the flattened parameters.

        With random factors the score of each unit is the draw-average of the
        per-draw scores, weighted by each draw's share of the unit likelihood.
        """
        lay = self.layout
        p = lay.unflatten(theta)
        alpha = None if p.log_alpha is None else float(np.exp(p.log_alpha))
        grad = np.zeros(len(lay))
        sl = lay._slices
        if not self.n_random:
            eta = self.Xf @ p.fixed + self.offset
            ll = float(self._logpmf(eta, alpha).sum())
            d_eta, d_la = self._dlogpmf(eta, alpha)
            grad[sl[0]] = self.Xf.T @ d_eta
            if d_la is not None:
                grad[sl[6]] = d_la.sum()
            return ll, grad

        Br, Bc = self.betas(theta)
        eta = (self.Xf @ p.fixed + self.offset)[:, None] \
            + np.einsum("nrd,nd->nr", Br, self.Xr) + np.einsum("nrd,nd->nr", Bc, self.Xc)
        per_row = self._logpmf(eta, alpha)
        per_unit = np.add.reduceat(per_row, self.unit_starts, axis=0)
        top = per_unit.max(axis=1, keepdims=True)
        top = np.where(np.isfinite(top), top, 0.0)
        e = np.exp(per_unit - top)
        tot = e.sum(axis=1, keepdims=True)
        ll = float((np.log(tot[:, 0] / e.shape[1]) + top[:, 0]).sum())
        w = (e / tot)[self.unit_of_row]                       # (n, R) draw weights
        d_eta, d_la = self._dlogpmf(eta, alpha)
        s = w * d_eta

        grad[sl[0]] = self.Xf.T @ s.sum(axis=1)
        if self.Xr.shape[1]:
            # slope of each coefficient in its linear argument
            D = self.Xr[:, None, :] * np.where(self._ln_r, Br, 1.0)
            sD = s[:, :, None] * D
            grad[sl[1]] = sD.sum(axis=(0, 1))
            grad[sl[3]] = np.einsum("nrd,nrd->d", sD, self.Gr) * np.sign(p.spreads)
            if len(p.delta):
                per_row_mean = sD.sum(axis=1)                      # (n, d)
                grad[sl[5]] = np.sum(per_row_mean[:, self.pair_member] * self.Z, axis=0)
        if self.Xc.shape[1]:
            D = self.Xc[:, None, :] * np.where(self._ln_c, Bc, 1.0)
            sD = s[:, :, None] * D
            grad[sl[2]] = sD.sum(axis=(0, 1))
            dL = np.einsum("nri,nrk->ik", sD, self.Gc)
            dL[np.diag_indices_from(dL)] *= np.sign(np.diag(p.chol))
            grad[sl[4]] = dL[lay.tril]
        if d_la is not None:
            grad[sl[6]] = np.sum(w * d_la)
        return ll, grad

    def gradient(self, theta) -> np.ndarray:
        return self.loglik_and_gradient(theta)[1]

    def predict(self, theta) -> np.ndarray:
        """Draw-free conditional mean with random factors at their distribution means.

        Returned in the dataset's original row order.
        """
        p = self.layout.unflatten(theta)
        eta = self.Xf @ p.fixed + self.offset
        if len(p.means):
            m = self.random_means(p)
            s = np.abs(p.spreads)
            for j, c in enumerate(self.codes_r):
                m[:, j] = np.exp(m[:, j] + 0.5 * s[j] ** 2) if c == "ln_n" else m[:, j]
            eta = eta + np.sum(m * self.Xr, axis=1)
        if len(p.corr_means):
            L = np.tril(p.chol)
            d = np.diag_indices_from(L)
            L[d] = np.abs(L[d])
            var = np.sum(L ** 2, axis=1)
            cm = np.array([np.exp(mu + 0.5 * v) if c == "ln_n" else mu
                           for mu, v, c in zip(p.corr_means, var, self.codes_c)])
            eta = eta + self.Xc @ cm
        lam = np.exp(np.clip(eta, -ETA_BOUND, ETA_BOUND))
        out = np.empty_like(lam)
        out[self.order] = lam
        return out


def simulated_loglik(spec: ModelSpecification, theta, ds: Dataset,
                     draws: DrawBank | None = None) -> float:
    return SimulatedLikelihood(spec, ds, draws).loglik(theta)


def build_beta(spec: ModelSpecification, theta, ds: Dataset,
               draws: DrawBank | None = None) -> dict[str, np.ndarray]:
    """Per-row, per-draw coefficient of every active factor, keyed by name.

    Fixed factors give arrays of shape (n,), random ones (n, R); rows are in
    the dataset's original order.
    """
    sl = SimulatedLikelihood(spec, ds, draws)
    p = sl.layout.unflatten(theta)
    inv = np.empty_like(sl.order)
    inv[sl.order] = np.arange(len(sl.order))
    out = {"const": np.full(ds.n_obs, p.fixed[0])}
    for name, b in zip(sl.layout.fixed[1:], p.fixed[1:]):
        out[name] = np.full(ds.n_obs, b)
    Br, Bc = sl.betas(theta)
    for j, name in enumerate(sl.layout.uncorrelated):
        out[name] = Br[inv, :, j]
    for j, name in enumerate(sl.layout.correlated):
        out[name] = Bc[inv, :, j]
    return out
