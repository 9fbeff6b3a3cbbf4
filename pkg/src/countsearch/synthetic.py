"""Seeded synthetic count datasets with known generating parameters."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .dataset import ColumnRole, Dataset, assign_roles

BENCHMARK_CSV = Path(__file__).with_name("data") / "synthetic_counts.csv"


def from_arrays(columns: Mapping[str, np.ndarray], terms: Mapping[str, object]) -> Dataset:
    """Dataset from in-memory columns with roles taken from ``terms``."""
    cols = {k: np.asarray(v, dtype=float) for k, v in columns.items()}
    raw = Dataset(cols, {k: ColumnRole.CANDIDATE for k in cols})
    return assign_roles(raw, terms)


def poisson_data(n: int = 2000, beta=(0.5, -0.3, 0.8), seed: int = 0) -> Dataset:
    """Poisson rows with ``log mu = beta0 + beta1*X1 + ...``, X standard normal."""
    rng = np.random.default_rng(seed)
    k = len(beta) - 1
    X = rng.normal(size=(n, k))
    y = rng.poisson(np.exp(beta[0] + X @ np.asarray(beta[1:])))
    cols = {"Y": y, **{f"X{j + 1}": X[:, j] for j in range(k)}}
    return from_arrays(cols, {"Y": "Y"})


def negbin_data(n: int = 3000, beta=(0.7, 0.4, -0.5), alpha: float = 0.6,
                seed: int = 0) -> Dataset:
    """NB-2 rows (variance ``mu + alpha*mu^2``) via the gamma-Poisson mixture."""
    rng = np.random.default_rng(seed)
    k = len(beta) - 1
    X = rng.normal(size=(n, k))
    mu = np.exp(beta[0] + X @ np.asarray(beta[1:]))
    y = rng.poisson(mu * rng.gamma(1.0 / alpha, alpha, size=n))
    cols = {"Y": y, **{f"X{j + 1}": X[:, j] for j in range(k)}}
    return from_arrays(cols, {"Y": "Y"})


def panel_rp_data(n_panels: int = 500, per_panel: int = 4, intercept: float = 0.5,
                  mean: float = 0.5, sd: float = 0.3, seed: int = 0) -> Dataset:
    """Panel Poisson data with one normally distributed coefficient on X1, drawn per panel."""
    rng = np.random.default_rng(seed)
    n = n_panels * per_panel
    panel = np.repeat(np.arange(n_panels), per_panel)
    b = rng.normal(mean, sd, size=n_panels)[panel]
    x = rng.normal(size=n)
    y = rng.poisson(np.exp(intercept + b * x))
    return from_arrays({"Y": y, "ID": panel, "X1": x}, {"Y": "Y", "panels": "ID"})


BENCHMARK_TRUTH = {
    "intercept": 0.3,
    "X1": 0.6,                       # fixed
    "X2": (0.5, 0.4),                # normal random parameter: mean, sd
    "X3": (0.3, 0.5, 0.3),           # hetero in means: base, delta on Z1, sd
}


def search_benchmark(n_panels: int = 200, per_panel: int = 5, seed: int = 7) -> Dataset:
    """Eight candidates, three truly active.

    X1 is a fixed effect, X2 a normal random parameter and X3 a normal
    random parameter whose mean shifts with Z1.  X4 to X6 and Z2 are noise.
    Coefficients vary across panels; the panel column is ``ID``.
    """
    rng = np.random.default_rng(seed)
    n = n_panels * per_panel
    panel = np.repeat(np.arange(n_panels), per_panel)
    cols = {f"X{j}": rng.normal(0.0, 0.7, size=n) for j in range(1, 7)}
    cols["Z1"] = rng.binomial(1, 0.5, size=n).astype(float)
    cols["Z2"] = rng.normal(0.0, 0.7, size=n)
    t = BENCHMARK_TRUTH
    b2 = rng.normal(t["X2"][0], t["X2"][1], size=n_panels)[panel]
    u3 = rng.normal(0.0, 1.0, size=n_panels)[panel]
    b3 = t["X3"][0] + t["X3"][1] * cols["Z1"] + t["X3"][2] * u3
    eta = t["intercept"] + t["X1"] * cols["X1"] + b2 * cols["X2"] + b3 * cols["X3"]
    y = rng.poisson(np.exp(eta))
    return from_arrays({"Y": y, "ID": panel, **cols}, {"Y": "Y", "panels": "ID"})
