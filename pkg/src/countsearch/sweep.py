"""Seeded hyperparameter sweeps: every grid point run with several seeds."""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from typing import Callable, Mapping, Sequence

import numpy as np

from .config import HYPER_KEYS, ConfigError, RunConfig, normalize_hyper
from .search import ALGORITHMS, Hyperparameters, Objective
from .search.algorithms import objective_scales


def plan(grid: Mapping[str, Sequence], n_seeds: int, base_seed: int = 0,
         algorithm: str | None = None) -> list[tuple[dict, int]]:
    """Cartesian product of the grid, crossed with ``n_seeds`` consecutive seeds."""
    if n_seeds < 1:
        raise ConfigError("n_seeds must be at least 1")
    grid = normalize_hyper(grid, algorithm)
    keys = list(grid)
    for k in keys:
        if isinstance(grid[k], (str, bytes)) or not isinstance(grid[k], Sequence) or not grid[k]:
            raise ConfigError(f"grid entry {k!r} must be a non-empty list")
    out = []
    for values in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, values))
        for s in range(n_seeds):
            out.append((point, base_seed + s))
    return out


def reference_scales(objective: Objective, seed: int, size: int = 25) -> tuple[np.ndarray, np.ndarray]:
    """Median and IQR of each objective over ``size`` seeded random specifications."""
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(size):
        ev = objective(objective.space.random_specification(rng))
        vals.append(objective.values(ev))
    V = np.asarray(vals, dtype=float)
    med = np.array([np.median(c[np.isfinite(c)]) if np.isfinite(c).any() else 0.0 for c in V.T])
    return med, objective_scales(vals)


def weighted_sum(values: Sequence[float], centre: np.ndarray, scale: np.ndarray) -> float:
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        return math.inf
    return float(np.sum((v - centre) / scale))


def sweep(cfg: RunConfig, grid: Mapping[str, Sequence], objective: Objective,
          n_seeds: int = 5, on_row: Callable[[dict], None] | None = None) -> list[dict]:
    """One row per (grid point, seed): hyperparameters, best weighted sum, archive size."""
    if cfg.algorithm is None:
        raise ConfigError("a sweep needs an algorithm")
    runs = plan(grid, n_seeds, cfg.seed, cfg.algorithm)
    algorithm = ALGORITHMS[cfg.algorithm]
    hp_points = []
    for point, _ in runs:
        merged = {**cfg.hyperparameters, **point}
        try:
            hp_points.append(Hyperparameters(**{HYPER_KEYS[k]: v for k, v in merged.items()}))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid grid point {point}: {e}") from None
    centre, scale = reference_scales(objective, cfg.seed)
    rows = []
    for (point, seed), hp in zip(runs, hp_points):
        t0 = time.monotonic()
        res = algorithm(objective, None, hp, seed=seed)
        best = min((weighted_sum(v, centre, scale) for v in res.archive.values), default=math.inf)
        row = {**point, "seed": seed, "best_weighted_sum": best,
               "archive_size": len(res.archive), "iterations": res.iterations,
               "elapsed": round(time.monotonic() - t0, 3)}
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
