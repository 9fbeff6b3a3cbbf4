"""Command-line entry point: ``run``, ``fit`` and ``sweep``.

Exit status 0 on success, 1 for configuration errors, 2 for data errors.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, TextIO

from .config import ConfigError, RunConfig, load_config, loads_yaml, parse_constraints
from .dataset import DataError, Dataset, SplitPlan, assign_roles, load_csv, split
from .estimator import Evaluation, FitSettings, attach_standard_errors, evaluate
from .report import (archive_csv, front_dat, front_svg, pareto_summary, render_fit_table,
                     write_text)
from .search import ALGORITHMS, Objective, SearchResult
from .space import ConstraintSet, ModelSpecification, SearchSpace, parse_manual_specification
from .sweep import sweep, sweep_csv

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


@dataclass
class Prepared:
    cfg: RunConfig
    data: Dataset
    train: Dataset
    test: Dataset
    constraints: ConstraintSet
    space: SearchSpace
    settings: FitSettings
    manual: ModelSpecification | None

    def objective(self) -> Objective:
        return Objective(self.space, self.train, self.test, self.cfg.objectives, self.settings)


def prepare(cfg: RunConfig) -> Prepared:
    """Load data, assign roles, split, and build the constraint set."""
    ds = load_csv(cfg.data, cfg.categorical)
    ds = assign_roles(ds, cfg.model_terms)
    if not ds.candidates:
        raise DataError("no candidate factors left after role assignment")
    train, test = split(ds, SplitPlan(float(cfg.test_percentage), int(cfg.seed)))
    if train.n_obs == 0:
        raise DataError("training split is empty")
    if "MSPE" in cfg.objectives and test.n_obs == 0:
        raise DataError("test split is empty; raise test_percentage or drop MSPE")
    constraints = parse_constraints(cfg.variable_decisions, ds, cfg)
    space = SearchSpace(constraints)
    settings = FitSettings(method=cfg.method_ll, n_draws=int(cfg._r_draws),
                           draw_type=cfg.draw_type, seed=int(cfg.seed), compute_se=False)
    manual = None
    if cfg.Manual_Fit is not None:
        try:
            manual = parse_manual_specification(cfg.Manual_Fit, constraints.factors)
        except ValueError as e:
            raise ConfigError(f"Manual_Fit: {e}") from None
    return Prepared(cfg, ds, train, test, constraints, space, settings, manual)


def run_folder(cfg: RunConfig, label: str, explicit: str | Path | None = None) -> Path:
    if explicit is not None:
        path = Path(explicit)
        path.mkdir(parents=True, exist_ok=True)
        return path
    base = Path(cfg.output_dir) / label
    path, k = base, 1
    while path.exists():
        k += 1
        path = base.with_name(f"{base.name}_{k}")
    path.mkdir(parents=True)
    return path


def _write_setup(p: Prepared, folder: Path) -> None:
    write_text(folder / "config.yaml", p.cfg.dump())
    info = {
        "roles": {name: role.value for name, role in p.data.roles.items()},
        "train_rows": [int(i) for i in p.train.row_index],
        "test_rows": [int(i) for i in p.test.row_index],
    }
    write_text(folder / "split.json", json.dumps(info))


def _fmt_record(rec: dict) -> str:
    objs = rec.get("objectives") or {}
    parts = [f"{k}={v:.4f}" if v is not None else f"{k}=failed" for k, v in objs.items()]
    flag = " accepted" if rec["accepted"] else ""
    return f"[{rec['phase']} {rec['iteration']}] {rec['spec']} {' '.join(parts)}{flag}"


def _elapsed(seconds: float) -> str:
    return f"Elapsed time: {datetime.timedelta(seconds=seconds)}"


def _tables(members: list[Evaluation], p: Prepared, folder: Path) -> None:
    models = folder / "models"
    models.mkdir(exist_ok=True)
    for i, ev in enumerate(members, start=1):
        if ev.fit.converged and not ev.fit.se_available:
            attach_standard_errors(ev.fit, p.train, p.settings.draw_bank())
        write_text(models / f"model_{i:02d}.txt", render_fit_table(ev.fit, ev.objectives))


def run_search(p: Prepared, folder: Path, out: TextIO = sys.stdout,
               clock: Callable[[], float] | None = None) -> SearchResult:
    """Run the configured algorithm and write every artefact into ``folder``."""
    cfg = p.cfg
    verbose = cfg.verbose
    _write_setup(p, folder)
    log_path = folder / "iterations.jsonl"
    log = log_path.open("w", encoding="utf-8")

    def on_record(rec: dict, changed: bool) -> None:
        log.write(json.dumps(rec) + "\n")
        if verbose == 1 or (verbose == 2 and changed):
            print(_fmt_record(rec), file=out)

    objective = p.objective()
    t0 = time.monotonic()
    try:
        res = ALGORITHMS[cfg.algorithm](objective, p.manual, cfg.hp(), seed=int(cfg.seed),
                                        on_record=on_record,
                                        **({} if clock is None else {"clock": clock}))
    finally:
        log.close()
    elapsed = time.monotonic() - t0
    members = res.ranked()
    names = cfg.objectives
    write_text(folder / "pareto.csv", archive_csv(members, names))
    write_text(folder / "pareto_front.dat", front_dat(members, names))
    write_text(folder / "pareto_front.svg", front_svg(members, names))
    _tables(members, p, folder)
    summary = {
        "algorithm": cfg.algorithm, "stop_reason": res.stop_reason,
        "iterations": res.iterations, "evaluations": res.evaluations,
        "fits": objective.fits, "constraint_violations": objective.violations,
        "archive_size": len(res.archive), "elapsed_seconds": elapsed,
    }
    write_text(folder / "summary.json", json.dumps(summary, indent=1))
    if verbose:
        print(_elapsed(elapsed), file=out)
        print(pareto_summary(members), file=out)
        print(f"Run folder: {folder}", file=out)
    return res


def run_fit(p: Prepared, folder: Path | None, out: TextIO = sys.stdout) -> Evaluation:
    """Estimate the single ``Manual_Fit`` model (with standard errors) and report it."""
    if p.manual is None:
        raise ConfigError("fit needs a Manual_Fit block")
    settings = FitSettings(method=p.settings.method, n_draws=p.settings.n_draws,
                           draw_type=p.settings.draw_type, seed=p.settings.seed, compute_se=True)
    test = p.test if p.test.n_obs else None
    ev = evaluate(p.manual, p.train, test, settings)
    if not ev.fit.se_available and ev.fit.converged:
        attach_standard_errors(ev.fit, p.train, settings.draw_bank())
    table = render_fit_table(ev.fit, ev.objectives if ev.fit.converged else None)
    if folder is not None:
        _write_setup(p, folder)
        write_text(folder / "model.txt", table)
    if p.cfg.verbose:
        print(table, end="", file=out)
    return ev


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="countsearch",
                                 description="Count-model specification search.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run the configured search (or the manual fit if no algorithm)"),
                       ("fit", "estimate the Manual_Fit model only")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config")
        sp.add_argument("--out", help="run folder (default: <output_dir>/<config>_<algorithm>_seed<seed>)")
    sp = sub.add_parser("sweep", help="seeded hyperparameter grid")
    sp.add_argument("config")
    sp.add_argument("grid", help="YAML mapping of hyperparameter name to a list of values")
    sp.add_argument("--seeds", type=int, default=5)
    sp.add_argument("--out")
    return ap


def main(argv=None, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg, notes = load_config(args.config)
        if cfg.verbose:
            for note in notes:
                print(f"note: {note}", file=err)
        stem = Path(args.config).stem
        if args.command == "sweep":
            grid_path = Path(args.grid)
            try:
                grid = loads_yaml(grid_path.read_text(encoding="utf-8"))
            except OSError as e:
                raise ConfigError(f"cannot read grid {grid_path}: {e}") from None
            if not isinstance(grid, dict):
                raise ConfigError("grid must be a mapping of hyperparameter to list of values")
            p = prepare(cfg)
            folder = run_folder(cfg, f"{stem}_sweep_{cfg.algorithm}", args.out)
            write_text(folder / "config.yaml", cfg.dump())

            def on_row(row):
                if cfg.verbose:
                    print(", ".join(f"{k}={v}" for k, v in row.items()), file=out)

            rows = sweep(cfg, grid, p.objective(), args.seeds, on_row)
            write_text(folder / "sweep.csv", sweep_csv(rows))
            if cfg.verbose:
                print(f"Sweep results: {folder / 'sweep.csv'}", file=out)
            return EXIT_OK
        p = prepare(cfg)
        if args.command == "fit" or cfg.algorithm is None:
            folder = run_folder(cfg, f"{stem}_fit", args.out)
            run_fit(p, folder, out)
            return EXIT_OK
        folder = run_folder(cfg, f"{stem}_{cfg.algorithm}_seed{cfg.seed}", args.out)
        run_search(p, folder, out)
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=err)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=err)
        return EXIT_DATA
    except ValueError as e:
        # constraint and transformation problems stem from the configuration
        print(f"config error: {e}", file=err)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
