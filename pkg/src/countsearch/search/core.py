"""Shared search machinery: hyperparameters, termination, objective, run log."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from ..dataset import Dataset
from ..estimator import Evaluation, FitSettings, evaluate
from ..likelihood import DrawBank
from ..space import ModelSpecification, SearchSpace, validate
from .pareto import ParetoArchive, spea2_sort

PITCH_RULES = ("literal", "classic")


@dataclass
class Hyperparameters:
    """Algorithm settings; defaults follow the reference argument table."""

    # harmony search
    hms: int = 20
    hmcr: float = 0.4
    par: float = 0.4
    mpai: int = 1
    pitch_rule: str = "literal"
    # differential evolution
    ai: int = 1
    cr: float = 0.2
    pop_size: int = 20
    # simulated annealing
    alpha: float = 0.95
    ts: int = 2
    intl_acpt: float = 0.5
    num_intl_slns: int = 25
    crossover_perc: float = 0.0
    # global
    max_iter: int = 1000
    max_time: float = 3600.0
    max_no_improve: int = 50

    def __post_init__(self):
        for name in ("hmcr", "par", "cr", "crossover_perc"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 < self.intl_acpt < 1.0:
            raise ValueError(f"intl_acpt must lie in (0, 1), got {self.intl_acpt}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ("hms", "pop_size", "ts", "num_intl_slns", "max_no_improve"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.mpai < 0 or self.ai < 0:
            raise ValueError("mpai and ai must be non-negative")
        if self.max_iter < 0 or self.max_time <= 0:
            raise ValueError("max_iter must be >= 0 and max_time > 0")
        if self.pitch_rule not in PITCH_RULES:
            raise ValueError(f"pitch_rule must be one of {PITCH_RULES}")

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


# --- termination ----------------------------------------------------------------

@dataclass
class TerminationState:
    start_time: float
    iteration: int = 0
    since_acceptance: int = 0

    def record(self, accepted: bool) -> None:
        self.iteration += 1
        self.since_acceptance = 0 if accepted else self.since_acceptance + 1


def check_termination(state: TerminationState, hp: Hyperparameters,
                      now: float | None = None) -> str | None:
    """``None`` to continue, else the stop reason: time, max_iter or no_improvement."""
    now = time.monotonic() if now is None else now
    if now - state.start_time > hp.max_time:
        return "time"
    if state.iteration >= hp.max_iter:
        return "max_iter"
    if state.since_acceptance >= hp.max_no_improve:
        return "no_improvement"
    return None


# --- objective ------------------------------------------------------------------

class ConstraintBreach(RuntimeError):
    pass


class Objective:
    """Memoized evaluation of specifications on a train/test split.

    ``names`` holds one or two criteria (``"BIC"``, ``"MSPE"``, ...).  Every
    submitted specification is checked against the constraints first; the
    counter ``violations`` stays at zero unless an algorithm misbehaves, in
    which case the specification is refused rather than estimated.
    """

    def __init__(self, space: SearchSpace, train: Dataset, test: Dataset | None,
                 names=("BIC", "MSPE"), settings: FitSettings | None = None,
                 draws: DrawBank | None = None):
        names = tuple(n for n in names if n)
        if not 1 <= len(names) <= 2:
            raise ValueError("one or two objectives are required")
        if "MSPE" in (n.upper() for n in names) and (test is None or test.n_obs == 0):
            raise ValueError("MSPE needs a non-empty test split")
        self.space = space
        self.train = train
        self.test = test
        self.names = names
        self.settings = settings or FitSettings(compute_se=False)
        self.draws = draws or self.settings.draw_bank()
        self.cache: dict[ModelSpecification, Evaluation] = {}
        self.fits = 0
        self.violations = 0

    def values(self, ev: Evaluation) -> tuple[float, ...]:
        out = []
        for n in self.names:
            v = ev.objectives.get(n)
            out.append(math.inf if v is None or not math.isfinite(v) else float(v))
        return tuple(out)

    def __call__(self, spec: ModelSpecification) -> Evaluation:
        if validate(spec, self.space.constraints):
            self.violations += 1
            raise ConstraintBreach(f"refusing invalid specification {spec.code()}")
        ev = self.cache.get(spec)
        if ev is None:
            ev = evaluate(spec, self.train, self.test, self.settings, self.draws)
            self.cache[spec] = ev
            self.fits += 1
        return ev


# --- run bookkeeping --------------------------------------------------------------

def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class SearchResult:
    archive: ParetoArchive
    log: list[dict]
    stop_reason: str
    iterations: int
    evaluations: int
    elapsed: float
    objective_names: tuple[str, ...]
    population: list = field(default_factory=list)

    def ranked(self) -> list[Evaluation]:
        """Archive members ordered by SPEA2 fitness."""
        order = spea2_sort(self.archive.values, [e.spec.code() for e in self.archive.items])
        return [self.archive.items[i] for i in order]

    def log_lines(self) -> list[str]:
        return [json.dumps(r) for r in self.log]


class SearchRun:
    """Owns the archive, the log and the termination state of one search.

    ``evaluate`` is the single door to the estimator; ``on_record`` receives
    each log record together with whether it changed the archive.
    """

    def __init__(self, objective: Objective, hp: Hyperparameters, algorithm: str,
                 on_record: Callable[[dict, bool], None] | None = None,
                 clock: Callable[[], float] = time.monotonic):
        self.objective = objective
        self.hp = hp
        self.algorithm = algorithm
        self.clock = clock
        self.state = TerminationState(clock())
        self.archive = ParetoArchive()
        self.log: list[dict] = []
        self.on_record = on_record
        self.stop_reason: str | None = None

    @property
    def space(self) -> SearchSpace:
        return self.objective.space

    def stopped(self, initial: bool = False) -> bool:
        if self.stop_reason is None:
            if initial:
                # only the time limit applies while the population is built
                if self.clock() - self.state.start_time > self.hp.max_time:
                    self.stop_reason = "time"
            else:
                self.stop_reason = check_termination(self.state, self.hp, self.clock())
        return self.stop_reason is not None

    def evaluate(self, spec: ModelSpecification, phase: str) -> tuple[Evaluation, tuple, bool]:
        ev = self.objective(spec)
        vals = self.objective.values(ev)
        changed = self.archive.insert(ev, vals)
        return ev, vals, changed

    def record(self, ev: Evaluation | None, vals, phase: str, accepted: bool,
               archive_changed: bool, spec: ModelSpecification | None = None) -> None:
        if phase != "init":
            self.state.record(accepted or archive_changed)
        spec = ev.spec if ev is not None else spec
        rec = {
            "iteration": self.state.iteration if phase != "init" else 0,
            "phase": phase,
            "spec": spec.code() if spec is not None else None,
            "loglik": _num(ev.fit.loglik) if ev is not None else None,
            "objectives": ({n: _num(v) for n, v in zip(self.objective.names, vals)}
                           if vals is not None else None),
            "accepted": bool(accepted),
            "archive_size": len(self.archive),
        }
        self.log.append(rec)
        if self.on_record is not None:
            self.on_record(rec, archive_changed)

    def result(self, population=()) -> SearchResult:
        return SearchResult(self.archive, self.log, self.stop_reason or "completed",
                            self.state.iteration, len(self.log),
                            self.clock() - self.state.start_time, self.objective.names,
                            list(population))


def initial_population(run: SearchRun, size: int, rng: np.random.Generator,
                       initial: ModelSpecification | None = None,
                       max_tries: int = 50) -> list[tuple[Evaluation, tuple]]:
    """Evaluate ``size`` distinct specs (``initial`` first when given)."""
    space = run.space
    specs: list[ModelSpecification] = []
    if initial is not None:
        if not space.is_valid(initial):
            initial = space.repair(initial)
        if space.is_valid(initial):
            specs.append(initial)
    tries = 0
    while len(specs) < size:
        s = space.random_specification(rng)
        if s in specs and tries < max_tries * size:
            tries += 1
            continue
        specs.append(s)
    out = []
    for s in specs:
        if run.stopped(initial=True):
            break
        ev, vals, changed = run.evaluate(s, "init")
        run.record(ev, vals, "init", True, changed)
        out.append((ev, vals))
    return out


def sort_members(members: list[tuple[Evaluation, tuple]]) -> list[tuple[Evaluation, tuple]]:
    order = spea2_sort([m[1] for m in members], [m[0].spec.code() for m in members])
    return [members[i] for i in order]


def no_worse(a: tuple, b: tuple) -> bool:
    return all(x <= y for x, y in zip(a, b))


def make_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
