"""Model specifications, analyst constraints and the discrete decision encoding.

A specification assigns every candidate factor a level

    0 off, 1 fixed effect, 2 random parameter, 3 correlated random parameter,
    4 grouped random parameter, 5 heterogeneity-in-means member

plus a transformation, a random-parameter distribution and, at level 5, a
role (``member``: a random parameter whose mean is shifted; ``covariate``: a
variable doing the shifting).  Level-5 factors sharing a distribution form
one heterogeneity group.  The dispersion flag picks Poisson (0) or NB-2 (1).
The intercept is always a fixed effect and is not part of the encoding.

Search algorithms work on index vectors: one index per decision slot into
that slot's ordered list of admissible values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .dataset import TRANSFORMATIONS, canonical_transformation

OFF, FIXED, RANDOM, CORRELATED, GROUPED, HETERO = range(6)
ALL_LEVELS = (0, 1, 2, 3, 4, 5)
DISTRIBUTION_BEARING = (RANDOM, CORRELATED, GROUPED, HETERO)

DISTRIBUTIONS = ("t", "u", "n", "ln_n", "tn_n")
DISTRIBUTION_NAMES = {
    "t": "triangular", "u": "uniform", "n": "normal",
    "ln_n": "ln_normal", "tn_n": "tn_normal",
}
_DIST_ALIASES = {
    "t": "t", "tri": "t", "triangular": "t",
    "u": "u", "uniform": "u",
    "n": "n", "normal": "n",
    "ln": "ln_n", "ln_n": "ln_n", "lognormal": "ln_n", "ln_normal": "ln_n",
    "log-normal": "ln_n", "log_normal": "ln_n",
    "tn": "tn_n", "tn_n": "tn_n", "tn_normal": "tn_n", "truncnormal": "tn_n",
    "truncated_normal": "tn_n",
}

MEMBER, COVARIATE = "member", "covariate"
ROLES = (MEMBER, COVARIATE)

DEFAULT_TRANSFORMATIONS = ("no", "sqrt", "log", "arcsinh")


class ConstraintError(ValueError):
    """Constraints that admit no specification, or malformed constraint input."""


def canonical_distribution(token: str) -> str:
    try:
        return _DIST_ALIASES[token.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown distribution {token!r}") from None


def expand_levels(complexity: int | Iterable[int]) -> tuple[int, ...]:
    """Levels admitted by a ``complexity_level`` value.

    An integer ``c`` admits every level up to ``c``; 6 admits all six levels.
    A list admits exactly its members, with 6 again meaning all.
    """
    if isinstance(complexity, (int, np.integer)):
        c = int(complexity)
        if not 0 <= c <= 6:
            raise ConstraintError(f"complexity level must be in 0..6, got {c}")
        return ALL_LEVELS if c == 6 else tuple(range(c + 1))
    out: set[int] = set()
    for c in complexity:
        c = int(c)
        if c == 6:
            out.update(ALL_LEVELS)
        elif 0 <= c <= 5:
            out.add(c)
        else:
            raise ConstraintError(f"unknown level {c}")
    return tuple(sorted(out))


# --- specifications ----------------------------------------------------------

class HeteroGroup(NamedTuple):
    distribution: str
    members: tuple[str, ...]
    covariates: tuple[str, ...]


@dataclass(frozen=True)
class ModelSpecification:
    """One point of the search space.

    Slots that have no meaning for a factor's level are normalised to
    ``None`` on construction, so equal models compare and hash equal.
    """

    factors: tuple[str, ...]
    levels: tuple[int, ...]
    transformations: tuple[str | None, ...]
    distributions: tuple[str | None, ...]
    roles: tuple[str | None, ...]
    dispersion: int = 0

    def __post_init__(self):
        k = len(self.factors)
        if not (len(self.levels) == len(self.transformations)
                == len(self.distributions) == len(self.roles) == k):
            raise ValueError("specification slot lengths differ")
        levels = tuple(int(v) for v in self.levels)
        tr, di, ro = [], [], []
        for lvl, t, d, r in zip(levels, self.transformations, self.distributions, self.roles):
            if lvl not in ALL_LEVELS:
                raise ValueError(f"unknown level {lvl}")
            tr.append(None if lvl == OFF else canonical_transformation(t or "no"))
            if lvl in DISTRIBUTION_BEARING:
                if d is None:
                    raise ValueError("random levels need a distribution")
                di.append(canonical_distribution(d))
            else:
                di.append(None)
            if lvl == HETERO:
                if r not in ROLES:
                    raise ValueError(f"level 5 needs a role in {ROLES}, got {r!r}")
                ro.append(r)
            else:
                ro.append(None)
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "transformations", tuple(tr))
        object.__setattr__(self, "distributions", tuple(di))
        object.__setattr__(self, "roles", tuple(ro))
        object.__setattr__(self, "dispersion", int(self.dispersion))

    @classmethod
    def fixed_effects(cls, factors: Sequence[str], active: Iterable[str] = (),
                      dispersion: int = 0) -> "ModelSpecification":
        active = set(active)
        k = len(factors)
        return cls(tuple(factors), tuple(FIXED if f in active else OFF for f in factors),
                   ("no",) * k, (None,) * k, (None,) * k, dispersion)

    def with_factor(self, name: str, level: int, transformation: str | None = "no",
                    distribution: str | None = None, role: str | None = None):
        i = self.factors.index(name)
        def put(seq, v):
            seq = list(seq)
            seq[i] = v
            return tuple(seq)
        return ModelSpecification(
            self.factors, put(self.levels, level), put(self.transformations, transformation),
            put(self.distributions, distribution), put(self.roles, role), self.dispersion)

    def names_at(self, level: int, role: str | None = None) -> list[str]:
        return [f for f, l, r in zip(self.factors, self.levels, self.roles)
                if l == level and (role is None or r == role)]

    @property
    def active(self) -> list[str]:
        return [f for f, l in zip(self.factors, self.levels) if l != OFF]

    @property
    def n_active(self) -> int:
        return sum(l != OFF for l in self.levels)

    @property
    def hetero_groups(self) -> list[HeteroGroup]:
        groups = []
        for d in DISTRIBUTIONS:
            members = tuple(f for f, l, dd, r in zip(self.factors, self.levels,
                                                     self.distributions, self.roles)
                            if l == HETERO and dd == d and r == MEMBER)
            covs = tuple(f for f, l, dd, r in zip(self.factors, self.levels,
                                                  self.distributions, self.roles)
                         if l == HETERO and dd == d and r == COVARIATE)
            if members or covs:
                groups.append(HeteroGroup(d, members, covs))
        return groups

    def factor(self, name: str) -> tuple[int, str | None, str | None, str | None]:
        i = self.factors.index(name)
        return self.levels[i], self.transformations[i], self.distributions[i], self.roles[i]

    def code(self) -> str:
        """Compact text form listing active factors, e.g. ``NB|X1:1:no|X2:2:sqrt:n``."""
        parts = ["NB" if self.dispersion else "Poisson"]
        for f, l, t, d, r in zip(self.factors, self.levels, self.transformations,
                                 self.distributions, self.roles):
            if l == OFF:
                continue
            token = f"{f}:{l}:{t}"
            if d is not None:
                token += f":{d}"
            if r is not None:
                token += f":{r}"
            parts.append(token)
        return "|".join(parts)

    @classmethod
    def from_code(cls, text: str, factors: Sequence[str]) -> "ModelSpecification":
        parts = text.split("|")
        dispersion = {"Poisson": 0, "NB": 1}.get(parts[0])
        if dispersion is None:
            raise ValueError(f"bad model family in {text!r}")
        spec = cls.fixed_effects(factors, (), dispersion)
        for token in parts[1:]:
            bits = token.split(":")
            if len(bits) < 3:
                raise ValueError(f"bad factor token {token!r}")
            name, level, tr = bits[0], int(bits[1]), bits[2]
            if name not in spec.factors:
                raise ValueError(f"unknown factor {name!r}")
            dist = bits[3] if len(bits) > 3 else None
            role = bits[4] if len(bits) > 4 else None
            spec = spec.with_factor(name, level, tr, dist, role)
        return spec


# --- constraints -------------------------------------------------------------

@dataclass(frozen=True)
class FactorConstraint:
    levels: tuple[int, ...]
    transformations: tuple[str, ...] = ("no",)
    distributions: tuple[str, ...] = DISTRIBUTIONS
    roles: tuple[str, ...] = ROLES

    def __post_init__(self):
        if not self.levels:
            raise ConstraintError("no admissible level")
        if not self.transformations:
            raise ConstraintError("no admissible transformation")


@dataclass(frozen=True)
class ConstraintSet:
    """Admissible values per factor plus the global model choices."""

    factors: tuple[str, ...]
    per_factor: tuple[FactorConstraint, ...]
    dispersions: tuple[int, ...] = (0, 1)
    max_characteristics: int = 25
    has_group: bool = False

    def __post_init__(self):
        if len(self.factors) != len(self.per_factor):
            raise ValueError("one FactorConstraint per factor required")
        if not self.dispersions:
            raise ConstraintError("no admissible model type")

    def __getitem__(self, name: str) -> FactorConstraint:
        return self.per_factor[self.factors.index(name)]

    def allowed_levels(self, i: int) -> tuple[int, ...]:
        return tuple(l for l in self.per_factor[i].levels if l != GROUPED or self.has_group)

    @classmethod
    def uniform(cls, factors: Sequence[str], levels: Iterable[int] = ALL_LEVELS,
                transformations: Sequence[str] = ("no",),
                distributions: Sequence[str] = DISTRIBUTIONS,
                dispersions: Sequence[int] = (0, 1), max_characteristics: int = 25,
                has_group: bool = False) -> "ConstraintSet":
        fc = FactorConstraint(tuple(sorted(set(levels))),
                              tuple(canonical_transformation(t) for t in transformations),
                              tuple(dict.fromkeys(map(canonical_distribution, distributions))))
        return cls(tuple(factors), (fc,) * len(factors), tuple(dispersions),
                   max_characteristics, has_group)

    @classmethod
    def for_dataset(cls, ds, complexity_level: int | Iterable[int] = 6,
                    transformations: Sequence[str] = DEFAULT_TRANSFORMATIONS,
                    distributions: Sequence[str] = DISTRIBUTIONS,
                    model_types: Sequence[int] = (0, 1),
                    max_characteristics: int = 25,
                    decisions: Mapping[str, Mapping] | None = None) -> "ConstraintSet":
        """Build constraints over ``ds.candidates``.

        Transformations undefined for some value of a column are dropped for
        that column.  ``decisions`` maps factor name to a block with any of
        ``levels``, ``transformations`` and ``distributions``; factors not
        mentioned keep the global choices.
        """
        from .dataset import feasible_transformations

        decisions = dict(decisions or {})
        factors = tuple(ds.candidates)
        unknown = set(decisions) - set(factors)
        if unknown:
            raise ConstraintError(f"unknown factor(s) in constraints: {sorted(unknown)}")
        base_levels = expand_levels(complexity_level)
        global_dists = tuple(dict.fromkeys(map(canonical_distribution, distributions)))
        has_group = ds.group_name is not None
        per = []
        for f in factors:
            block = decisions.get(f, {})
            bad = set(block) - {"levels", "transformations", "distributions"}
            if bad:
                raise ConstraintError(f"unknown constraint key(s) for {f}: {sorted(bad)}")
            if "levels" in block:
                if not block["levels"]:
                    raise ConstraintError(f"{f}: no admissible level")
                levels = expand_levels(block["levels"])
            else:
                levels = base_levels
            usable = tuple(l for l in levels if l != GROUPED or has_group)
            if not usable:
                raise ConstraintError(f"{f}: no admissible level for this dataset")
            trs = block.get("transformations") or transformations
            trs = tuple(t for t in feasible_transformations(ds, f, trs))
            if not trs:
                raise ConstraintError(f"{f}: no transformation is defined for its values")
            dists = block.get("distributions") or global_dists
            dists = tuple(dict.fromkeys(map(canonical_distribution, dists)))
            per.append(FactorConstraint(tuple(levels), trs, dists))
        dispersions = _flatten_model_types(model_types)
        return cls(factors, tuple(per), dispersions, int(max_characteristics), has_group)


def _flatten_model_types(model_types) -> tuple[int, ...]:
    out = []
    for m in model_types:
        if isinstance(m, (list, tuple)):
            out.extend(int(v) for v in m)
        else:
            out.append(int(m))
    bad = [m for m in out if m not in (0, 1)]
    if bad:
        raise ConstraintError(f"model types must be 0 (Poisson) or 1 (NB), got {bad}")
    return tuple(sorted(set(out)))


# --- validation and repair -----------------------------------------------------

class Violation(NamedTuple):
    factor: str | None
    rule: str


def validate(spec: ModelSpecification, constraints: ConstraintSet, ds=None) -> list[Violation]:
    """Every violated (factor, rule) pair; an empty list means the spec is valid."""
    out: list[Violation] = []
    if spec.factors != constraints.factors:
        return [Violation(None, "factors")]
    has_group = constraints.has_group if ds is None else ds.group_name is not None
    for i, f in enumerate(spec.factors):
        fc = constraints.per_factor[i]
        lvl, tr, dist, role = spec.levels[i], spec.transformations[i], \
            spec.distributions[i], spec.roles[i]
        if lvl not in fc.levels:
            out.append(Violation(f, "level"))
        if lvl == GROUPED and not has_group:
            out.append(Violation(f, "group"))
        if tr is not None and tr not in fc.transformations:
            out.append(Violation(f, "transformation"))
        if dist is not None and dist not in fc.distributions:
            out.append(Violation(f, "distribution"))
        if role is not None and role not in fc.roles:
            out.append(Violation(f, "role"))
    correlated = spec.names_at(CORRELATED)
    if len(correlated) == 1:
        out.append(Violation(correlated[0], "correlated"))
    for g in spec.hetero_groups:
        if not g.members or not g.covariates:
            for f in g.members + g.covariates:
                out.append(Violation(f, "hetero"))
    if spec.n_active > constraints.max_characteristics:
        out.append(Violation(None, "max_characteristics"))
    if spec.dispersion not in constraints.dispersions:
        out.append(Violation(None, "dispersion"))
    return out


def _downgrade(spec: ModelSpecification, constraints: ConstraintSet, i: int) -> ModelSpecification | None:
    fc = constraints.per_factor[i]
    allowed = constraints.allowed_levels(i)
    current = spec.levels[i]
    for lvl in range(current - 1, -1, -1):
        if lvl not in allowed:
            continue
        tr = spec.transformations[i] or fc.transformations[0]
        dist = spec.distributions[i] or fc.distributions[0] if lvl in DISTRIBUTION_BEARING else None
        return spec.with_factor(spec.factors[i], lvl, tr, dist, None)
    return None


def repair(spec: ModelSpecification, constraints: ConstraintSet) -> ModelSpecification:
    """Resolve structural violations by deterministic downgrades.

    Lone correlated factors and incomplete heterogeneity groups move to the
    nearest lower admissible level; excess active factors beyond the cap are
    switched off from the last factor backwards.  Violations that cannot be
    fixed this way are left for :func:`validate` to report.
    """
    idx = {f: i for i, f in enumerate(spec.factors)}
    for _ in range(6 * len(spec.factors) + 6):
        changed = None
        for g in spec.hetero_groups:
            if not g.members or not g.covariates:
                for f in g.members + g.covariates:
                    new = _downgrade(spec, constraints, idx[f])
                    if new is not None:
                        changed = new
                        break
            if changed:
                break
        if changed is None:
            corr = spec.names_at(CORRELATED)
            if len(corr) == 1:
                changed = _downgrade(spec, constraints, idx[corr[0]])
        if changed is None and spec.n_active > constraints.max_characteristics:
            for i in range(len(spec.factors) - 1, -1, -1):
                if spec.levels[i] != OFF and OFF in constraints.allowed_levels(i):
                    changed = spec.with_factor(spec.factors[i], OFF)
                    break
        if changed is None:
            return spec
        spec = changed
    return spec


# --- decision encoding ----------------------------------------------------------

class Slot(NamedTuple):
    kind: str          # level | role | transformation | distribution | dispersion
    factor: int        # -1 for the dispersion slot


@dataclass
class SearchSpace:
    """Index arithmetic over the admissible values of each decision slot."""

    constraints: ConstraintSet
    slots: list[Slot] = field(init=False)
    domains: list[tuple] = field(init=False)

    def __post_init__(self):
        c = self.constraints
        k = len(c.factors)
        self.slots, self.domains = [], []
        for i in range(k):
            self.slots.append(Slot("level", i))
            self.domains.append(c.allowed_levels(i))
        for i in range(k):
            self.slots.append(Slot("role", i))
            self.domains.append(c.per_factor[i].roles)
        for i in range(k):
            self.slots.append(Slot("transformation", i))
            self.domains.append(c.per_factor[i].transformations)
        for i in range(k):
            self.slots.append(Slot("distribution", i))
            self.domains.append(c.per_factor[i].distributions)
        self.slots.append(Slot("dispersion", -1))
        self.domains.append(c.dispersions)
        for s, d in zip(self.slots, self.domains):
            if not d:
                raise ConstraintError(f"slot {s.kind} of factor {s.factor} has no admissible value")

    @property
    def factors(self) -> tuple[str, ...]:
        return self.constraints.factors

    @property
    def cardinalities(self) -> np.ndarray:
        return np.array([len(d) for d in self.domains])

    def __len__(self) -> int:
        return len(self.slots)

    def slot_value(self, spec: ModelSpecification, j: int):
        s = self.slots[j]
        if s.kind == "dispersion":
            return spec.dispersion
        attr = {"level": "levels", "role": "roles", "transformation": "transformations",
                "distribution": "distributions"}[s.kind]
        return getattr(spec, attr)[s.factor]

    def is_relevant(self, spec: ModelSpecification, j: int) -> bool:
        s = self.slots[j]
        if s.kind in ("level", "dispersion"):
            return True
        return self.slot_value(spec, j) is not None

    def encode(self, spec: ModelSpecification) -> np.ndarray:
        """Index vector of ``spec``; slots without meaning get index 0."""
        out = np.zeros(len(self.slots), dtype=np.int64)
        for j, dom in enumerate(self.domains):
            v = self.slot_value(spec, j)
            if v is None:
                continue
            try:
                out[j] = dom.index(v)
            except ValueError:
                raise ConstraintError(
                    f"value {v!r} of slot {self.slots[j].kind} "
                    f"({self._factor_name(j)}) is not admissible") from None
        return out

    def _factor_name(self, j: int) -> str:
        i = self.slots[j].factor
        return "model" if i < 0 else self.factors[i]

    def decode(self, index: Sequence[int]) -> ModelSpecification:
        k = len(self.factors)
        vals = [dom[int(i)] for dom, i in zip(self.domains, index)]
        levels = vals[:k]
        roles = vals[k:2 * k]
        trs = vals[2 * k:3 * k]
        dists = vals[3 * k:4 * k]
        return ModelSpecification(self.factors, tuple(levels), tuple(trs), tuple(dists),
                                  tuple(roles), vals[-1])

    def random_index(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([rng.integers(len(d)) for d in self.domains], dtype=np.int64)

    def random_value_index(self, j: int, rng: np.random.Generator) -> int:
        return int(rng.integers(len(self.domains[j])))

    def repair(self, spec: ModelSpecification) -> ModelSpecification:
        return repair(spec, self.constraints)

    def is_valid(self, spec: ModelSpecification) -> bool:
        return not validate(spec, self.constraints)

    def random_specification(self, rng: np.random.Generator, max_tries: int = 200) -> ModelSpecification:
        c = self.constraints
        for _ in range(max_tries):
            spec = self.decode(self.random_index(rng))
            if spec.n_active > c.max_characteristics:
                on = [i for i, l in enumerate(spec.levels)
                      if l != OFF and OFF in c.allowed_levels(i)]
                excess = spec.n_active - c.max_characteristics
                if excess <= len(on):
                    for i in sorted(rng.choice(on, size=excess, replace=False)):
                        spec = spec.with_factor(spec.factors[i], OFF)
            spec = self.repair(spec)
            if self.is_valid(spec):
                return spec
        raise ConstraintError("constraints admit no valid specification")

    def neighbor(self, spec: ModelSpecification, rng: np.random.Generator,
                 max_tries: int = 100) -> ModelSpecification:
        """Move one meaningful slot one step (with wraparound), then repair."""
        base = self.encode(spec)
        movable = [j for j in range(len(self.slots))
                   if len(self.domains[j]) > 1 and self.is_relevant(spec, j)]
        if not movable:
            return spec
        for _ in range(max_tries):
            j = movable[int(rng.integers(len(movable)))]
            step = 1 if rng.random() < 0.5 else -1
            idx = base.copy()
            idx[j] = (idx[j] + step) % len(self.domains[j])
            cand = self.repair(self.decode(idx))
            if cand != spec and self.is_valid(cand):
                return cand
        return spec


def random_specification(constraints: ConstraintSet, seed: int | np.random.Generator) -> ModelSpecification:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return SearchSpace(constraints).random_specification(rng)


def neighbor(spec: ModelSpecification, constraints: ConstraintSet,
             seed: int | np.random.Generator) -> ModelSpecification:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return SearchSpace(constraints).neighbor(spec, rng)


def de_index_update(base: int, first: int, second: int, ai: int, cardinality: int) -> int:
    """``(base + ai * (first - second)) mod cardinality`` with a non-negative result."""
    if cardinality < 1:
        raise ValueError("cardinality must be at least 1")
    return (int(base) + int(ai) * (int(first) - int(second))) % int(cardinality)


# --- manual specifications ----------------------------------------------------------

MANUAL_FIELDS = ("fixed_terms", "rdm_terms", "rdm_cor_terms", "grouped_terms",
                 "hetro_in_means", "transformations", "dispersion")
_TERM_LEVEL = {"fixed_terms": FIXED, "rdm_terms": RANDOM, "rdm_cor_terms": CORRELATED,
               "grouped_terms": GROUPED, "hetro_in_means": HETERO}
INTERCEPT = "const"


def _split_token(token: str, need_dist: bool) -> tuple[str, str | None, str | None]:
    bits = [b.strip() for b in str(token).split(":")]
    name = bits[0]
    dist = canonical_distribution(bits[1]) if len(bits) > 1 and bits[1] else None
    role = bits[2] if len(bits) > 2 else None
    if role is not None and role not in ROLES:
        raise ValueError(f"unknown heterogeneity role {role!r} in {token!r}")
    if need_dist and dist is None:
        raise ValueError(f"term {token!r} needs a distribution, e.g. '{name}:normal'")
    return name, dist, role


def parse_manual_specification(block: Mapping, factors: Sequence[str]) -> ModelSpecification:
    """Build a specification from the ``Manual_Fit`` field layout.

    Terms are ``"name"`` or ``"name:distribution"``.  The ``transformations``
    list lines up with the concatenation of the term lists in field order
    (``const`` included); extra trailing entries must be ``'no'``.  Within
    ``hetro_in_means`` the first term is the mean covariate and the rest are
    random members, unless a term carries an explicit third field
    (``'Z1:normal:covariate'`` / ``'X2:normal:member'``).
    """
    unknown = set(block) - set(MANUAL_FIELDS)
    if unknown:
        raise ValueError(f"unknown manual specification field(s): {sorted(unknown)}")
    spec = ModelSpecification.fixed_effects(factors, (), int(block.get("dispersion", 0) or 0))
    if spec.dispersion not in (0, 1):
        raise ValueError("dispersion must be 0 (Poisson) or 1 (NB)")
    ordered: list[tuple[str, int, str | None, str | None]] = []
    seen: set[str] = set()
    for fieldname in ("fixed_terms", "rdm_terms", "rdm_cor_terms", "grouped_terms",
                      "hetro_in_means"):
        level = _TERM_LEVEL[fieldname]
        terms = list(block.get(fieldname) or [])
        for pos, token in enumerate(terms):
            name, dist, role = _split_token(token, level in DISTRIBUTION_BEARING)
            if name == INTERCEPT:
                if level != FIXED:
                    raise ValueError("the intercept can only be a fixed term")
                ordered.append((name, level, None, None))
                continue
            if name not in factors:
                raise ValueError(f"unknown factor {name!r}")
            if name in seen:
                raise ValueError(f"factor {name!r} appears in more than one term list")
            seen.add(name)
            if level == HETERO and role is None:
                role = COVARIATE if pos == 0 else MEMBER
            ordered.append((name, level, dist, role))
    trs = [canonical_transformation(t) for t in (block.get("transformations") or [])]
    if not trs:
        trs = ["no"] * len(ordered)
    if len(trs) < len(ordered):
        raise ValueError(
            f"transformations list has {len(trs)} entries for {len(ordered)} terms")
    if any(t != "no" for t in trs[len(ordered):]):
        raise ValueError(
            f"transformations list has {len(trs)} entries for {len(ordered)} terms")
    for (name, level, dist, role), tr in zip(ordered, trs):
        if name == INTERCEPT:
            continue
        spec = spec.with_factor(name, level, tr, dist, role)
    return spec


__all__ = [
    "OFF", "FIXED", "RANDOM", "CORRELATED", "GROUPED", "HETERO", "ALL_LEVELS",
    "DISTRIBUTIONS", "DISTRIBUTION_NAMES", "ROLES", "MEMBER", "COVARIATE",
    "TRANSFORMATIONS", "ConstraintError", "ConstraintSet", "FactorConstraint",
    "HeteroGroup", "ModelSpecification", "SearchSpace", "Violation",
    "canonical_distribution", "de_index_update", "expand_levels", "neighbor",
    "parse_manual_specification", "random_specification", "repair", "validate",
]
