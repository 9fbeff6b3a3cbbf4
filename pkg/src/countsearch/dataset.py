"""Tabular count data: loading, column roles, splitting and column transformations."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed input data or inconsistent role assignments."""


class CSVParseError(DataError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        super().__init__(message)


class ColumnRole(str, enum.Enum):
    RESPONSE = "Response"
    OFFSET = "Offset"
    GROUP = "Group"
    PANEL = "Panel"
    CANDIDATE = "Candidate"
    EXCLUDED = "Excluded"


_SINGLE_ROLES = (ColumnRole.RESPONSE, ColumnRole.OFFSET, ColumnRole.GROUP, ColumnRole.PANEL)


@dataclass(frozen=True)
class Dataset:
    """Columns keyed by name, each with a role.

    Group and panel columns hold dense integer ids once roles are assigned;
    ``label_maps`` records the original label of every id.  ``row_index``
    tracks the rows of the originally loaded file, so subsets can be traced
    back to it.
    """

    columns: dict[str, np.ndarray]
    roles: dict[str, ColumnRole]
    label_maps: dict[str, list] = field(default_factory=dict)
    row_index: np.ndarray | None = None

    def __post_init__(self):
        if self.row_index is None:
            object.__setattr__(self, "row_index", np.arange(self.n_obs))

    @property
    def n_obs(self) -> int:
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def _role_column(self, role: ColumnRole) -> str | None:
        for name, r in self.roles.items():
            if r is role:
                return name
        return None

    @property
    def response_name(self) -> str | None:
        return self._role_column(ColumnRole.RESPONSE)

    @property
    def offset_name(self) -> str | None:
        return self._role_column(ColumnRole.OFFSET)

    @property
    def group_name(self) -> str | None:
        return self._role_column(ColumnRole.GROUP)

    @property
    def panel_name(self) -> str | None:
        return self._role_column(ColumnRole.PANEL)

    @property
    def y(self) -> np.ndarray:
        name = self.response_name
        if name is None:
            raise DataError("no response column assigned")
        return self.columns[name]

    @property
    def offset(self) -> np.ndarray | None:
        name = self.offset_name
        return None if name is None else self.columns[name]

    @property
    def group_ids(self) -> np.ndarray | None:
        name = self.group_name
        return None if name is None else self.columns[name]

    @property
    def panel_ids(self) -> np.ndarray | None:
        name = self.panel_name
        return None if name is None else self.columns[name]

    @property
    def n_groups(self) -> int:
        name = self.group_name
        return 0 if name is None else len(self.label_maps[name])

    @property
    def n_panels(self) -> int:
        name = self.panel_name
        return self.n_obs if name is None else len(self.label_maps[name])

    @property
    def candidates(self) -> list[str]:
        return [n for n, r in self.roles.items() if r is ColumnRole.CANDIDATE]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"column not found: {name!r}") from None

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        if not names:
            return np.empty((self.n_obs, 0))
        return np.column_stack([np.asarray(self.column(n), dtype=float) for n in names])

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        cols = {k: v[rows] for k, v in self.columns.items()}
        return replace(self, columns=cols, row_index=self.row_index[rows])


def _parse_float(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("nan")
    return value


def load_csv(path: str | Path, categorical: Iterable[str] = ()) -> Dataset:
    """Read a comma-delimited file with a header row.

    Columns named in ``categorical`` keep their string labels; every other
    column must be numeric.  Missing cells are rejected, never imputed.  A
    column called ``Offset`` is given the Offset role straight away.
    """
    categorical = set(categorical)
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise CSVParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise CSVParseError(f"{path}: duplicate column names in header")
    unknown = categorical - set(header)
    if unknown:
        raise DataError(f"categorical column(s) not found: {sorted(unknown)}")
    body = [r for r in rows[1:] if r]
    raw: dict[str, list[str]] = {h: [] for h in header}
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise CSVParseError(
                f"row {i}: expected {len(header)} fields, found {len(row)}", row=i
            )
        for name, cell in zip(header, row):
            raw[name].append(cell.strip())

    columns: dict[str, np.ndarray] = {}
    for name in header:
        cells = raw[name]
        for i, cell in enumerate(cells, start=1):
            if cell == "":
                raise CSVParseError(f"missing value at row {i}, column {name!r}", i, name)
        if name in categorical:
            columns[name] = np.array(cells, dtype=object)
            continue
        values = np.empty(len(cells))
        for i, cell in enumerate(cells, start=1):
            try:
                values[i - 1] = _parse_float(cell)
            except ValueError:
                raise CSVParseError(
                    f"non-numeric value {cell!r} at row {i}, column {name!r}", i, name
                ) from None
        columns[name] = values

    roles = {
        name: ColumnRole.OFFSET if name == "Offset" else ColumnRole.CANDIDATE
        for name in header
    }
    return Dataset(columns=columns, roles=roles)


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Write all columns back out; floats use ``repr`` so a reload is exact."""
    path = Path(path)
    names = ds.names
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(ds.n_obs):
            out = []
            for n in names:
                v = ds.columns[n][i]
                out.append(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))
            writer.writerow(out)


def _dense_ids(values: np.ndarray) -> tuple[np.ndarray, list]:
    labels: list = []
    lookup: dict = {}
    ids = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        key = v.item() if isinstance(v, np.generic) else v
        if key not in lookup:
            lookup[key] = len(labels)
            labels.append(key)
        ids[i] = lookup[key]
    return ids, labels


_TERM_ROLES = {
    "Y": ColumnRole.RESPONSE,
    "group": ColumnRole.GROUP,
    "groups": ColumnRole.GROUP,
    "panels": ColumnRole.PANEL,
    "panel": ColumnRole.PANEL,
    "Offset": ColumnRole.OFFSET,
    "offset": ColumnRole.OFFSET,
}


def assign_roles(ds: Dataset, terms: Mapping[str, object]) -> Dataset:
    """Assign roles from a ``model_terms`` style mapping.

    Recognised keys are ``Y``, ``group``, ``panels`` and ``Offset`` (``None``
    values are skipped) plus ``exclude``, a list of columns dropped from the
    candidate pool.
    """
    roles = {n: (ColumnRole.CANDIDATE if r is not ColumnRole.OFFSET else r)
             for n, r in ds.roles.items()}
    assigned: dict[str, ColumnRole] = {}
    exclude = terms.get("exclude") or []
    if isinstance(exclude, str):
        exclude = [exclude]
    for key, col in terms.items():
        if key == "exclude" or col is None:
            continue
        if key not in _TERM_ROLES:
            raise DataError(f"unknown model term {key!r}")
        role = _TERM_ROLES[key]
        if col not in ds.columns:
            raise DataError(f"column not found: {col!r}")
        if role in assigned.values():
            raise DataError(f"duplicate role assignment for {role.value}")
        if col in assigned:
            raise DataError(
                f"column {col!r} assigned both {assigned[col].value} and {role.value}"
            )
        assigned[col] = role
    if ColumnRole.RESPONSE not in assigned.values():
        raise DataError("model terms must name the response column 'Y'")
    if ColumnRole.OFFSET in assigned.values():
        # an explicitly named offset replaces an auto-detected one
        for n, r in roles.items():
            if r is ColumnRole.OFFSET and n not in assigned:
                roles[n] = ColumnRole.EXCLUDED
    for col in exclude:
        if col not in ds.columns:
            raise DataError(f"column not found: {col!r}")
        if col in assigned:
            raise DataError(f"column {col!r} cannot be both excluded and {assigned[col].value}")
        roles[col] = ColumnRole.EXCLUDED
    roles.update(assigned)

    columns = dict(ds.columns)
    label_maps = {}
    for name, role in roles.items():
        values = columns[name]
        if role in (ColumnRole.GROUP, ColumnRole.PANEL):
            columns[name], label_maps[name] = _dense_ids(values)
        elif role is ColumnRole.EXCLUDED:
            continue
        elif values.dtype == object:
            raise DataError(
                f"column {name!r} is categorical; exclude it or encode it numerically"
            )
    y = columns[_role_name(roles, ColumnRole.RESPONSE)]
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise DataError("response must hold non-negative integer counts")
    for role in _SINGLE_ROLES:
        if sum(r is role for r in roles.values()) > 1:
            raise DataError(f"more than one {role.value} column")
    return Dataset(columns=columns, roles=roles, label_maps=label_maps,
                   row_index=ds.row_index)


def _role_name(roles: Mapping[str, ColumnRole], role: ColumnRole) -> str:
    return next(n for n, r in roles.items() if r is role)


class SplitUnit(str, enum.Enum):
    OBSERVATION = "Observation"
    PANEL = "Panel"
    GROUP = "Group"


@dataclass(frozen=True)
class SplitPlan:
    test_fraction: float = 0.3
    seed: int = 0
    unit: SplitUnit | None = None  # None: Panel when a panel column exists


def split(ds: Dataset, plan: SplitPlan = SplitPlan()) -> tuple[Dataset, Dataset]:
    """Partition rows into (train, test), whole units at a time."""
    if not 0.0 <= plan.test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in [0, 1), got {plan.test_fraction}")
    unit = plan.unit
    if unit is None:
        unit = SplitUnit.PANEL if ds.panel_name is not None else SplitUnit.OBSERVATION
    unit = SplitUnit(unit)
    if unit is SplitUnit.OBSERVATION:
        unit_of_row = np.arange(ds.n_obs)
    else:
        ids = ds.panel_ids if unit is SplitUnit.PANEL else ds.group_ids
        if ids is None:
            raise DataError(f"split unit {unit.value} needs a {unit.value.lower()} column")
        unit_of_row = ids
    units = np.unique(unit_of_row)
    n_test = int(math.floor(plan.test_fraction * len(units) + 0.5))
    rng = np.random.default_rng(plan.seed)
    test_units = np.sort(rng.permutation(units)[:n_test])
    in_test = np.isin(unit_of_row, test_units)
    return ds.subset(np.flatnonzero(~in_test)), ds.subset(np.flatnonzero(in_test))


# --- transformations -------------------------------------------------------

TRANSFORMATIONS = ("no", "sqrt", "log", "arcsinh", "exp")
_TRANSFORM_ALIASES = {"nil": "no", "none": "no"}
_EXP_LIMIT = 700.0


class TransformationDomainError(ValueError):
    pass


def canonical_transformation(code: str) -> str:
    code = _TRANSFORM_ALIASES.get(code, code)
    if code not in TRANSFORMATIONS:
        raise ValueError(f"unknown transformation {code!r}")
    return code


def transformation_feasible(x: np.ndarray, code: str) -> bool:
    """True when ``code`` is defined for every value of ``x``."""
    code = canonical_transformation(code)
    x = np.asarray(x, dtype=float)
    if code == "sqrt":
        return bool(np.all(x >= 0))
    if code == "log":
        return bool(np.all(x > 0))
    if code == "exp":
        return bool(np.all(x <= _EXP_LIMIT))
    return True


def apply_transformation(x: np.ndarray, code: str) -> np.ndarray:
    code = canonical_transformation(code)
    x = np.asarray(x, dtype=float)
    if code == "no":
        return x
    if not transformation_feasible(x, code):
        raise TransformationDomainError(f"{code} is undefined for some values")
    return {"sqrt": np.sqrt, "log": np.log, "arcsinh": np.arcsinh, "exp": np.exp}[code](x)


def feasible_transformations(ds: Dataset, name: str,
                             codes: Sequence[str] = TRANSFORMATIONS) -> list[str]:
    x = ds.column(name)
    return [c for c in map(canonical_transformation, codes) if transformation_feasible(x, c)]
