"""Run configuration: a YAML file whose keys copy the reference argument names."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .estimator import CRITERIA, METHODS
from .search.core import PITCH_RULES, Hyperparameters
from .space import DEFAULT_TRANSFORMATIONS, DISTRIBUTIONS, ConstraintError, ConstraintSet


class ConfigError(ValueError):
    pass


class _Loader(yaml.SafeLoader):
    """Safe loader that only reads true/false as booleans, so ``no`` stays a string."""


_Loader.yaml_implicit_resolvers = {
    k: [(tag, rx) for tag, rx in v if tag != "tag:yaml.org,2002:bool"]
    for k, v in yaml.SafeLoader.yaml_implicit_resolvers.items()
}
_Loader.add_implicit_resolver("tag:yaml.org,2002:bool", re.compile(r"^(?:true|True|TRUE|false|False|FALSE)$"),
                              list("tTfF"))


# config key -> Hyperparameters attribute
HYPER_KEYS = {
    "_hms": "hms", "_hmcr": "hmcr", "_par": "par", "_mpai": "mpai", "_pitch_rule": "pitch_rule",
    "_AI": "ai", "_cr": "cr", "_pop_size": "pop_size",
    "alpha": "alpha", "_ts": "ts", "INTL_ACPT": "intl_acpt", "_num_intl_slns": "num_intl_slns",
    "_crossover_perc": "crossover_perc",
    "_max_iter": "max_iter", "_max_time": "max_time", "_max_no_improve": "max_no_improve",
}
_HYPER_ALIASES = {"STEPS_PER_TEMP": "_ts"}
ALGORITHM_NAMES = ("hs", "de", "sa")


def normalize_hyper(hyper: Mapping[str, Any], algorithm: str | None) -> dict:
    """Canonical hyperparameter keys; DE reads ``_crossover_perc`` as its rate ``_cr``."""
    out: dict[str, Any] = {}
    for key, value in hyper.items():
        key = _HYPER_ALIASES.get(key, key)
        if key == "_crossover_perc" and algorithm == "de":
            key = "_cr"
        if key not in HYPER_KEYS:
            raise ConfigError(f"unknown hyperparameter {key!r}")
        if key in out:
            raise ConfigError(f"hyperparameter {key!r} given twice")
        out[key] = value
    return out


OBJECTIVES = CRITERIA + ("MSPE",)


@dataclass
class RunConfig:
    data: str
    model_terms: dict = field(default_factory=lambda: {"Y": "Y"})
    categorical: list = field(default_factory=list)
    _obj_1: str = "BIC"
    _obj_2: str | None = "MSPE"
    test_percentage: float = 0.3
    complexity_level: Any = 6
    model_types: list = field(default_factory=lambda: [[0, 1]])
    _distributions: list = field(default_factory=lambda: list(DISTRIBUTIONS))
    _transformations: list = field(default_factory=lambda: list(DEFAULT_TRANSFORMATIONS))
    algorithm: str | None = "hs"
    hyperparameters: dict = field(default_factory=dict)
    method_ll: str = "L-BFGS-B"
    _max_characteristics: int = 25
    _r_draws: int = 200
    draw_type: str = "halton"
    verbose: int = 1
    seed: int = 0
    output_dir: str = "runs"
    Manual_Fit: dict | None = None
    variable_decisions: dict | None = None

    @property
    def objectives(self) -> tuple[str, ...]:
        return tuple(o for o in (self._obj_1, self._obj_2) if o)

    def hp(self) -> Hyperparameters:
        return Hyperparameters(**{HYPER_KEYS[k]: v for k, v in self.hyperparameters.items()})

    def to_dict(self) -> dict:
        d = asdict(self)
        hyper = d.pop("hyperparameters")
        d.update(hyper)
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


_FIELDS = {f.name for f in fields(RunConfig)} - {"hyperparameters"}
_ALIASES = {"Manuel_Fit": "Manual_Fit", "test_complexity": "complexity_level"}


def _objective(name, key) -> str | None:
    if name is None:
        return None
    for o in OBJECTIVES:
        if str(name).lower() == o.lower():
            return o
    raise ConfigError(f"{key}: unknown objective {name!r}; choose from {OBJECTIVES}")


def parse_config(raw: Mapping, base_dir: str | Path = ".") -> tuple[RunConfig, list[str]]:
    """Validate a raw mapping; returns the config and any deprecation notes."""
    if not isinstance(raw, Mapping):
        raise ConfigError("config must be a mapping of argument names to values")
    notes: list[str] = []
    kw: dict[str, Any] = {}
    hyper: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _ALIASES:
            if key == "Manuel_Fit":
                notes.append("'Manuel_Fit' is deprecated; use 'Manual_Fit'")
            target = _ALIASES[key]
            if target in kw or target in raw:
                raise ConfigError(f"both {key!r} and {target!r} given")
            kw[target] = value
        elif key in HYPER_KEYS or key in _HYPER_ALIASES:
            hyper[key] = value
        elif key in _FIELDS:
            kw[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if "data" not in kw:
        raise ConfigError("missing required key 'data'")
    data = Path(str(kw["data"]))
    if not data.is_absolute():
        data = (Path(base_dir) / data).resolve()
    kw["data"] = str(data)
    out = Path(str(kw.get("output_dir", "runs")))
    # data paths follow the config file; run folders follow the working directory
    kw["output_dir"] = str(out.resolve())
    algorithm = kw.get("algorithm", "hs")
    hyper = normalize_hyper(hyper, str(algorithm).lower() if algorithm else None)
    cfg = RunConfig(**kw, hyperparameters=hyper)
    _check(cfg)
    return cfg, notes


def _check(cfg: RunConfig) -> None:
    cfg._obj_1 = _objective(cfg._obj_1, "_obj_1")
    if cfg._obj_1 is None:
        raise ConfigError("_obj_1 is required")
    cfg._obj_2 = _objective(cfg._obj_2, "_obj_2")
    if not isinstance(cfg.model_terms, Mapping) or "Y" not in cfg.model_terms:
        raise ConfigError("model_terms must be a mapping naming the response 'Y'")
    cfg.model_terms = dict(cfg.model_terms)
    if not 0.0 <= float(cfg.test_percentage) < 1.0:
        raise ConfigError("test_percentage must lie in [0, 1)")
    if cfg._obj_2 == "MSPE" and float(cfg.test_percentage) == 0.0:
        raise ConfigError("MSPE needs test_percentage > 0")
    if cfg.algorithm is not None:
        cfg.algorithm = str(cfg.algorithm).lower()
        if cfg.algorithm not in ALGORITHM_NAMES:
            raise ConfigError(f"algorithm must be one of {ALGORITHM_NAMES} or null")
    if cfg.method_ll not in METHODS:
        raise ConfigError(f"method_ll must be one of {METHODS}")
    if cfg.verbose not in (0, 1, 2):
        raise ConfigError("verbose must be 0, 1 or 2")
    if cfg.draw_type not in ("halton", "pseudorandom"):
        raise ConfigError("draw_type must be 'halton' or 'pseudorandom'")
    if int(cfg._r_draws) < 1:
        raise ConfigError("_r_draws must be at least 1")
    if "_pitch_rule" in cfg.hyperparameters and cfg.hyperparameters["_pitch_rule"] not in PITCH_RULES:
        raise ConfigError(f"_pitch_rule must be one of {PITCH_RULES}")
    if cfg.Manual_Fit is not None and not isinstance(cfg.Manual_Fit, Mapping):
        raise ConfigError("Manual_Fit must be a mapping")
    if cfg.variable_decisions is not None and not isinstance(cfg.variable_decisions, Mapping):
        raise ConfigError("variable_decisions must be a mapping")
    try:
        cfg.hp()
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def load_config(path: str | Path) -> tuple[RunConfig, list[str]]:
    path = Path(path)
    try:
        raw = yaml.load(path.read_text(encoding="utf-8"), Loader=_Loader)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config {path}: {e}") from None
    return parse_config(raw or {}, path.parent)


def loads_yaml(text: str):
    return yaml.load(text, Loader=_Loader)


def parse_constraints(block: Mapping | None, ds, cfg: RunConfig | None = None) -> ConstraintSet:
    """Analyst constraints over ``ds``; factors absent from ``block`` stay free."""
    cfg = cfg or RunConfig(data="")
    try:
        return ConstraintSet.for_dataset(
            ds, complexity_level=cfg.complexity_level,
            transformations=cfg._transformations, distributions=cfg._distributions,
            model_types=cfg.model_types, max_characteristics=cfg._max_characteristics,
            decisions=block or {})
    except ValueError as e:
        raise ConfigError(str(e)) from None
