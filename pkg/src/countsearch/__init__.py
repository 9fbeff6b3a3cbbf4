"""Count-regression specification search: Poisson and NB-2 models with random
parameters, estimated by simulated maximum likelihood and selected by
multi-objective metaheuristics."""

from .dataset import (ColumnRole, CSVParseError, DataError, Dataset, SplitPlan, SplitUnit,
                      assign_roles, load_csv, split, write_csv)
from .estimator import (FitResult, FitSettings, ObjectiveValues, evaluate, fit,
                        information_criteria, mspe)
from .likelihood import DrawBank, SimulatedLikelihood, simulated_loglik
from .space import (ConstraintError, ConstraintSet, ModelSpecification, SearchSpace,
                    parse_manual_specification, repair, validate)

__version__ = "0.1.0"
