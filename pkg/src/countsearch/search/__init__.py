"""Multi-objective metaheuristic search over model specifications."""

from .algorithms import (ALGORITHMS, acceptance_probability, de_offspring, differential_evolution,
                         harmony_search, improvise, initial_temperature, normalized_delta,
                         objective_scales, pick_donors, simulated_annealing)
from .core import (ConstraintBreach, Hyperparameters, Objective, SearchResult, SearchRun,
                   TerminationState, check_termination)
from .pareto import ParetoArchive, dominates, non_dominated_sort, spea2_fitness, spea2_sort

__all__ = [
    "ALGORITHMS", "ConstraintBreach", "Hyperparameters", "Objective", "ParetoArchive",
    "SearchResult", "SearchRun", "TerminationState", "acceptance_probability",
    "check_termination", "de_offspring", "differential_evolution", "dominates",
    "harmony_search", "improvise", "initial_temperature", "non_dominated_sort",
    "normalized_delta", "objective_scales", "pick_donors", "simulated_annealing",
    "spea2_fitness", "spea2_sort",
]
