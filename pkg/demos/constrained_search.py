"""Search model specifications on the bundled benchmark under analyst constraints.

Run with ``python3 demos/constrained_search.py [hs|de|sa]``.  The benchmark has
eight candidate factors; X1 is a fixed effect, X2 a normal random parameter
and X3 has a mean shifted by Z1.  The constraint block restricts which
levels and distributions each of X1, X2, X3, Z1 and Z2 may take, so every
candidate the algorithm proposes stays inside that block.  A short run
(about a minute) is enough to see the archive fill with specs that contain
the true factors.
"""

import sys

from countsearch.dataset import SplitPlan, split
from countsearch.estimator import FitSettings, evaluate
from countsearch.report import pareto_summary
from countsearch.search import ALGORITHMS, Hyperparameters, Objective
from countsearch.space import ConstraintSet, ModelSpecification, SearchSpace
from countsearch.synthetic import search_benchmark

algorithm = sys.argv[1] if len(sys.argv) > 1 else "hs"

ds = search_benchmark()
train, test = split(ds, SplitPlan(test_fraction=0.3, seed=0))

block = {
    "X1": {"levels": [0, 1], "transformations": ["no"], "distributions": []},
    "X2": {"levels": [1, 2, 5], "transformations": ["no"], "distributions": ["n", "t"]},
    "X3": {"levels": [0, 2, 6], "transformations": ["no"], "distributions": ["n", "ln"]},
    "Z1": {"levels": [0, 5], "transformations": ["no"], "distributions": ["n"]},
    "Z2": {"levels": [0, 2, 5], "transformations": ["no"], "distributions": ["ln"]},
}
constraints = ConstraintSet.for_dataset(ds, transformations=["no"], decisions=block)
settings = FitSettings(n_draws=50, compute_se=False)
objective = Objective(SearchSpace(constraints), train, test, ("BIC", "MSPE"), settings)

null = evaluate(ModelSpecification.fixed_effects(constraints.factors), train, test, settings)
print(f"intercept-only BIC {null.objectives.bic:.2f}")


def show(rec, changed):
    if changed:
        print(f"[{rec['iteration']:3d}] {rec['phase']:6s} {rec['objectives']} {rec['spec']}")


result = ALGORITHMS[algorithm](objective, hp=Hyperparameters(max_iter=60, hms=10, pop_size=10,
                                                             num_intl_slns=10),
                               seed=1, on_record=show)
print(f"stopped: {result.stop_reason} after {result.iterations} iterations, "
      f"{objective.fits} fits, {objective.violations} constraint violations")
for ev in result.ranked():
    print(f"BIC {ev.objectives.bic:9.2f}  MSPE {ev.objectives.mspe:6.3f}  {ev.spec.code()}")
print(pareto_summary(result.ranked()))
