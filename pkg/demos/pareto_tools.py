"""Non-dominated filtering, SPEA2 ranking and the Pareto archive on toy points.

Run with ``python3 demos/pareto_tools.py``.
"""

import numpy as np

from countsearch.search import ParetoArchive, non_dominated_sort, spea2_fitness, spea2_sort

rng = np.random.default_rng(0)
# a noisy trade-off: lowering the first objective tends to raise the second
x = rng.integers(0, 10, size=12)
points = [(float(a), float(10 - a + b)) for a, b in zip(x, rng.integers(0, 4, size=12))]

front = non_dominated_sort(points)
print("points:", points)
print("non-dominated:", [points[i] for i in front])

raw, density = spea2_fitness(points)
for i in spea2_sort(points):
    print(f"{points[i]}  raw={raw[i]:.0f}  density={density[i]:.3f}")

# the archive keeps only mutually non-dominated entries as points stream in
archive = ParetoArchive()
for k, p in enumerate(points):
    changed = archive.insert(f"m{k}", p)
    print(f"insert m{k} {p}: {'kept' if changed else 'rejected'}, size {len(archive)}")
print("archive:", list(zip(archive.items, archive.values)))
