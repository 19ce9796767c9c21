"""One destroy-and-repair round, printed step by step.

A small hand-placed instance where the tour takes a needless detour
between two groups of points.
"""

import numpy as np

from hyperns.instance import Instance, Tour
from hyperns.tns import build_destroy_set, compress_segments, expand, repair

names = ["A", "C", "T", "G", "F", "B", "H", "N", "U", "M", "V", "D", "X1", "X2"]
xy = {"A": (0, 0), "C": (1, 0), "T": (-0.3, 0.1), "G": (-0.3, -0.1), "F": (-0.4, 0),
      "B": (1.3, 0.1), "H": (1.3, -0.1), "N": (1.4, 0), "U": (-2, 1), "M": (3, 1),
      "V": (-2, -1), "D": (3, -1), "X1": (0.5, 6), "X2": (0.5, -6)}
idx = {k: i for i, k in enumerate(names)}
inst = Instance([xy[k] for k in names])
walk = ["U", "T", "G", "A", "C", "B", "M", "X1", "V", "F", "H", "N", "D", "X2"]
tour = Tour(inst, [idx[k] for k in walk])


def label(vs):
    return " ".join(names[int(v)] for v in vs)


print("tour:", label(tour.order), f"length {tour.length:.4f}")

deleted, affected = build_destroy_set(tour, (idx["A"], idx["C"]), m=3)
print("freed vertices:", label(sorted(affected)))
print("deleted edges:", ", ".join(f"{names[a]}-{names[b]}" for a, b in deleted))

sub = compress_segments(tour, deleted)
print(f"subproblem: {sub.n} vertices", label(sub.vertices))
for (u, v), seg in sub.segments.items():
    print(f"  fixed {names[sub.vertices[u]]}-{names[sub.vertices[v]]} stands for", label(seg))

rep = repair(sub, tour, seed=0, kicks=20)
new = Tour(inst, rep.order)
print("repaired:", label(new.order), f"length {new.length:.4f} (tracked {rep.length:.4f})")
assert np.isclose(new.length, rep.length)
# Expanding the untouched subproblem cycle gives back the original tour.
same = Tour(inst, expand(sub, sub.seed_order())).edge_set() == tour.edge_set()
print("seed configuration expands to the original tour:", same)
