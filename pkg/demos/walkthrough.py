"""Stage-by-stage run on a 2000-city uniform instance.

Runs each stage by hand instead of calling `solve`, printing what it
produced along the way.
"""

import time

import numpy as np

from hyperns.heatmap import build_heatmap_graph
from hyperns.hypertour import hyper_tour
from hyperns.initialization import initialize_tour, nearest_neighbor_tour
from hyperns.pipeline import generate_instance
from hyperns.subtour import optimize_subtours
from hyperns.tns import TnsConfig, run_tns

inst = generate_instance(2000, "uniform", seed=7)
print(inst)

# Sparse heatmap: each vertex keeps its two most promising edges.
t = time.perf_counter()
graph = build_heatmap_graph(inst, p=100, gamma=30, k=2)
print(f"heatmap: {graph.num_edges()} edges from {graph.stats['candidate_sets']} candidate sets "
      f"({time.perf_counter() - t:.2f}s)")

# Bridges split the heatmap graph into tight clusters; their centroids get a tour.
clustering, ht = hyper_tour(graph, seed=0, kicks=50)
sizes = np.array(clustering.sizes)
print(f"clusters: {len(sizes)} (largest {sizes.max()}, singletons {(sizes == 1).sum()}), "
      f"passes {clustering.iterations}")

init = initialize_tour(inst, ht, clustering, l_s=100, seed=0)
nn = nearest_neighbor_tour(inst)
print(f"initial tour {init.tour.length:.3f} vs nearest neighbour {nn.length:.3f}; "
      f"{len(init.worth_deletion)} edges cross clusters")

tns = run_tns(inst, init.tour, init.worth_deletion, TnsConfig(m=100), seed=0)
print(f"targeted search: {tns.tour.length:.3f} after {tns.iterations} rounds ({tns.stop_reason}), "
      f"largest subproblem {tns.max_subproblem} vertices, stats held {tns.max_entries} entries")

sub = optimize_subtours(tns.tour, l_s=100, i3=2, seed=0, kicks=20)
for i, (before, after) in enumerate(sub.passes, 1):
    print(f"sub-tour pass {i}: {before:.4f} -> {after:.4f}")
print(f"final {sub.tour.length:.4f}")
