"""Heatmap noise versus initial and final tour length.

Perturbs the heat of every candidate edge and shows how the initial tour
degrades while the final tour barely moves.
"""

from hyperns.pipeline import generate_instance, noise_experiment

inst = generate_instance(1000, "uniform", seed=3)
res = noise_experiment(inst, levels=[0.0, 0.1, 0.3], seeds=5)

print("level  init(mean)  final(mean)  final(std)")
for row in res["levels"]:
    print(f"{row['level']:5.2f}  {row['mean_init_len']:10.4f}  {row['mean_final_len']:11.4f}  "
          f"{row['std_final_len']:10.4f}")

print("\nbinned by initial length")
for b in res["bins"]:
    lo, hi = b["range"]
    print(f"bin {b['bin']:2d} [{lo:.2f}, {hi:.2f}] n={b['count']:2d} "
          f"init {b['avg_init_len']:.3f} final {b['avg_final_len']:.3f} time {b['avg_time']:.2f}s")
