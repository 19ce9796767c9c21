"""Command-line entry point: solve, gen, bench, noise-exp."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .hypertour import write_hypertour_dump
from .instance import load_tsplib, write_tour, write_tsplib
from .pipeline import (DISTRIBUTIONS, Config, benchmark, generate_instance, noise_experiment,
                       read_refs, solve, write_json)


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=int, default=100, help="candidate set size")
    p.add_argument("--gamma", type=int, default=30, help="grid cell capacity")
    p.add_argument("--k", type=int, default=2, help="heatmap edges kept per vertex")
    p.add_argument("--k-cov", type=int, default=10, help="neighbours in the coverage universe")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--ls", type=int, default=100, help="chunk and sub-tour length")
    p.add_argument("--m", type=int, default=100, help="neighbours freed per destroy")
    p.add_argument("--alpha", type=float, default=1000.0)
    p.add_argument("--i3", type=int, default=2, help="sub-tour passes")
    p.add_argument("--iteration-cap", type=int, default=None)
    p.add_argument("--init", choices=("hyper", "greedy", "random"), default="hyper")
    p.add_argument("--heatmap", choices=("distance", "file"), default="distance")
    p.add_argument("--heatmap-path", default=None)
    p.add_argument("--tsplib-rounding", action="store_true")
    p.add_argument("--intersection", action="store_true",
                   help="free only neighbours shared by both endpoints")
    p.add_argument("--random-starts", action="store_true")


def _config(a: argparse.Namespace) -> Config:
    return Config(p=a.p, gamma=a.gamma, k=a.k, k_cov=a.k_cov, tau=a.tau, l_s=a.ls, m=a.m,
                  alpha=a.alpha, i3=a.i3, seed=a.seed, iteration_cap=a.iteration_cap,
                  init_mode=a.init, heatmap_provider=a.heatmap, heatmap_path=a.heatmap_path,
                  tsplib_rounding=a.tsplib_rounding, union=not a.intersection,
                  random_starts=a.random_starts)


def _cmd_solve(a) -> int:
    inst = load_tsplib(a.file, tsplib_rounding=a.tsplib_rounding)
    cfg = _config(a)

    def trace(rec):
        it, e, l_old, l_new, rel = rec
        print(f"round {it} edge {e[0]}-{e[1]} {l_old!r} -> {l_new!r} rel {rel:.3e}", file=sys.stderr)

    dump = [] if a.dump_hypertour else None
    tour, rep = solve(inst, cfg, ref_len=a.ref_len, on_round=trace if a.trace else None, hypertour_out=dump)
    if a.trace:
        for i, (before, after) in enumerate(rep.subtour_passes, 1):
            print(f"subtour pass {i} {before!r} -> {after!r}", file=sys.stderr)
    out = a.out or str(Path(a.file).with_suffix(".tour"))
    write_tour(tour, out)
    if dump:
        write_hypertour_dump(a.dump_hypertour, *dump)
    if a.report:
        write_json(rep.to_dict(include_timings=a.timings), a.report)
    msg = f"{inst.name}: n={inst.n} init={rep.init_len:.6f} final={rep.final_len:.6f}"
    if rep.gap is not None:
        msg += f" gap={100 * rep.gap:.3f}%"
    print(msg)
    return 0


def _cmd_gen(a) -> int:
    inst = generate_instance(a.n, a.dist, a.seed)
    write_tsplib(inst, a.out, comment=f"{a.dist} n={a.n} seed={a.seed}")
    return 0


def _cmd_bench(a) -> int:
    refs = read_refs(a.refs) if a.refs else {}
    result = benchmark(a.dir, _config(a), refs, a.jobs)
    write_json(result, a.report)
    if a.csv:
        _write_csv(result["rows"], a.csv)
    agg = result["aggregate"]
    print(f"{agg['instances']} instances, {agg['failed']} failed, mean length {agg['mean_length']}")
    return 0


def _write_csv(rows, path) -> None:
    import csv

    cols = ["file", "instance", "n", "init_len", "final_len", "gap", "i1", "i2", "peak_edge_stats",
            "time", "error"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def _cmd_noise(a) -> int:
    inst = load_tsplib(a.file, tsplib_rounding=a.tsplib_rounding)
    levels = [float(x) for x in a.levels.split(",") if x.strip()]
    result = noise_experiment(inst, levels, a.seeds, _config(a))
    write_json(result, a.report)
    for row in result["levels"]:
        print(f"noise {row['level']}: final {row['mean_final_len']:.4f} +- {row['std_final_len']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperns", description="Large-scale 2-D Euclidean TSP solver")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one TSPLIB instance")
    s.add_argument("file")
    _config_args(s)
    s.add_argument("--ref-len", type=float, default=None, help="reference length for the gap")
    s.add_argument("--out", default=None, help="tour file (default: <file>.tour)")
    s.add_argument("--report", default=None, help="JSON report path")
    s.add_argument("--timings", action="store_true", help="include wall times in the report")
    s.add_argument("--trace", action="store_true", help="print one line per search round to stderr")
    s.add_argument("--dump-hypertour", nargs="?", const="hypertour.txt", default=None,
                   help="write cluster labels and the supernode order")
    s.set_defaults(func=_cmd_solve)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--dist", choices=DISTRIBUTIONS, default="uniform")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    b = sub.add_parser("bench", help="solve every .tsp file in a directory")
    b.add_argument("dir")
    _config_args(b)
    b.add_argument("--refs", default=None, help="file of 'name length' lines")
    b.add_argument("--jobs", type=int, default=None)
    b.add_argument("--report", required=True)
    b.add_argument("--csv", default=None)
    b.set_defaults(func=_cmd_bench)

    ne = sub.add_parser("noise-exp", help="heatmap noise robustness study")
    ne.add_argument("file")
    _config_args(ne)
    ne.add_argument("--levels", default="0,0.05,0.1,0.2")
    ne.add_argument("--seeds", type=int, default=10)
    ne.add_argument("--report", required=True)
    ne.set_defaults(func=_cmd_noise)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
