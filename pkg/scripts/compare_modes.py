#!/usr/bin/env python3
"""Run the three coordination modes with the offline mock provider and
compare their final fitness over several seeds.

The budget is scaled down by default; pass --full-budget for the full
3280-prompt runs. Per-generation traces go to --out for plotting.
"""

import argparse
import csv
import statistics
import sys
import time
from pathlib import Path

from coupledlns import evolution as ev
from coupledlns.cli import DATA
from coupledlns.irp import IRP
from coupledlns.lns import LnsConfig
from coupledlns.mrmupmp import MRMUPMP
from coupledlns.provider import MockProvider


def configs(full: bool) -> dict:
    if full:
        return {m: ev.published_config(m) for m in ev.MODES}
    small = dict(pop_size=6, repetitions=2, parents=3)
    return {
        "sequential": ev.EvolutionConfig(generations=4, mode="sequential", **small),
        "iterative": ev.EvolutionConfig(generations=1, rounds=4, mode="iterative", **small),
        "integrated": ev.EvolutionConfig(generations=8, mode="integrated", **small),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--problem", choices=["irp", "mrmupmp"], default="irp")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--iterations", type=int, nargs=2, default=[5, 5], metavar=("K1", "K2"))
    ap.add_argument("--full-budget", action="store_true")
    ap.add_argument("--out", type=Path, help="directory for per-run trace CSVs")
    args = ap.parse_args(argv)

    if args.problem == "irp":
        problem, files = IRP(), ["irp_toy12.txt"]
    else:
        problem, files = MRMUPMP(), ["mup_toy3x3.txt", "mup_toy4x4.txt"]
    instances = [problem.load_instance(DATA / f) for f in files]
    lns = LnsConfig(max_iterations=tuple(args.iterations), clock="logical")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)

    print(f"{'mode':<11} {'prompts':>7} {'seed tuple':>11} {'best':>11} {'mean':>11} {'std':>8} {'secs':>6}")
    for mode, cfg in configs(args.full_budget).items():
        best, start, t0 = [], [], time.perf_counter()
        for seed in range(args.seeds):
            evaluator = ev.Evaluator(problem, instances, lns, seed)
            res = ev.run(problem, evaluator, MockProvider(), cfg, seed)
            best.append(res.best.fitness)
            start.append(res.seed_individual.fitness)
            if args.out:
                with open(args.out / f"{mode}_s{seed}.csv", "w", newline="") as fh:
                    w = csv.DictWriter(fh, list(res.trace[0]), lineterminator="\n")
                    w.writeheader()
                    w.writerows(res.trace)
        std = statistics.stdev(best) if len(best) > 1 else 0.0
        print(f"{mode:<11} {ev.expected_budget(cfg, 2):>7} {statistics.mean(start):>11.2f} "
              f"{min(best):>11.2f} {statistics.mean(best):>11.2f} {std:>8.2f} {time.perf_counter() - t0:>6.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
