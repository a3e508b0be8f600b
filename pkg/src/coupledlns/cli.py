"""Command-line entry point: ``coupledlns {evolve,evaluate,schedule,gap-table,plot-data}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import yaml

from . import evolution as ev
from .core import LengthMismatch, parse_tuple, render_tuple, seed_tuple
from .gaps import gap_table_from_files
from .irp import IRP
from .lns import LnsConfig
from .mrmupmp import MRMUPMP
from .provider import make_provider

DATA = Path(__file__).parent / "data"
PROBLEMS = {"irp": IRP, "mrmupmp": MRMUPMP}
TRACE_FIELDS = ("phase", "round", "subproblem", "generation", "best_fitness", "mean_fitness")

log = logging.getLogger("coupledlns")


class ConfigError(ValueError):
    pass


def resolve(ref: str, base: Path) -> Path:
    """``builtin:name`` points into the shipped data directory, anything else is relative to ``base``."""
    if ref.startswith("builtin:"):
        return DATA / ref[len("builtin:"):]
    p = Path(ref)
    return p if p.is_absolute() else base / p


def load_yaml(path) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must hold a mapping")
    return doc


def make_problem(name: str):
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ConfigError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def load_instances(problem, refs, base: Path) -> list:
    paths = []
    for ref in ([refs] if isinstance(refs, str) else refs or []):
        p = resolve(ref, base)
        paths += sorted(p.glob("*.txt")) if p.is_dir() else [p]
    if not paths:
        raise ConfigError("no instances given")
    return [problem.load_instance(p) for p in paths]


def load_references(doc: dict, base: Path) -> dict:
    refs = dict(doc.get("references") or {})
    if doc.get("references_file"):
        from .gaps import read_table
        labels, cols = read_table(resolve(doc["references_file"], base))
        refs.update(zip(labels, cols["objective"]))
    return refs


class Run:
    """Everything an ``evolve`` run needs, built from a config document."""

    def __init__(self, doc: dict, base: Path):
        known = {"problem", "instances", "fitness", "references", "references_file", "evolution", "lns",
                 "provider", "seed", "eval_seed", "output"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        self.problem = make_problem(doc.get("problem", "irp"))
        try:
            self.cfg = ev.EvolutionConfig.from_dict(doc.get("evolution") or {})
            self.lns = LnsConfig.from_dict(doc.get("lns") or {"max_iterations": [10, 10]})
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad parameters: {exc}") from None
        self.doc = doc
        self.base = base

    def build(self, seed: int):
        instances = load_instances(self.problem, self.doc.get("instances"), self.base)
        evaluator = ev.Evaluator(self.problem, instances, self.lns, int(self.doc.get("eval_seed", seed)),
                                 self.doc.get("fitness", "average-objective"), load_references(self.doc, self.base))
        provider = make_provider(self.doc.get("provider"))
        return evaluator, provider


def write_trace(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, TRACE_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in TRACE_FIELDS})


def write_candidates(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            rec = dict(r, fitness=r["fitness"] if math.isfinite(r["fitness"]) else None)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# ------------------------------------------------------------------ commands


def cmd_evolve(args) -> int:
    doc = load_yaml(args.config)
    run = Run(doc, Path(args.config).parent)
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    evaluator, provider = run.build(seed)
    out = Path(args.out or doc.get("output") or f"runs/{run.cfg.mode}_s{seed}")
    out.mkdir(parents=True, exist_ok=True)
    result = ev.run(run.problem, evaluator, provider, run.cfg, seed)
    write_trace(out / "trace.csv", result.trace)
    write_candidates(out / "candidates.jsonl", result.candidates)
    (out / "best_tuple.md").write_text(render_tuple(result.best.tuple, run.problem.subproblems), encoding="utf-8")
    summary = {"mode": run.cfg.mode, "seed": seed, "prompts": result.ledger.total,
               "seed_fitness": result.seed_individual.fitness, "best_fitness": result.best.fitness,
               "best_objectives": list(result.best.objectives)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"{run.cfg.mode}: {result.ledger.total} prompts, best fitness {result.best.fitness!r} "
          f"(seed tuple {result.seed_individual.fitness!r}) -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    problem = make_problem(args.problem)
    if args.tuple == "seed":
        h = seed_tuple(problem)
    else:
        try:
            h = parse_tuple(Path(args.tuple).read_text(encoding="utf-8"), len(problem.subproblems))
        except (OSError, LengthMismatch, ValueError) as exc:
            raise ConfigError(f"cannot read tuple {args.tuple}: {exc}") from None
    instances = load_instances(problem, args.instances, Path.cwd())
    lns_doc = load_yaml(args.lns) if args.lns else {"max_iterations": [10, 10]}
    lns = LnsConfig.from_dict(lns_doc.get("lns", lns_doc))
    refs = {}
    for item in args.reference or ():
        name, _, value = item.partition("=")
        refs[name] = float(value)
    evaluator = ev.Evaluator(problem, instances, lns, args.seed, args.fitness, refs)
    fitness, objs = evaluator(h)
    for inst, o in zip(instances, objs):
        print(f"{inst.name}\t{o!r}")
    print(f"fitness\t{fitness!r}")
    return 0 if math.isfinite(fitness) else 1


def cmd_schedule(args) -> int:
    doc = load_yaml(args.config)
    run = Run(doc, Path(args.config).parent)
    k = len(run.problem.subproblems)
    for ph in ev.phase_schedule(run.cfg, k):
        print(f"{ph.round}\t{ph.subproblem}\t{ph.generation}")
    print(f"# {len(ev.phase_schedule(run.cfg, k))} generations, {ev.expected_budget(run.cfg, k)} prompts")
    return 0


def cmd_gap_table(args) -> int:
    table = gap_table_from_files(args.ours, args.baseline, args.column)
    sys.stdout.write(table.to_csv() if args.csv else table.to_text())
    return 0


def cmd_plot_data(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["run", "index", "round", "subproblem", "generation", "best_fitness", "mean_fitness"])
    for path in args.trace:
        with open(path, encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if rows and set(TRACE_FIELDS) - set(rows[0]):
            raise ConfigError(f"{path} is not a trace file")
        run_name = Path(path).parent.name or Path(path).stem
        for i, r in enumerate(rows):
            w.writerow([run_name, i, r["round"], r["subproblem"], r["generation"], r["best_fitness"], r["mean_fitness"]])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coupledlns", description="Evolve destroy-heuristic tuples for coupled problems.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run one evolution")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("evaluate", help="fitness of a saved tuple")
    p.add_argument("--tuple", required=True, help="tuple file, or 'seed' for the shipped seed tuple")
    p.add_argument("--instances", required=True, nargs="+", help="instance files or directories")
    p.add_argument("--lns", help="YAML file with LNS settings (or a run config with an lns section)")
    p.add_argument("--problem", default="irp", choices=sorted(PROBLEMS))
    p.add_argument("--fitness", default="average-objective", choices=["average-objective", "relative-gap"])
    p.add_argument("--reference", action="append", metavar="NAME=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("schedule", help="print the phase schedule without calling a provider")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("gap-table", help="gaps of our objectives against baseline columns")
    p.add_argument("--ours", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--column", help="objective column in --ours (default: objective)")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_gap_table)

    p = sub.add_parser("plot-data", help="per-generation best/mean series for plotting")
    p.add_argument("--trace", required=True, nargs="+")
    p.set_defaults(func=cmd_plot_data)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ev.ConfigError, LengthMismatch, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
