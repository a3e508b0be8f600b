"""Alternating large neighbourhood search over the subproblems of a coupled
problem. Each subproblem runs its own destroy/repair loop; the best solution
of one phase is the starting point of the next."""

from __future__ import annotations

import csv
import io
import time
import zlib
from dataclasses import dataclass, field
from typing import Sequence

from . import dsl
from .core import CoupledSolution, Problem, solution
from .irp import RepairFailure
from .mrmupmp import MalformedPlan, NoSolution

# destroy/repair failures that cost an iteration instead of aborting the run
SKIPPABLE = (dsl.DslError, RepairFailure, NoSolution, MalformedPlan)


class InfeasibleStart(RuntimeError):
    pass


@dataclass(frozen=True)
class LnsConfig:
    max_iterations: tuple  # per subproblem
    time_limits: tuple = ()  # seconds per subproblem, wall clock only
    global_time: float = 60.0
    clock: str = "logical"  # "logical" or "wall"
    cycles: int | None = 1  # passes over all subproblems; required in logical mode
    budget: int = dsl.DEFAULT_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "max_iterations", tuple(int(i) for i in self.max_iterations))
        limits = tuple(float(t) for t in self.time_limits) or (self.global_time,) * len(self.max_iterations)
        object.__setattr__(self, "time_limits", limits)
        if self.clock not in ("logical", "wall"):
            raise ValueError(f"clock must be 'logical' or 'wall', got {self.clock!r}")
        if any(i < 0 for i in self.max_iterations):
            raise ValueError("iteration limits must be non-negative")
        if len(self.time_limits) != len(self.max_iterations) or any(t <= 0 for t in self.time_limits):
            raise ValueError("one positive time limit per subproblem required")
        if self.global_time <= 0:
            raise ValueError("global time limit must be positive")
        if self.clock == "logical" and (self.cycles is None or self.cycles < 0):
            raise ValueError("logical clock needs a non-negative cycle count")

    @classmethod
    def from_dict(cls, d: dict) -> "LnsConfig":
        return cls(
            max_iterations=tuple(d["max_iterations"]),
            time_limits=tuple(d.get("time_limits", ())),
            global_time=float(d.get("global_time", 60.0)),
            clock=d.get("clock", "logical"),
            cycles=d.get("cycles", 1),
            budget=int(d.get("budget", dsl.DEFAULT_BUDGET)),
        )


# evaluation settings reported for the two benchmark problems
IRP_PUBLISHED = LnsConfig(max_iterations=(1000, 1000), time_limits=(10, 10), global_time=60, clock="wall", cycles=None)
MRMUPMP_PUBLISHED = LnsConfig(max_iterations=(10, 90), time_limits=(10, 10), global_time=60, clock="wall", cycles=None)


@dataclass(frozen=True)
class TraceRecord:
    subproblem: int
    iteration: int
    objective: float
    accepted: bool
    elapsed: float  # seconds since start; always 0 under the logical clock


@dataclass
class LnsTrace:
    records: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subproblem", "iteration", "objective", "accepted", "elapsed_ms"])
        for r in self.records:
            w.writerow([r.subproblem, r.iteration, repr(r.objective), int(r.accepted), f"{r.elapsed * 1000:.3f}"])
        return buf.getvalue()


@dataclass
class PhaseStats:
    iterations: int = 0
    accepted: int = 0
    skipped: int = 0
    rejected_infeasible: int = 0
    errors: list = field(default_factory=list)


def instance_key(instance) -> int:
    return zlib.crc32(str(getattr(instance, "name", "")).encode())


def run_subproblem(problem: Problem, instance, current: CoupledSolution, k: int, program: dsl.Program,
                   cfg: LnsConfig, seed: int, cycle: int = 0, trace: LnsTrace | None = None,
                   t0: float | None = None) -> tuple:
    """Greedy destroy/repair loop on subproblem ``k`` (1-based)."""
    stats = PhaseStats()
    best = current
    wall = cfg.clock == "wall"
    t0 = time.perf_counter() if t0 is None else t0
    phase_start = time.perf_counter()
    key = instance_key(instance)
    for it in range(cfg.max_iterations[k - 1]):
        if wall:
            now = time.perf_counter()
            if now - phase_start >= cfg.time_limits[k - 1] or now - t0 >= cfg.global_time:
                break
        table = problem.extract_features(k, instance, best.state)
        if len(table) == 0:
            break  # nothing to destroy; every further iteration would be a no-op
        stats.iterations += 1
        ctx = dsl.EvalContext(seed=dsl.derive_seed(seed, key, cycle, k, it), budget=cfg.budget)
        try:
            removed = dsl.select_removals(program, table, ctx)
            state = problem.destroy_repair(k, instance, best.state, removed)
        except SKIPPABLE as exc:
            stats.skipped += 1
            if len(stats.errors) < 5:
                stats.errors.append(f"{type(exc).__name__}: {exc}")
            continue
        cand = solution(problem, instance, state)
        accepted = cand.feasible and cand.objective < best.objective - 1e-9
        if not cand.feasible:
            stats.rejected_infeasible += 1
        if accepted:
            best = cand
            stats.accepted += 1
        if trace is not None:
            elapsed = time.perf_counter() - t0 if wall else 0.0
            trace.records.append(TraceRecord(k, it, cand.objective, accepted, elapsed))
    return best, stats


def run_alternating(problem: Problem, instance, programs: Sequence[dsl.Program], cfg: LnsConfig,
                    seed: int = 0) -> tuple:
    """Cycle the subproblem searches until the global limit; returns (best solution, trace)."""
    if len(programs) != len(problem.subproblems):
        raise ValueError(f"need {len(problem.subproblems)} programs, got {len(programs)}")
    t0 = time.perf_counter()
    try:
        best = solution(problem, instance, problem.initial_solution(instance))
    except Exception as exc:  # problem-specific construction errors
        raise InfeasibleStart(str(exc)) from exc
    if not best.feasible:
        raise InfeasibleStart(f"initial solution infeasible: {best.violations[:3]}")
    trace = LnsTrace()
    cycle = 0
    while True:
        if cfg.cycles is not None and cycle >= cfg.cycles:
            break
        if cfg.clock == "wall" and time.perf_counter() - t0 >= cfg.global_time:
            break
        if not any(cfg.max_iterations):
            break
        for k, program in enumerate(programs, start=1):
            best, _ = run_subproblem(problem, instance, best, k, program, cfg, seed, cycle, trace, t0)
            if cfg.clock == "wall" and time.perf_counter() - t0 >= cfg.global_time:
                break
        cycle += 1
    return best, trace
