"""Population-based evolution of heuristic tuples under the three
coordination modes (sequential, iterative, integrated)."""

from __future__ import annotations

import hashlib
import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import dsl
from .core import HeuristicComponent, LengthMismatch, HeuristicTuple, Problem, make_tuple, replace_component, seed_tuple
from .lns import InfeasibleStart, LnsConfig, run_alternating
from .prompts import build_prompt, parent_arity
from .provider import Provider, ProviderError, ProviderRequest, parse_response

log = logging.getLogger(__name__)

INVALID = math.inf
MODES = ("sequential", "iterative", "integrated")
DEFAULT_STRATEGIES = ("E1", "E2", "M1", "M2")
_STRATEGY_CODE = {"I1": 0, "E1": 1, "E2": 2, "M1": 3, "M2": 4}


class ConfigError(ValueError):
    pass


class NonpositiveReference(ValueError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class EvolutionConfig:
    pop_size: int = 20
    generations: int = 20
    rounds: int = 1
    repetitions: int = 20
    parents: int = 5
    strategies: tuple = DEFAULT_STRATEGIES
    mode: str = "sequential"
    temperature: float = 1.0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("pop_size", "repetitions", "parents", "rounds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.generations < 0:
            raise ConfigError("generations must be non-negative")
        if self.mode != "iterative" and self.rounds != 1:
            raise ConfigError(f"{self.mode} mode runs a single control round")
        bad = set(self.strategies) - {"E1", "E2", "M1", "M2"}
        if bad or not self.strategies:
            raise ConfigError(f"strategies must be a non-empty subset of E1, E2, M1, M2 (got {sorted(bad)})")

    @property
    def init_prompts(self) -> int:
        return 2 * self.repetitions

    @classmethod
    def from_dict(cls, d: dict) -> "EvolutionConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown evolution settings {sorted(unknown)}")
        return cls(**d)


def published_config(mode: str) -> EvolutionConfig:
    """The evolutionary budget used for all three modes: 40 generations, 3280 prompts."""
    if mode == "sequential":
        return EvolutionConfig(generations=20, mode=mode)
    if mode == "iterative":
        return EvolutionConfig(generations=5, rounds=4, mode=mode)
    return EvolutionConfig(generations=40, mode="integrated")


# ------------------------------------------------------------------ fitness


def fitness_rel_gap(objectives: Sequence[float], references: Sequence[float]) -> float:
    """Mean relative gap of the objectives to reference objectives."""
    if len(objectives) != len(references) or not objectives:
        raise LengthMismatch(f"need equally many objectives and references, got {len(objectives)} and {len(references)}")
    if any(r <= 0 for r in references):
        raise NonpositiveReference("reference objectives must be positive")
    return sum((o - r) / r for o, r in zip(objectives, references)) / len(objectives)


def fitness_avg_obj(objectives: Sequence[float]) -> float:
    if not objectives:
        raise EmptyInput("no objectives to average")
    return sum(objectives) / len(objectives)


class Evaluator:
    """Fitness of full heuristic tuples over an instance set, memoised.

    Deterministic under the logical clock: the same tuple always gets the
    same LNS seed per instance.
    """

    def __init__(self, problem: Problem, instances: Sequence, lns: LnsConfig, seed: int = 0,
                 fitness_mode: str = "average-objective", references: dict | None = None):
        if fitness_mode not in ("relative-gap", "average-objective"):
            raise ConfigError(f"unknown fitness mode {fitness_mode!r}")
        self.problem = problem
        self.instances = list(instances)
        self.lns = lns
        self.seed = seed
        self.fitness_mode = fitness_mode
        self.references = dict(references or {})
        if fitness_mode == "relative-gap":
            missing = [i.name for i in self.instances if i.name not in self.references]
            if missing:
                raise ConfigError(f"relative-gap fitness needs reference objectives for {missing}")
        self.cache: dict = {}
        self.evaluations = 0

    def objectives(self, h: HeuristicTuple) -> list | None:
        if not h.valid or len(h) != len(self.problem.subproblems):
            return None
        objs = []
        for inst in self.instances:
            try:
                sol, _ = run_alternating(self.problem, inst, h.programs, self.lns, self.seed)
            except InfeasibleStart:
                return None
            objs.append(sol.objective)
        return objs

    def fitness_of(self, objs: list | None) -> float:
        if objs is None:
            return INVALID
        if self.fitness_mode == "relative-gap":
            return fitness_rel_gap(objs, [self.references[i.name] for i in self.instances])
        return fitness_avg_obj(objs)

    def __call__(self, h: HeuristicTuple) -> tuple:
        key = h.key()
        if key not in self.cache:
            self.evaluations += 1
            objs = self.objectives(h)
            self.cache[key] = (self.fitness_of(objs), tuple(objs or ()))
        return self.cache[key]

    def many(self, tuples: Sequence[HeuristicTuple], workers: int = 1) -> list:
        todo = {}
        for h in tuples:
            if h.key() not in self.cache and h.key() not in todo:
                todo[h.key()] = h
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(workers) as pool:
                for key, objs in zip(todo, pool.map(self.objectives, todo.values())):
                    self.evaluations += 1
                    self.cache[key] = (self.fitness_of(objs), tuple(objs or ()))
        return [self(h) for h in tuples]


def evaluate(problem: Problem, h: HeuristicTuple, instances: Sequence, lns: LnsConfig, seed: int = 0,
             fitness_mode: str = "average-objective", references: dict | None = None) -> float:
    return Evaluator(problem, instances, lns, seed, fitness_mode, references)(h)[0]


# --------------------------------------------------------------- population


@dataclass(frozen=True)
class Individual:
    tuple: HeuristicTuple
    fitness: float
    counter: int
    strategy: str = "seed"
    parents: tuple = ()
    phase: str = ""
    objectives: tuple = ()

    def sort_key(self) -> tuple:
        return (self.fitness, self.counter)


def truncate(population: Sequence[Individual], n: int) -> list:
    return sorted(population, key=Individual.sort_key)[:n]


@dataclass(frozen=True)
class Phase:
    round: int
    subproblem: object  # 1-based index, or "all" in integrated mode
    generation: int


def phase_schedule(cfg: EvolutionConfig, n_subproblems: int) -> list:
    """Generation entries in execution order."""
    if cfg.mode == "integrated":
        return [Phase(1, "all", g) for g in range(1, cfg.generations + 1)]
    return [Phase(r, k, g)
            for r in range(1, cfg.rounds + 1)
            for k in range(1, n_subproblems + 1)
            for g in range(1, cfg.generations + 1)]


def expected_budget(cfg: EvolutionConfig, n_subproblems: int) -> int:
    """Provider calls of a full run: initialisation plus all generations.

    Integrated mode initialises with as many I1 prompts as the
    decomposition modes (one batch per subproblem) so budgets match.
    """
    gens = len(phase_schedule(cfg, n_subproblems))
    return n_subproblems * cfg.init_prompts + gens * len(cfg.strategies) * cfg.repetitions


@dataclass
class BudgetLedger:
    counts: dict = field(default_factory=dict)

    def record(self, strategy: str, phase: str):
        key = (strategy, phase)
        self.counts[key] = self.counts.get(key, 0) + 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def by_strategy(self) -> dict:
        out: dict = {}
        for (s, _), n in self.counts.items():
            out[s] = out.get(s, 0) + n
        return out


@dataclass
class RunResult:
    best: Individual
    seed_individual: Individual
    trace: list  # dicts: phase, round, subproblem, generation, best_fitness, mean_fitness
    ledger: BudgetLedger
    candidates: list  # one dict per provider call


def _mean_finite(pop: Sequence[Individual]) -> float:
    vals = [i.fitness for i in pop if math.isfinite(i.fitness)]
    return sum(vals) / len(vals) if vals else INVALID


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:12]


class Evolution:
    """One evolutionary run; provider calls are issued sequentially."""

    def __init__(self, problem: Problem, evaluator: Evaluator, provider: Provider, cfg: EvolutionConfig,
                 master_seed: int = 0):
        self.problem = problem
        self.evaluator = evaluator
        self.provider = provider
        self.cfg = cfg
        self.master_seed = master_seed
        self.K = len(problem.subproblems)
        self.counter = 0
        self.ledger = BudgetLedger()
        self.candidates: list = []
        self.trace: list = []

    # -- helpers
    def _next_counter(self) -> int:
        self.counter += 1
        return self.counter

    def _request_seed(self, rnd: int, k, generation: int, strategy: str, rep: int) -> int:
        kk = 0 if k == "all" else int(k)
        return dsl.derive_seed(self.master_seed, rnd, kk, generation, _STRATEGY_CODE[strategy], rep)

    def _individual(self, h: HeuristicTuple, strategy: str, parents=(), phase: str = "") -> Individual:
        fit, objs = self.evaluator(h)
        return Individual(h, fit, self._next_counter(), strategy, tuple(parents), phase, objs)

    def _ask(self, strategy: str, k, incumbent: HeuristicTuple, pool: Sequence[Individual], rnd: int,
             generation: int, rep: int) -> tuple:
        """One provider call; returns the candidate tuple and its log record."""
        seed = self._request_seed(rnd, k, generation, strategy, rep)
        rng = random.Random(seed)
        valid = [ind for ind in pool if math.isfinite(ind.fitness)] or list(pool)
        n = min(parent_arity(strategy, self.cfg.parents), len(valid))
        chosen = rng.sample(valid, n) if n else []
        active = list(range(1, self.K + 1)) if k == "all" else [k]
        parent_comps = [[ind.tuple[j - 1] for j in active] for ind in chosen]
        prompt = build_prompt(strategy, self.problem, active, parent_comps,
                              n if strategy in ("E1", "E2") else self.cfg.parents, seed)
        phase = f"r{rnd}:{k}:g{generation}"
        self.ledger.record(strategy, f"{rnd}:{k}")
        try:
            text = self.provider.generate(ProviderRequest(prompt, self.cfg.temperature, seed))
        except ProviderError as exc:
            log.warning("provider failed for %s %s: %s", strategy, phase, exc)
            text = ""
        comps = parse_response(text, len(active))
        while len(comps) < len(active):
            comps.append(HeuristicComponent("", "", error="no component in response"))
        if k == "all":
            h = make_tuple(comps, self.K)
        else:
            h = replace_component(incumbent, k, comps[0])
        record = {
            "strategy": strategy, "phase": phase, "round": rnd, "subproblem": k, "generation": generation,
            "parents": [ind.counter for ind in chosen], "response_digest": _digest(text),
            "valid": h.valid, "code": [c.code for c in h.components],
        }
        return h, record, tuple(ind.counter for ind in chosen)

    def _spawn(self, jobs: list) -> list:
        """Evaluate candidate tuples (possibly in parallel) and log them."""
        self.evaluator.many([h for h, _, _, _ in jobs], self.cfg.workers)
        out = []
        for h, record, parents, strategy in jobs:
            ind = self._individual(h, strategy, parents, record["phase"])
            record.update(counter=ind.counter, fitness=ind.fitness)
            self.candidates.append(record)
            out.append(ind)
        return out

    # -- phases
    def initialize(self, k, incumbent: Individual, rnd: int = 1) -> list:
        n_prompts = self.cfg.init_prompts * (self.K if k == "all" else 1)
        jobs = []
        for rep in range(n_prompts):
            h, record, parents = self._ask("I1", k, incumbent.tuple, [], rnd, 0, rep)
            jobs.append((h, record, parents, "I1"))
        return truncate(self._spawn(jobs) + [incumbent], self.cfg.pop_size)

    def step_generation(self, population: list, phase: Phase, incumbent: HeuristicTuple) -> list:
        """|S| x r new candidates from the current population, then elitist truncation."""
        jobs = []
        for strategy in self.cfg.strategies:
            for rep in range(self.cfg.repetitions):
                h, record, parents = self._ask(strategy, phase.subproblem, incumbent, population,
                                               phase.round, phase.generation, rep)
                jobs.append((h, record, parents, strategy))
        return truncate(list(population) + self._spawn(jobs), self.cfg.pop_size)

    def _log_generation(self, idx: int, phase: Phase, pop: list):
        self.trace.append({
            "phase": idx, "round": phase.round, "subproblem": phase.subproblem,
            "generation": phase.generation, "best_fitness": pop[0].fitness,
            "mean_fitness": _mean_finite(pop),
        })

    def run(self) -> RunResult:
        seed_h = seed_tuple(self.problem)
        incumbent = self._individual(seed_h, "seed", phase="seed")
        seed_ind = incumbent
        schedule = phase_schedule(self.cfg, self.K)
        if self.cfg.mode == "integrated":
            pop = self.initialize("all", incumbent)
            for idx, phase in enumerate(schedule):
                pop = self.step_generation(pop, phase, incumbent.tuple)
                self._log_generation(idx, phase, pop)
            best = pop[0]
        else:
            retained: dict = {}
            idx = 0
            for rnd in range(1, self.cfg.rounds + 1):
                for k in range(1, self.K + 1):
                    if rnd == 1:
                        pop = self.initialize(k, incumbent, rnd)
                    else:
                        # keep last round's components for k, re-scored against the current tuple
                        rebuilt = [incumbent]
                        for ind in retained[k]:
                            h = replace_component(incumbent.tuple, k, ind.tuple[k - 1])
                            if h.key() != incumbent.tuple.key():
                                fit, objs = self.evaluator(h)
                                rebuilt.append(replace(ind, tuple=h, fitness=fit, objectives=objs))
                        pop = truncate(rebuilt, self.cfg.pop_size)
                    for g in range(1, self.cfg.generations + 1):
                        phase = Phase(rnd, k, g)
                        pop = self.step_generation(pop, phase, incumbent.tuple)
                        self._log_generation(idx, phase, pop)
                        idx += 1
                    retained[k] = pop
                    incumbent = pop[0]
            best = incumbent
        return RunResult(best, seed_ind, self.trace, self.ledger, self.candidates)


def run(problem: Problem, evaluator: Evaluator, provider: Provider, cfg: EvolutionConfig,
        master_seed: int = 0) -> RunResult:
    return Evolution(problem, evaluator, provider, cfg, master_seed).run()
