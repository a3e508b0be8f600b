"""Problem-agnostic building blocks: heuristic tuples, solutions and the
contract that every coupled problem module implements."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol, Sequence

from . import dsl


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class HeuristicComponent:
    """Program source plus the rationale that produced it."""

    code: str
    thought: str = ""
    program: dsl.Program | None = field(default=None, compare=False, repr=False)
    error: str | None = field(default=None, compare=False)

    def __post_init__(self):
        # thoughts travel as a single ``thought:`` line
        object.__setattr__(self, "thought", " ".join(self.thought.split()))
        object.__setattr__(self, "code", self.code.strip("\n"))
        if self.program is None and self.error is None:
            try:
                object.__setattr__(self, "program", dsl.parse(self.code))
            except dsl.DslError as exc:
                object.__setattr__(self, "error", str(exc))

    @property
    def valid(self) -> bool:
        return self.program is not None

    @classmethod
    def from_program(cls, program: dsl.Program, thought: str = "") -> "HeuristicComponent":
        return cls(dsl.render(program), thought, program=program)


@dataclass(frozen=True)
class HeuristicTuple:
    components: tuple

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, k: int) -> HeuristicComponent:
        return self.components[k]

    @property
    def valid(self) -> bool:
        return all(c.valid for c in self.components)

    @property
    def programs(self) -> list:
        return [c.program for c in self.components]

    def key(self) -> tuple:
        """Canonical identity used for caching evaluations."""
        return tuple(dsl.render(c.program) if c.valid else "!" + c.code for c in self.components)


def make_tuple(components: Sequence, n_subproblems: int) -> HeuristicTuple:
    """Build a tuple from ``(code, thought)`` pairs or ready components."""
    if len(components) != n_subproblems:
        raise LengthMismatch(f"expected {n_subproblems} components, got {len(components)}")
    out = []
    for c in components:
        out.append(c if isinstance(c, HeuristicComponent) else HeuristicComponent(c[0], c[1]))
    return HeuristicTuple(tuple(out))


def replace_component(h: HeuristicTuple, k: int, component: HeuristicComponent) -> HeuristicTuple:
    """Copy of ``h`` with the component at 1-based position ``k`` replaced."""
    if not 1 <= k <= len(h):
        raise IndexError(f"subproblem {k} out of range 1..{len(h)}")
    comps = list(h.components)
    comps[k - 1] = component
    return HeuristicTuple(tuple(comps))


# ----------------------------------------------------------- tuple documents

_FENCE = "```"
_SECTION_RE = re.compile(r"^## (\d+) (.*)$")


def render_tuple(h: HeuristicTuple, names: Sequence[str] | None = None) -> str:
    names = names or [f"subproblem{k}" for k in range(1, len(h) + 1)]
    lines = ["# heuristic tuple"]
    for k, (comp, name) in enumerate(zip(h.components, names), start=1):
        lines += ["", f"## {k} {name}", f"thought: {comp.thought}", _FENCE + "dsl", comp.code, _FENCE]
    return "\n".join(lines) + "\n"


def parse_tuple(text: str, n_subproblems: int | None = None) -> HeuristicTuple:
    """Inverse of :func:`render_tuple`."""
    sections: list[list[str]] = []
    for line in text.splitlines():
        if _SECTION_RE.match(line):
            sections.append([])
        elif sections:
            sections[-1].append(line)
    comps = []
    for k, body in enumerate(sections, start=1):
        try:
            t = next(i for i, ln in enumerate(body) if ln.startswith("thought:"))
            start = next(i for i in range(t + 1, len(body)) if body[i].startswith(_FENCE))
            end = next(i for i in range(start + 1, len(body)) if body[i].startswith(_FENCE))
        except StopIteration:
            raise ValueError(f"section {k} is missing a thought line or code block") from None
        thought = body[t][len("thought:"):].strip()
        comps.append(HeuristicComponent("\n".join(body[start + 1:end]), thought))
    if n_subproblems is not None and len(comps) != n_subproblems:
        raise LengthMismatch(f"expected {n_subproblems} sections, found {len(comps)}")
    return HeuristicTuple(tuple(comps))


# ----------------------------------------------------------------- solutions


@dataclass(frozen=True)
class CoupledSolution:
    state: Any
    objective: float
    violations: tuple = ()

    @property
    def feasible(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class ProblemDescriptor:
    name: str
    subproblems: tuple
    fitness_mode: str  # "relative-gap" or "average-objective"
    references: Mapping[str, float] | None = None

    def check(self, instance_ids: Sequence[str]):
        if self.fitness_mode not in ("relative-gap", "average-objective"):
            raise ValueError(f"unknown fitness mode {self.fitness_mode!r}")
        if self.fitness_mode == "relative-gap":
            missing = [i for i in instance_ids if i not in (self.references or {})]
            if missing:
                raise ValueError(f"relative-gap fitness needs reference objectives for {missing}")


class Problem(Protocol):
    """What the LNS engine and evolution need from a coupled problem."""

    name: str
    subproblems: tuple  # names, index k-1 for subproblem k
    schemas: tuple  # feature schema per subproblem
    description: str

    def initial_solution(self, instance) -> Any: ...

    def objective(self, instance, state) -> float: ...

    def check_feasible(self, instance, state) -> list: ...

    def extract_features(self, k: int, instance, state) -> dsl.FeatureTable: ...

    def destroy_repair(self, k: int, instance, state, indices: Sequence[int]) -> Any: ...

    def seed_heuristics(self) -> list: ...


def solution(problem: Problem, instance, state) -> CoupledSolution:
    return CoupledSolution(state, problem.objective(instance, state), tuple(problem.check_feasible(instance, state)))


def seed_tuple(problem: Problem) -> HeuristicTuple:
    return make_tuple(problem.seed_heuristics(), len(problem.subproblems))
