"""Prompt documents for the five prompt strategies."""

from __future__ import annotations

import json
from typing import Sequence

from . import dsl
from .core import HeuristicComponent
from .provider import PARENTS_BEGIN, PARENTS_END

INIT, EXPLORE_NEW, EXPLORE_SHARED, REFINE, RETUNE = "I1", "E1", "E2", "M1", "M2"
ALL_STRATEGIES = (INIT, EXPLORE_NEW, EXPLORE_SHARED, REFINE, RETUNE)

_TASK = {
    "I1": "Design a new destroy heuristic for the subproblem(s) below.",
    "E1": "The {n} heuristics below come from the current population. Design a new heuristic "
          "whose idea is clearly different from every one of them.",
    "E2": "The {n} heuristics below come from the current population. Work out the ideas they "
          "have in common, then design a new heuristic that keeps those ideas and adds a new twist.",
    "M1": "Improve the heuristic below so that it finds better solutions. You may change its "
          "formula freely.",
    "M2": "Keep the formula of the heuristic below but change its parameters (rho and the numeric "
          "constants) so that it performs better.",
}


class ArityError(ValueError):
    pass


def parent_arity(strategy: str, n_parents: int) -> int:
    return {"I1": 0, "E1": n_parents, "E2": n_parents, "M1": 1, "M2": 1}[strategy]


def build_prompt(strategy: str, problem, active: Sequence[int], parents: Sequence[Sequence[HeuristicComponent]],
                 n_parents: int, seed: int) -> str:
    """Prompt asking for one component per subproblem in ``active`` (1-based).

    ``parents`` holds, per parent, the components of the active subproblems.
    """
    if strategy not in _TASK:
        raise ValueError(f"unknown prompt strategy {strategy!r}")
    want = parent_arity(strategy, n_parents)
    if len(parents) != want:
        raise ArityError(f"{strategy} needs {want} parent(s), got {len(parents)}")
    names = [problem.subproblems[k - 1] for k in active]
    out = [
        "You design destroy heuristics for a large neighbourhood search.",
        "",
        "# Problem",
        problem.description,
        "",
        "# Heuristic language",
        "A heuristic is a program in the scoring language below. It is evaluated once per "
        "removable element of the current solution; the ceil(rho * n) elements with the highest "
        f"score are removed. rho is clamped to [{dsl.RHO_MIN}, {dsl.RHO_MAX}]. Division by zero "
        "gives 0, comparisons give 1 or 0, if(c, a, b) picks a when c is non-zero, rand() is "
        "uniform in [0, 1).",
        "",
        dsl.GRAMMAR,
        "",
    ]
    for k, name in zip(active, names):
        schema = ", ".join(problem.schemas[k - 1])
        out.append(f"Subproblem {k} ({name}) removes {problem.element_names[k - 1]}; features: {schema}.")
    out += ["", "# Task", _TASK[strategy].format(n=len(parents))]
    if len(active) > 1:
        out.append("Propose the whole tuple: one heuristic for every subproblem, in the order listed.")
    if parents:
        out += ["", PARENTS_BEGIN]
        for i, comps in enumerate(parents, start=1):
            out.append(f"### Parent {i}")
            for name, comp in zip(names, comps):
                code = dsl.render(comp.program) if comp.valid else comp.code
                out += [f"#### {name}", f"thought: {comp.thought}", "```dsl", code, "```"]
        out.append(PARENTS_END)
    out += [
        "",
        "# Answer format",
        "For each requested subproblem, in order, write one line starting with `thought:` that "
        "explains the idea in one sentence, followed by the program in a ```dsl fenced block. "
        "Write nothing else.",
    ]
    meta = {
        "strategy": strategy,
        "seed": int(seed),
        "subproblems": list(active),
        "names": names,
        "schemas": {str(k): list(problem.schemas[k - 1]) for k in active},
        "n_parents": len(parents),
        "parents": [[dsl.digest(c.program) if c.valid else None for c in comps] for comps in parents],
    }
    out += ["", f"<!-- request-metadata {json.dumps(meta, sort_keys=True)} -->"]
    return "\n".join(out) + "\n"
