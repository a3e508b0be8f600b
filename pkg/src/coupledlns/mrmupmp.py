"""Desk-scale multi-robot unit-load pre-marshalling.

A warehouse is a set of bays on an integer grid. Every bay is a row of lanes
of equal depth, accessed from one side (``south``: the access end is the
bay's lowest y row, ``north``: its highest). Loads in a lane are packed
against the dead end, so only the load nearest the access end can be picked
and a new load is dropped into the free slot directly in front of it.

Subproblem 1 (move search) chooses a sequence of relocations that makes every
lane blockage-free; subproblem 2 (routing) assigns the moves to robots and
times them so that lane precedences hold. The objective is the makespan.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

from .dsl import FeatureTable

MOVE_SEARCH, ROUTING = 1, 2
MOVE_SCHEMA = ("move_distance", "load_priority", "unblocks", "plan_position", "target_lane_fill")
ROUTING_SCHEMA = ("start_time", "duration", "robot_load_ratio", "dag_depth", "travel_from_prev")
_EPS = 1e-9
INF = float("inf")


class FormatError(ValueError):
    pass


class NoSolution(RuntimeError):
    pass


class MalformedPlan(ValueError):
    pass


class Violation(NamedTuple):
    kind: str  # PlanViolation | BlockageViolation | PrecedenceViolation | OverlapViolation | TravelViolation
    message: str


@dataclass(frozen=True)
class Lane:
    id: int
    bay: int
    slots: tuple  # (x, y) per position, index 0 at the access end

    @property
    def depth(self) -> int:
        return len(self.slots)


@dataclass(frozen=True, eq=False)
class Warehouse:
    """Static layout, robot fleet and the initial storage configuration."""

    name: str
    lanes: tuple
    stacks: tuple  # per lane: load ids from the access end inward
    priority: dict  # load id -> priority class, 1 is retrieved first
    robots: int = 2
    speed: float = 1.0
    pick_time: float = 1.0
    drop_time: float = 1.0
    robot_start: tuple = (0, 0)

    def __post_init__(self):
        seen = set()
        for lane, stack in zip(self.lanes, self.stacks):
            if len(stack) > lane.depth:
                raise FormatError(f"lane {lane.id} holds {len(stack)} loads but has depth {lane.depth}")
            for load in stack:
                if load in seen:
                    raise FormatError(f"load {load} stored twice")
                if load not in self.priority:
                    raise FormatError(f"load {load} has no priority class")
                seen.add(load)
        if len(self.stacks) != len(self.lanes):
            raise FormatError("one stack per lane required")
        if self.robots < 1 or self.speed <= 0:
            raise FormatError("need at least one robot and a positive speed")

    @cached_property
    def blocking_memo(self) -> dict:
        # lane contents -> blocking count; the priorities never change
        return {}

    @cached_property
    def slot_base(self) -> tuple:
        base, acc = [], 0
        for lane in self.lanes:
            base.append(acc)
            acc += lane.depth
        return tuple(base)

    def slot_id(self, lane: int, pos: int) -> int:
        return self.slot_base[lane] + pos

    def coord(self, lane: int, pos: int) -> tuple:
        return self.lanes[lane].slots[pos]

    def travel(self, a: tuple, b: tuple) -> float:
        return (abs(a[0] - b[0]) + abs(a[1] - b[1])) / self.speed


Config = tuple  # per lane: tuple of load ids, access end first


def front_pos(wh: Warehouse, config: Config, lane: int) -> int:
    """Position of the accessible load (or the dead end + 1 if empty)."""
    return wh.lanes[lane].depth - len(config[lane])


def lane_blocking(priorities: Sequence[int]) -> int:
    count, lowest = 0, INF
    for p in reversed(priorities):
        if p > lowest:
            count += 1
        lowest = min(lowest, p)
    return count


def blockage_count(wh: Warehouse, config: Config | None = None) -> int:
    """Loads that sit in front of an earlier-retrieved load in their lane."""
    config = wh.stacks if config is None else config
    memo = wh.blocking_memo
    total = 0
    for stack in config:
        n = memo.get(stack)
        if n is None:
            n = memo[stack] = lane_blocking([wh.priority[x] for x in stack])
        total += n
    return total


@dataclass(frozen=True)
class Move:
    load: int
    src_lane: int
    src_pos: int
    dst_lane: int
    dst_pos: int


def move_coords(wh: Warehouse, m: Move) -> tuple:
    return wh.coord(m.src_lane, m.src_pos), wh.coord(m.dst_lane, m.dst_pos)


def move_duration(wh: Warehouse, m: Move) -> float:
    a, b = move_coords(wh, m)
    return wh.pick_time + wh.travel(a, b) + wh.drop_time


def apply_move(wh: Warehouse, config: Config, m: Move) -> Config:
    src, dst = config[m.src_lane], config[m.dst_lane]
    if not src or src[0] != m.load or front_pos(wh, config, m.src_lane) != m.src_pos:
        raise MalformedPlan(f"load {m.load} is not accessible in lane {m.src_lane}")
    if m.src_lane == m.dst_lane or len(dst) >= wh.lanes[m.dst_lane].depth:
        raise MalformedPlan(f"lane {m.dst_lane} cannot take load {m.load}")
    if front_pos(wh, config, m.dst_lane) - 1 != m.dst_pos:
        raise MalformedPlan(f"slot {m.dst_pos} of lane {m.dst_lane} is not the drop slot")
    new = list(config)
    new[m.src_lane] = src[1:]
    new[m.dst_lane] = (m.load,) + dst
    return tuple(new)


def make_move(wh: Warehouse, config: Config, src_lane: int, dst_lane: int) -> Move:
    """Move the front load of ``src_lane`` to the drop slot of ``dst_lane``."""
    if not config[src_lane] or src_lane == dst_lane or len(config[dst_lane]) >= wh.lanes[dst_lane].depth:
        raise MalformedPlan(f"no move from lane {src_lane} to lane {dst_lane}")
    return Move(config[src_lane][0], src_lane, front_pos(wh, config, src_lane),
                dst_lane, front_pos(wh, config, dst_lane) - 1)


def replay(wh: Warehouse, plan: Sequence[Move], config: Config | None = None) -> Config:
    config = wh.stacks if config is None else config
    for m in plan:
        config = apply_move(wh, config, m)
    return config


def _front_moves(wh: Warehouse, config: Config):
    for src in range(len(config)):
        if not config[src]:
            continue
        for dst in range(len(config)):
            if dst != src and len(config[dst]) < wh.lanes[dst].depth:
                m = make_move(wh, config, src, dst)
                yield m, apply_move(wh, config, m)


def _lane_order(wh: Warehouse, config: Config) -> dict:
    """Rank of each lane: lanes whose first blocking load is nearer the access end come first."""
    order = []
    for lane, stack in enumerate(config):
        pr = [wh.priority[x] for x in stack]
        lowest, first = INF, None
        for idx in range(len(pr) - 1, -1, -1):
            if pr[idx] > lowest:
                first = idx
            lowest = min(lowest, pr[idx])
        order.append((first is None, INF if first is None else first, lane))
    return {lane: rank for rank, (_, _, lane) in enumerate(sorted(order))}


def greedy_move_plan(wh: Warehouse, config: Config | None = None, max_moves: int | None = None,
                     avoid: frozenset = frozenset()) -> list:
    """Relocate front loads until no blockage is left.

    Each step takes the move minimising the resulting blockage count, then
    the best count reachable with one more move, then the rank of its source
    lane (the lane whose blocking load is nearest the access end first), the
    Manhattan distance and the drop slot id. Moves back to a seen
    configuration are skipped and relocations listed in ``avoid`` as
    (load, destination lane) rank last. Raises NoSolution when every move
    revisits or the move cap is hit.
    """
    config = wh.stacks if config is None else config
    n_loads = sum(len(s) for s in config)
    max_moves = 4 * n_loads + 10 if max_moves is None else max_moves
    seen = {config}
    plan = []
    while blockage_count(wh, config):
        if len(plan) >= max_moves:
            raise NoSolution(f"greedy move search exceeded {max_moves} moves")
        rank = _lane_order(wh, config)
        best = None
        for m, after in _front_moves(wh, config):
            if after in seen:
                continue
            now = blockage_count(wh, after)
            ahead = min((blockage_count(wh, nxt) for _, nxt in _front_moves(wh, after)
                         if nxt not in seen and nxt != config), default=now) if now else 0
            a, b = wh.coord(m.src_lane, m.src_pos), wh.coord(m.dst_lane, m.dst_pos)
            key = ((m.load, m.dst_lane) in avoid, now, ahead, rank[m.src_lane], wh.travel(a, b),
                   wh.slot_id(m.dst_lane, m.dst_pos))
            if best is None or key < best[0]:
                best = (key, m, after)
        if best is None:
            raise NoSolution("every move revisits a configuration")
        _, m, config = best
        seen.add(config)
        plan.append(m)
    return plan


def derive_precedences(wh: Warehouse, plan: Sequence[Move], config: Config | None = None) -> tuple:
    """Predecessor sets: each move waits for the previous move touching either of its lanes.

    Picking from or dropping into a lane changes its accessible slot, so two
    moves sharing a lane must keep their listed order. Linking each move to
    the last earlier move per lane covers all such pairs transitively.
    """
    config = wh.stacks if config is None else config
    last: dict = {}
    preds = []
    for j, m in enumerate(plan):
        config = apply_move(wh, config, m)
        ps = {last[ln] for ln in (m.src_lane, m.dst_lane) if ln in last}
        preds.append(tuple(sorted(ps)))
        last[m.src_lane] = j
        last[m.dst_lane] = j
    return tuple(preds)


def dag_depths(preds: Sequence[Sequence[int]]) -> list:
    depth = []
    for ps in preds:
        depth.append(1 + max((depth[p] for p in ps), default=-1))
    return depth


# ---------------------------------------------------------------- scheduling


@dataclass(frozen=True)
class Schedule:
    sequences: tuple  # per robot: move indices in execution order
    start: tuple  # per move
    robot: tuple  # per move
    makespan: float


def _effective_preds(preds, assigned) -> list:
    # preds only point backwards, so one forward pass resolves chains of skipped moves
    out = []
    for j, ps in enumerate(preds):
        eff = set()
        for p in ps:
            eff.update((p,) if assigned[p] >= 0 else out[p])
        out.append(tuple(sorted(eff)))
    return out


def time_sequences(wh: Warehouse, plan: Sequence[Move], preds: Sequence[Sequence[int]],
                   sequences: Sequence[Sequence[int]]) -> Schedule | None:
    """Earliest start times for fixed robot sequences; None on deadlock.

    Moves absent from every sequence are skipped; their own predecessors are
    passed on to their successors so transitive orderings still hold.
    """
    n = len(plan)
    assigned = [-1] * n
    for r, seq in enumerate(sequences):
        for j in seq:
            assigned[j] = r
    preds = _effective_preds(preds, assigned)
    start = [0.0] * n
    finish = [None] * n
    ptr = [0] * len(sequences)
    free = [0.0] * len(sequences)
    pos = [wh.robot_start] * len(sequences)
    remaining = sum(len(s) for s in sequences)
    makespan = 0.0
    while remaining:
        progressed = False
        for r, seq in enumerate(sequences):
            while ptr[r] < len(seq):
                j = seq[ptr[r]]
                if any(finish[p] is None for p in preds[j]):
                    break
                src, dst = move_coords(wh, plan[j])
                ready = max((finish[p] for p in preds[j]), default=0.0)
                start[j] = max(free[r] + wh.travel(pos[r], src), ready)
                finish[j] = start[j] + move_duration(wh, plan[j])
                free[r], pos[r] = finish[j], dst
                makespan = max(makespan, finish[j])
                ptr[r] += 1
                remaining -= 1
                progressed = True
        if not progressed:
            return None
    return Schedule(tuple(tuple(s) for s in sequences), tuple(start), tuple(assigned), makespan)


def list_schedule(wh: Warehouse, plan: Sequence[Move], preds: Sequence[Sequence[int]],
                  improve: bool = True) -> Schedule:
    """Repeatedly start the ready move that can begin earliest, on the robot that allows it,
    then polish the result with :func:`improve_schedule`."""
    n = len(plan)
    done = [False] * n
    finish = [0.0] * n
    free = [0.0] * wh.robots
    pos = [wh.robot_start] * wh.robots
    seqs = [[] for _ in range(wh.robots)]
    start = [0.0] * n
    robot = [-1] * n
    for _ in range(n):
        best = None
        for j in range(n):
            if done[j] or not all(done[p] for p in preds[j]):
                continue
            src, _ = move_coords(wh, plan[j])
            ready = max((finish[p] for p in preds[j]), default=0.0)
            for r in range(wh.robots):
                s = max(free[r] + wh.travel(pos[r], src), ready)
                if best is None or (s, j, r) < best:
                    best = (s, j, r)
        if best is None:
            raise MalformedPlan("precedence graph has a cycle")
        s, j, r = best
        done[j] = True
        start[j], robot[j] = s, r
        finish[j] = s + move_duration(wh, plan[j])
        free[r], pos[r] = finish[j], move_coords(wh, plan[j])[1]
        seqs[r].append(j)
    makespan = max(finish, default=0.0)
    sched = Schedule(tuple(tuple(s) for s in seqs), tuple(start), tuple(robot), makespan)
    return improve_schedule(wh, plan, preds, sched) if improve else sched


def improve_schedule(wh: Warehouse, plan: Sequence[Move], preds, sched: Schedule, max_passes: int = 10) -> Schedule:
    """Take each move out and reinsert it at its best robot/position while that lowers the makespan."""
    for _ in range(max_passes):
        improved = False
        for j in range(len(plan)):
            seqs = [[i for i in s if i != j] for s in sched.sequences]
            trial = insert_moves(wh, plan, preds, seqs, [j])
            if trial.makespan < sched.makespan - _EPS:
                sched, improved = trial, True
        if not improved:
            break
    return sched


def insert_moves(wh: Warehouse, plan: Sequence[Move], preds, sequences, moves: Sequence[int]) -> Schedule:
    """Insert ``moves`` one by one at the robot/position giving the lowest makespan."""
    seqs = [list(s) for s in sequences]
    for j in moves:
        best = None
        for r in range(len(seqs)):
            for p in range(len(seqs[r]) + 1):
                trial = [list(s) for s in seqs]
                trial[r].insert(p, j)
                sched = time_sequences(wh, plan, preds, trial)
                if sched is not None and (best is None or sched.makespan < best[0] - _EPS):
                    best = (sched.makespan, r, p)
        if best is None:
            raise MalformedPlan(f"move {j} cannot be inserted without deadlock")
        seqs[best[1]].insert(best[2], j)
    sched = time_sequences(wh, plan, preds, seqs)
    assert sched is not None
    return sched


def validate_schedule(wh: Warehouse, plan: Sequence[Move], preds, sched: Schedule) -> list:
    out = []
    n = len(plan)
    if sorted(j for s in sched.sequences for j in s) != list(range(n)):
        out.append(Violation("PlanViolation", "schedule does not cover every move exactly once"))
        return out
    finish = [sched.start[j] + move_duration(wh, plan[j]) for j in range(n)]
    for j in range(n):
        for p in preds[j]:
            if sched.start[j] < finish[p] - _EPS:
                out.append(Violation("PrecedenceViolation", f"move {j} starts before move {p} ends"))
    for r, seq in enumerate(sched.sequences):
        here, t = wh.robot_start, 0.0
        for j in seq:
            src, dst = move_coords(wh, plan[j])
            if sched.start[j] < t - _EPS:
                out.append(Violation("OverlapViolation", f"robot {r} runs move {j} while busy"))
            elif sched.start[j] < t + wh.travel(here, src) - _EPS:
                out.append(Violation("TravelViolation", f"robot {r} cannot reach move {j} in time"))
            here, t = dst, finish[j]
    if abs(max(finish, default=0.0) - sched.makespan) > 1e-6:
        out.append(Violation("PlanViolation", "makespan does not match the last finish time"))
    return out


# ------------------------------------------------------------------- state


@dataclass(frozen=True)
class MupState:
    plan: tuple
    preds: tuple
    schedule: Schedule
    final: Config = field(compare=False)


def state_from_plan(wh: Warehouse, plan: Sequence[Move], schedule: Schedule | None = None) -> MupState:
    plan = tuple(plan)
    preds = derive_precedences(wh, plan)
    if schedule is None:
        schedule = list_schedule(wh, plan, preds)
    return MupState(plan, preds, schedule, replay(wh, plan))


def initial_state(wh: Warehouse) -> MupState:
    return state_from_plan(wh, greedy_move_plan(wh))


def check_feasible(wh: Warehouse, state: MupState) -> list:
    try:
        final = replay(wh, state.plan)
        preds = derive_precedences(wh, state.plan)
    except MalformedPlan as exc:
        return [Violation("PlanViolation", str(exc))]
    out = []
    if blockage_count(wh, final):
        out.append(Violation("BlockageViolation", f"{blockage_count(wh, final)} loads still blocking"))
    if any(set(a) - set(b) for a, b in zip(preds, state.preds)):
        out.append(Violation("PrecedenceViolation", "stored precedences miss required edges"))
    out += validate_schedule(wh, state.plan, preds, state.schedule)
    return out


def extract_features(k: int, wh: Warehouse, state: MupState) -> FeatureTable:
    rows = []
    if k == MOVE_SEARCH:
        config = wh.stacks
        for j, m in enumerate(state.plan):
            stack = config[m.src_lane]
            p = wh.priority[m.load]
            unblocks = sum(1 for x in stack[1:] if wh.priority[x] < p)
            a, b = move_coords(wh, m)
            config = apply_move(wh, config, m)
            fill = len(config[m.dst_lane]) / wh.lanes[m.dst_lane].depth
            rows.append((wh.travel(a, b) * wh.speed, p, unblocks, j, fill))
        return FeatureTable(MOVE_SCHEMA, rows)
    if k == ROUTING:
        sched = state.schedule
        depth = dag_depths(state.preds)
        busy = [sum(move_duration(wh, state.plan[j]) for j in seq) for seq in sched.sequences]
        prev_dst = {}
        for seq in sched.sequences:
            here = wh.robot_start
            for j in seq:
                prev_dst[j] = here
                here = move_coords(wh, state.plan[j])[1]
        for j, m in enumerate(state.plan):
            r = sched.robot[j]
            ratio = busy[r] / sched.makespan if sched.makespan > 0 else 0.0
            travel = wh.travel(prev_dst[j], move_coords(wh, m)[0])
            rows.append((sched.start[j], move_duration(wh, m), ratio, depth[j], travel))
        return FeatureTable(ROUTING_SCHEMA, rows)
    raise ValueError(f"MR-MUPMP has subproblems 1 (move search) and 2 (routing), got {k}")


def destroy_repair(k: int, wh: Warehouse, state: MupState, indices: Sequence[int]) -> MupState:
    """Remove the selected elements and rebuild deterministically.

    Move search: drop the selected moves and every move that depends on them,
    replay the rest, finish with the greedy planner (which ranks the removed
    relocations last) and insert the new moves into the kept robot
    sequences. If greedy stalls after the kept prefix, the plan is rebuilt
    from the initial layout. Routing: unassign the selected moves and
    reinsert them at the cheapest robot/position (lowest makespan).
    Raises NoSolution only when plain greedy fails from the initial layout,
    in which case no initial state exists either.
    """
    if not indices:
        return state
    if k == MOVE_SEARCH:
        dropped = set(indices)
        for j in range(len(state.plan)):
            if any(p in dropped for p in state.preds[j]):
                dropped.add(j)
        kept = [j for j in range(len(state.plan)) if j not in dropped]
        kept_plan = [state.plan[j] for j in kept]
        avoid = frozenset((state.plan[j].load, state.plan[j].dst_lane) for j in indices)
        try:
            plan = kept_plan + greedy_move_plan(wh, replay(wh, kept_plan), avoid=avoid)
        except NoSolution:
            # the kept prefix led somewhere greedy cannot finish from; start over
            kept, kept_plan = [], []
            try:
                plan = greedy_move_plan(wh, avoid=avoid)
            except NoSolution:
                plan = greedy_move_plan(wh)
        preds = derive_precedences(wh, plan)
        renumber = {old: new for new, old in enumerate(kept)}
        seqs = [[renumber[j] for j in seq if j in renumber] for seq in state.schedule.sequences]
        sched = insert_moves(wh, plan, preds, seqs, range(len(kept), len(plan)))
        return MupState(tuple(plan), preds, sched, replay(wh, plan))
    if k == ROUTING:
        drop = set(indices)
        seqs = [[j for j in seq if j not in drop] for seq in state.schedule.sequences]
        sched = insert_moves(wh, state.plan, state.preds, seqs, sorted(drop))
        return MupState(state.plan, state.preds, sched, state.final)
    raise ValueError(f"MR-MUPMP has subproblems 1 (move search) and 2 (routing), got {k}")


# --------------------------------------------------------------- documents


def make_bay(bay_id: int, origin: tuple, lanes: int, depth: int, access: str = "south", first_lane: int = 0) -> list:
    out = []
    for j in range(lanes):
        x = origin[0] + j
        if access == "south":
            slots = tuple((x, origin[1] + p) for p in range(depth))
        elif access == "north":
            slots = tuple((x, origin[1] + depth - 1 - p) for p in range(depth))
        else:
            raise FormatError(f"unknown access direction {access!r}")
        out.append(Lane(first_lane + j, bay_id, slots))
    return out


def _kv(rest: str) -> dict:
    try:
        return dict(tok.split("=", 1) for tok in rest.split())
    except ValueError:
        raise FormatError(f"malformed record {rest!r}") from None


def parse_warehouse(text: str, name: str = "warehouse") -> Warehouse:
    """Canonical document, one record per line::

        name toy3x3
        robots count=2 speed=1 pick=1 drop=1 start=0,0
        bay id=0 x=0 y=0 lanes=3 depth=3 access=south
        lane bay=0 index=0 loads=1:3,2:1
    """
    name_, robots, bays, lane_recs = name, {}, [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        if key == "name":
            name_ = rest.strip()
        elif key == "robots":
            robots = _kv(rest)
        elif key == "bay":
            bays.append(_kv(rest))
        elif key == "lane":
            lane_recs.append(_kv(rest))
        else:
            raise FormatError(f"unknown record {key!r}")
    try:
        lanes, bay_first = [], {}
        for b in bays:
            bid = int(b["id"])
            bay_first[bid] = len(lanes)
            lanes += make_bay(bid, (int(b["x"]), int(b["y"])), int(b["lanes"]), int(b["depth"]),
                              b.get("access", "south"), len(lanes))
        stacks = [()] * len(lanes)
        priority = {}
        for rec in lane_recs:
            idx = bay_first[int(rec["bay"])] + int(rec["index"])
            loads = []
            for tok in filter(None, rec.get("loads", "").split(",")):
                lid, pr = tok.split(":")
                loads.append(int(lid))
                priority[int(lid)] = int(pr)
            stacks[idx] = tuple(loads)
        start = tuple(int(v) for v in robots.get("start", "0,0").split(","))
        return Warehouse(name_, tuple(lanes), tuple(stacks), priority,
                         robots=int(robots.get("count", 2)), speed=float(robots.get("speed", 1)),
                         pick_time=float(robots.get("pick", 1)), drop_time=float(robots.get("drop", 1)),
                         robot_start=start)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"bad warehouse document: {exc}") from None


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def format_warehouse(wh: Warehouse) -> str:
    lines = [f"name {wh.name}",
             f"robots count={wh.robots} speed={_num(wh.speed)} pick={_num(wh.pick_time)} "
             f"drop={_num(wh.drop_time)} start={wh.robot_start[0]},{wh.robot_start[1]}"]
    bays: dict = {}
    for lane in wh.lanes:
        bays.setdefault(lane.bay, []).append(lane)
    for bid, lanes in bays.items():
        first = lanes[0]
        access = "south" if first.depth < 2 or first.slots[1][1] > first.slots[0][1] else "north"
        oy = min(y for _, y in first.slots)
        lines.append(f"bay id={bid} x={first.slots[0][0]} y={oy} lanes={len(lanes)} depth={first.depth} access={access}")
    for lane in wh.lanes:
        stack = wh.stacks[lane.id]
        if stack:
            idx = lane.id - min(ln.id for ln in bays[lane.bay])
            loads = ",".join(f"{x}:{wh.priority[x]}" for x in stack)
            lines.append(f"lane bay={lane.bay} index={idx} loads={loads}")
    return "\n".join(lines) + "\n"


def import_json_layout(text: str, name: str = "imported") -> Warehouse:
    """Experimental: JSON with ``bays`` (each ``origin``, ``access`` and
    ``lanes`` given as priority lists from the access end) and ``robots``."""
    try:
        doc = json.loads(text)
        lanes, stacks, priority, next_id = [], [], {}, 1
        for b, bay in enumerate(doc["bays"]):
            depth = int(bay["depth"])
            ox, oy = bay.get("origin", [b * (len(bay["lanes"]) + 1), 0])
            lanes += make_bay(b, (ox, oy), len(bay["lanes"]), depth, bay.get("access", "south"), len(lanes))
            for prios in bay["lanes"]:
                ids = []
                for p in prios:
                    priority[next_id] = int(p)
                    ids.append(next_id)
                    next_id += 1
                stacks.append(tuple(ids))
        robots = doc.get("robots", {})
        return Warehouse(doc.get("name", name), tuple(lanes), tuple(stacks), priority,
                         robots=int(robots.get("count", 2)), speed=float(robots.get("speed", 1)),
                         pick_time=float(robots.get("pick", 1)), drop_time=float(robots.get("drop", 1)))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"unrecognised layout: {exc}") from None


def load_warehouse(path, experimental: bool = False) -> Warehouse:
    path = Path(path)
    text = path.read_text()
    return import_json_layout(text, path.stem) if experimental else parse_warehouse(text, path.stem)


# ------------------------------------------------------------ problem object

SEED_MOVES = (
    "rho=0.2; score = move_distance + rand()",
    "Undo the longest relocations first so the planner can look for shorter ones.",
)
SEED_ROUTING = (
    "rho=0.2; score = travel_from_prev + rand()",
    "Reassign moves that force long empty trips between consecutive jobs of a robot.",
)

DESCRIPTION = (
    "Multi-robot unit-load pre-marshalling. Unit loads with priority classes (1 is retrieved "
    "first) are stored in lanes that can only be accessed from one end. A load blocks if an "
    "earlier-retrieved load sits behind it. Subproblem 1 (move search) chooses relocation moves "
    "until no lane has a blocking load; subproblem 2 (routing) assigns the moves to robots and "
    "times them so that moves touching the same lane keep their order. The objective is the "
    "makespan. A deterministic repair rebuilds a feasible plan after the destroy heuristic "
    "removes elements."
)


class MRMUPMP:
    name = "mrmupmp"
    subproblems = ("move_search", "routing")
    schemas = (MOVE_SCHEMA, ROUTING_SCHEMA)
    description = DESCRIPTION
    element_names = ("relocation moves", "robot assignments of moves")

    def initial_solution(self, instance: Warehouse) -> MupState:
        return initial_state(instance)

    def objective(self, instance: Warehouse, state: MupState) -> float:
        return state.schedule.makespan

    def check_feasible(self, instance: Warehouse, state: MupState) -> list:
        return check_feasible(instance, state)

    def extract_features(self, k: int, instance: Warehouse, state: MupState) -> FeatureTable:
        return extract_features(k, instance, state)

    def destroy_repair(self, k: int, instance: Warehouse, state: MupState, indices) -> MupState:
        return destroy_repair(k, instance, state, indices)

    def seed_heuristics(self) -> list:
        return [SEED_MOVES, SEED_ROUTING]

    def load_instance(self, path, experimental: bool = False) -> Warehouse:
        return load_warehouse(path, experimental)
