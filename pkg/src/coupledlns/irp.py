"""Inventory routing: when and how much to deliver (subproblem 1) and how to
route the deliveries of each period (subproblem 2).

Inventory timing per customer and period ``t``: the delivery arrives before
demand is consumed, so ``pre_t = end_{t-1}``, ``post_t = pre_t + q_t`` and
``end_t = post_t - d_t``. Feasibility requires ``post_t <= max`` and
``end_t >= min``. Holding cost is charged on ``end_t``; transport cost is the
Euclidean length of every route (depot to depot, unrounded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .dsl import FeatureTable

INVENTORY, ROUTING = 1, 2
INVENTORY_SCHEMA = ("quantity", "inv_before", "holding_cost", "dist_depot", "period", "slack")
ROUTING_SCHEMA = ("detour", "quantity", "route_load_ratio", "position", "dist_depot")
_EPS = 1e-9


class FormatError(ValueError):
    pass


class InvariantViolation(ValueError):
    pass


class InfeasibleInstance(ValueError):
    pass


class Violation(NamedTuple):
    kind: str  # InventoryViolation | CapacityViolation | ConsistencyViolation
    message: str


@dataclass(frozen=True)
class Customer:
    id: int
    x: float
    y: float
    start: float
    min_level: float
    max_level: float
    demand: tuple
    holding: float


@dataclass(frozen=True, eq=False)
class IrpInstance:
    name: str
    horizon: int
    capacity: float
    depot: tuple
    production: tuple
    customers: tuple

    def __post_init__(self):
        if self.horizon < 1:
            raise InvariantViolation("horizon must be at least 1")
        if self.capacity <= 0:
            raise InvariantViolation("vehicle capacity must be positive")
        for c in self.customers:
            if len(c.demand) != self.horizon:
                raise InvariantViolation(f"customer {c.id}: {len(c.demand)} demands for horizon {self.horizon}")
            if any(d < 0 for d in c.demand):
                raise InvariantViolation(f"customer {c.id}: negative demand")
            if not c.min_level <= c.start <= c.max_level:
                raise InvariantViolation(
                    f"customer {c.id}: start {c.start} outside [{c.min_level}, {c.max_level}]"
                )
        pts = [self.depot] + [(c.x, c.y) for c in self.customers]
        dist = [[math.hypot(a[0] - b[0], a[1] - b[1]) for b in pts] for a in pts]
        object.__setattr__(self, "dist", dist)

    @property
    def n(self) -> int:
        return len(self.customers)

    def d(self, a: int, b: int) -> float:
        """Distance between nodes; node 0 is the depot, node i+1 customer i."""
        return self.dist[a][b]


@dataclass(frozen=True)
class IrpSolution:
    deliveries: tuple  # [customer][period]
    routes: tuple  # [period] -> tuple of routes, each a tuple of customer indices

    def quantity(self, i: int, t: int) -> float:
        return self.deliveries[i][t]


# ------------------------------------------------------------------- documents


def _numbers(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def parse_instance(text: str, name: str = "instance") -> IrpInstance:
    """Read the canonical instance document (see ``format_instance``)."""
    header: dict = {}
    depot = None
    customers = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        try:
            if key in ("name", "horizon", "capacity"):
                header[key] = rest.strip()
            elif key in ("depot", "customer"):
                fields = dict(tok.split("=", 1) for tok in rest.split())
                if key == "depot":
                    depot = fields
                else:
                    customers.append(fields)
            else:
                raise FormatError(f"line {lineno}: unknown record {key!r}")
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"line {lineno}: malformed record") from None
    if "horizon" not in header or "capacity" not in header or depot is None:
        raise FormatError("document needs horizon, capacity and depot records")
    try:
        horizon = int(header["horizon"])
        custs = tuple(
            Customer(
                id=int(c["id"]), x=float(c["x"]), y=float(c["y"]), start=float(c["start"]),
                min_level=float(c["min"]), max_level=float(c["max"]),
                demand=_numbers(c["demand"]), holding=float(c["holding"]),
            )
            for c in customers
        )
        production = _numbers(depot["production"]) if "production" in depot else (0.0,) * horizon
        return IrpInstance(
            name=header.get("name", name), horizon=horizon, capacity=float(header["capacity"]),
            depot=(float(depot["x"]), float(depot["y"])), production=production, customers=custs,
        )
    except KeyError as exc:
        raise FormatError(f"missing field {exc.args[0]!r}") from None


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def format_instance(inst: IrpInstance) -> str:
    lines = [
        f"name {inst.name}",
        f"horizon {inst.horizon}",
        f"capacity {_fmt(inst.capacity)}",
        f"depot x={_fmt(inst.depot[0])} y={_fmt(inst.depot[1])} "
        f"production={','.join(_fmt(p) for p in inst.production)}",
    ]
    for c in inst.customers:
        lines.append(
            f"customer id={c.id} x={_fmt(c.x)} y={_fmt(c.y)} start={_fmt(c.start)} "
            f"min={_fmt(c.min_level)} max={_fmt(c.max_level)} holding={_fmt(c.holding)} "
            f"demand={','.join(_fmt(d) for d in c.demand)}"
        )
    return "\n".join(lines) + "\n"


def import_benchmark(text: str, name: str = "benchmark") -> IrpInstance:
    """Experimental reader for the whitespace layout of the public IRP sets.

    Assumed layout: ``nodes horizon capacity``; supplier ``0 x y start
    production holding``; customers ``id x y start max min demand holding``
    with demand constant per period. Supplier inventory is not modelled.
    """
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    try:
        nodes, horizon, capacity = int(rows[0][0]), int(rows[0][1]), float(rows[0][2])
        sup = rows[1]
        custs = []
        for r in rows[2:nodes + 1]:
            cid, x, y, start, mx, mn, dem, hold = r[:8]
            custs.append(Customer(int(cid), float(x), float(y), float(start), float(mn), float(mx),
                                  (float(dem),) * horizon, float(hold)))
    except (IndexError, ValueError):
        raise FormatError("unrecognised benchmark layout") from None
    return IrpInstance(name, horizon, capacity, (float(sup[1]), float(sup[2])),
                       (float(sup[4]),) * horizon, tuple(custs))


def load_instance(path, benchmark: bool = False) -> IrpInstance:
    path = Path(path)
    text = path.read_text()
    return import_benchmark(text, path.stem) if benchmark else parse_instance(text, path.stem)


def generate_instance(seed: int, n_customers: int, horizon: int, capacity: float = 18,
                      clusters: int = 3, name: str | None = None) -> IrpInstance:
    """Clustered synthetic instance with integer data, used for fixtures."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0, 500, size=(clusters, 2))
    custs = []
    for i in range(n_customers):
        cx, cy = centers[i % clusters] + rng.normal(0, 40, size=2)
        demand = int(rng.integers(1, 4))
        max_level = demand * int(rng.integers(2, 4))
        start = int(rng.integers(demand, max_level + 1))
        holding = round(float(rng.uniform(0.01, 0.05)), 3)
        custs.append(Customer(i + 1, round(float(cx), 1), round(float(cy), 1), start, 0, max_level,
                              (demand,) * horizon, holding))
    total = sum(c.demand[0] for c in custs)
    return IrpInstance(name or f"gen{seed}", horizon, capacity, (250.0, 250.0), (total,) * horizon, tuple(custs))


# ------------------------------------------------------------- inventory math


def levels(inst: IrpInstance, i: int, q: Sequence[float]):
    """(pre, post, end) inventory levels of customer ``i`` for deliveries ``q``."""
    c = inst.customers[i]
    pre, post, end = [], [], []
    level = c.start
    for t in range(inst.horizon):
        pre.append(level)
        level += q[t]
        post.append(level)
        level -= c.demand[t]
        end.append(level)
    return pre, post, end


def route_length(inst: IrpInstance, route: Sequence[int]) -> float:
    if not route:
        return 0.0
    total = inst.d(0, route[0] + 1) + inst.d(route[-1] + 1, 0)
    for a, b in zip(route, route[1:]):
        total += inst.d(a + 1, b + 1)
    return total


def transport_cost(inst: IrpInstance, sol: IrpSolution) -> float:
    return sum(route_length(inst, r) for rs in sol.routes for r in rs)


def holding_cost(inst: IrpInstance, sol: IrpSolution) -> float:
    total = 0.0
    for i, c in enumerate(inst.customers):
        _, _, end = levels(inst, i, sol.deliveries[i])
        total += c.holding * sum(end)
    return total


def cost(inst: IrpInstance, sol: IrpSolution) -> float:
    return transport_cost(inst, sol) + holding_cost(inst, sol)


def check_feasible(inst: IrpInstance, sol: IrpSolution) -> list:
    out = []
    for i, c in enumerate(inst.customers):
        _, post, end = levels(inst, i, sol.deliveries[i])
        for t in range(inst.horizon):
            if sol.deliveries[i][t] < -_EPS:
                out.append(Violation("InventoryViolation", f"customer {c.id} period {t + 1}: negative delivery"))
            if post[t] > c.max_level + _EPS:
                out.append(Violation("InventoryViolation", f"customer {c.id} period {t + 1}: level {post[t]} above max"))
            if end[t] < c.min_level - _EPS:
                out.append(Violation("InventoryViolation", f"customer {c.id} period {t + 1}: level {end[t]} below min"))
    for t, rs in enumerate(sol.routes):
        seen: dict = {}
        for r in rs:
            load = sum(sol.deliveries[i][t] for i in r)
            if load > inst.capacity + _EPS:
                out.append(Violation("CapacityViolation", f"period {t + 1}: route load {load} exceeds {inst.capacity}"))
            for i in r:
                seen[i] = seen.get(i, 0) + 1
        for i in range(inst.n):
            q = sol.deliveries[i][t]
            visits = seen.get(i, 0)
            cid = inst.customers[i].id
            if q > _EPS and visits == 0:
                out.append(Violation("ConsistencyViolation", f"period {t + 1}: delivery to {cid} without a visit"))
            elif visits > 1:
                out.append(Violation("ConsistencyViolation", f"period {t + 1}: customer {cid} visited {visits} times"))
            elif visits == 1 and q <= _EPS:
                out.append(Violation("ConsistencyViolation", f"period {t + 1}: visit to {cid} without a delivery"))
    return out


# ------------------------------------------------------------ construction


def nearest_neighbor_routes(inst: IrpInstance, customers: Sequence[int], qty: Sequence[float]) -> tuple:
    """Routes for one period; ``qty[i]`` is the delivery to customer ``i``."""
    todo = list(customers)
    routes, route, load, here = [], [], 0.0, 0
    while todo:
        nxt = min(todo, key=lambda i: (inst.d(here, i + 1), i))
        if route and load + qty[nxt] > inst.capacity + _EPS:
            routes.append(tuple(route))
            route, load, here = [], 0.0, 0
            continue
        route.append(nxt)
        load += qty[nxt]
        here = nxt + 1
        todo.remove(nxt)
    if route:
        routes.append(tuple(route))
    return tuple(routes)


def initial_solution(inst: IrpInstance) -> IrpSolution:
    """Order-up-to-max whenever the period would end below the minimum level."""
    Q = inst.capacity
    deliveries = []
    for c in inst.customers:
        q = [0.0] * inst.horizon
        level = c.start
        for t in range(inst.horizon):
            if level - c.demand[t] < c.min_level - _EPS:
                q[t] = min(c.max_level - level, Q)
                if level + q[t] - c.demand[t] < c.min_level - _EPS:
                    raise InfeasibleInstance(f"customer {c.id} cannot be supplied in period {t + 1}")
            level += q[t] - c.demand[t]
        deliveries.append(tuple(q))
    routes = []
    for t in range(inst.horizon):
        served = [i for i in range(inst.n) if deliveries[i][t] > _EPS]
        routes.append(nearest_neighbor_routes(inst, served, [d[t] for d in deliveries]))
    return IrpSolution(tuple(deliveries), tuple(routes))


# ---------------------------------------------------------------- features


def _slack(inst: IrpInstance, i: int, t: int, q: Sequence[float]) -> int:
    """Periods from ``t`` that stay above the minimum without delivery ``t``."""
    qq = list(q)
    qq[t] = 0.0
    _, _, end = levels(inst, i, qq)
    c = inst.customers[i]
    for s in range(t, inst.horizon):
        if end[s] < c.min_level - _EPS:
            return s - t
    return inst.horizon - t


def inventory_elements(inst: IrpInstance, sol: IrpSolution) -> list:
    return [(i, t) for i in range(inst.n) for t in range(inst.horizon) if sol.deliveries[i][t] > _EPS]


def routing_elements(sol: IrpSolution) -> list:
    """Visits as (period, route index, position)."""
    return [(t, r, p) for t, rs in enumerate(sol.routes) for r, route in enumerate(rs) for p in range(len(route))]


def extract_features(k: int, inst: IrpInstance, sol: IrpSolution) -> FeatureTable:
    rows = []
    if k == INVENTORY:
        for i, t in inventory_elements(inst, sol):
            c = inst.customers[i]
            pre, _, _ = levels(inst, i, sol.deliveries[i])
            rows.append((sol.deliveries[i][t], pre[t], c.holding, inst.d(0, i + 1), t + 1,
                         _slack(inst, i, t, sol.deliveries[i])))
        return FeatureTable(INVENTORY_SCHEMA, rows)
    if k == ROUTING:
        for t, r, p in routing_elements(sol):
            route = sol.routes[t][r]
            i = route[p]
            prev = route[p - 1] + 1 if p > 0 else 0
            nxt = route[p + 1] + 1 if p + 1 < len(route) else 0
            detour = inst.d(prev, i + 1) + inst.d(i + 1, nxt) - inst.d(prev, nxt)
            load = sum(sol.deliveries[j][t] for j in route)
            rows.append((detour, sol.deliveries[i][t], load / inst.capacity, p, inst.d(0, i + 1)))
        return FeatureTable(ROUTING_SCHEMA, rows)
    raise ValueError(f"IRP has subproblems 1 (inventory) and 2 (routing), got {k}")


# ------------------------------------------------------------------ repair


def _cheapest_insertion(inst: IrpInstance, routes: list, i: int, load: list, qty: float):
    """Best (extra distance, route index, position); route index -1 opens a route."""
    best = (inst.d(0, i + 1) * 2, -1, 0)
    for r, route in enumerate(routes):
        if load[r] + qty > inst.capacity + _EPS:
            continue
        nodes = [0] + [j + 1 for j in route] + [0]
        for p in range(len(nodes) - 1):
            a, b = nodes[p], nodes[p + 1]
            extra = inst.d(a, i + 1) + inst.d(i + 1, b) - inst.d(a, b)
            if extra < best[0] - _EPS:
                best = (extra, r, p)
    return best


def insert_visits(inst: IrpInstance, routes: Sequence, visits: Sequence[int], qty: Sequence[float]) -> tuple:
    """Cheapest insertion of ``visits`` (in the given order) into one period."""
    routes = [list(r) for r in routes]
    load = [sum(qty[j] for j in r) for r in routes]
    for i in visits:
        _, r, p = _cheapest_insertion(inst, routes, i, load, qty[i])
        if r < 0:
            routes.append([i])
            load.append(qty[i])
        else:
            routes[r].insert(p, i)
            load[r] += qty[i]
    return tuple(tuple(r) for r in routes if r)


def _repair_customer(inst: IrpInstance, i: int, q: list):
    """Fix stockouts of customer ``i`` in place; returns False if impossible."""
    c = inst.customers[i]
    H = inst.horizon
    for _ in range(4 * H):
        _, post, end = levels(inst, i, q)
        t = next((s for s in range(H) if end[s] < c.min_level - _EPS), None)
        if t is None:
            break
        # order up to max at the latest period that still has headroom
        for tp in range(t, -1, -1):
            room = min(c.max_level - post[s] for s in range(tp, t + 1))
            add = min(room, inst.capacity - q[tp])
            if add > _EPS:
                q[tp] += add
                break
        else:
            return False
        # later deliveries absorb any overflow above max
        level = c.start
        for s in range(H):
            over = level + q[s] - c.max_level
            if over > _EPS:
                q[s] = max(0.0, q[s] - over)
            level += q[s] - c.demand[s]
    else:
        return False
    # trim: drop surplus that is never needed, latest delivery first
    for tp in range(H - 1, -1, -1):
        if q[tp] <= _EPS:
            continue
        _, _, end = levels(inst, i, q)
        surplus = min(end[s] - c.min_level for s in range(tp, H))
        if surplus > _EPS:
            q[tp] = max(0.0, q[tp] - surplus)
    return True


class RepairFailure(RuntimeError):
    pass


def apply_removal_and_repair(k: int, inst: IrpInstance, sol: IrpSolution, indices: Sequence[int]) -> IrpSolution:
    if not indices:
        return sol
    H = inst.horizon
    q = [list(d) for d in sol.deliveries]
    routes = [[list(r) for r in rs] for rs in sol.routes]

    if k == INVENTORY:
        elems = inventory_elements(inst, sol)
        touched = sorted({elems[j][0] for j in indices})
        for j in indices:
            i, t = elems[j]
            q[i][t] = 0.0
        for i in touched:
            if not _repair_customer(inst, i, q[i]):
                raise RepairFailure(f"customer {inst.customers[i].id} cannot be repaired")
        new_routes = []
        for t in range(H):
            kept, visited = [], set()
            for r in routes[t]:
                r2 = [i for i in r if q[i][t] > _EPS]
                if sum(q[i][t] for i in r2) > inst.capacity + _EPS:
                    # overloaded after a top-up: pull the touched customers out again
                    r2 = [i for i in r2 if i not in touched]
                if r2:
                    kept.append(r2)
                visited.update(r2)
            missing = [i for i in range(inst.n) if q[i][t] > _EPS and i not in visited]
            missing.sort(key=lambda i: (-q[i][t], i))
            new_routes.append(insert_visits(inst, kept, missing, [q[i][t] for i in range(inst.n)]))
        return IrpSolution(tuple(tuple(d) for d in q), tuple(new_routes))

    if k == ROUTING:
        elems = routing_elements(sol)
        removed = [[] for _ in range(H)]
        drop = set()
        for j in indices:
            t, r, p = elems[j]
            removed[t].append(sol.routes[t][r][p])
            drop.add((t, r, p))
        new_routes = []
        for t in range(H):
            kept = []
            for r, route in enumerate(routes[t]):
                rest = [i for p, i in enumerate(route) if (t, r, p) not in drop]
                if rest:
                    kept.append(rest)
            order = sorted(removed[t], key=lambda i: (-q[i][t], i))
            new_routes.append(insert_visits(inst, kept, order, [q[i][t] for i in range(inst.n)]))
        return IrpSolution(sol.deliveries, tuple(new_routes))

    raise ValueError(f"IRP has subproblems 1 (inventory) and 2 (routing), got {k}")


# ------------------------------------------------------------ problem object

SEED_INVENTORY = (
    "rho=0.2; score = holding_cost * quantity + rand()",
    "Remove deliveries that cause the most holding cost, with a little noise to break ties.",
)
SEED_ROUTING = (
    "rho=0.2; score = detour + rand()",
    "Remove visits whose detour is largest so cheaper positions can be found.",
)

DESCRIPTION = (
    "Inventory Routing Problem. A depot supplies customers over a planning horizon with a "
    "fleet of identical vehicles of limited capacity. Each customer consumes a known demand per "
    "period and must keep its inventory between a minimum and a maximum level. The goal is "
    "to minimise transport cost (Euclidean route lengths) plus inventory holding cost. "
    "Subproblem 1 (inventory) decides delivery periods and quantities; subproblem 2 (routing) "
    "sequences the deliveries of each period into capacity-feasible routes. A deterministic "
    "repair restores feasibility after the destroy heuristic removes elements."
)


class IRP:
    name = "irp"
    subproblems = ("inventory", "routing")
    schemas = (INVENTORY_SCHEMA, ROUTING_SCHEMA)
    description = DESCRIPTION
    element_names = ("deliveries (customer, period)", "route visits")

    def initial_solution(self, instance: IrpInstance) -> IrpSolution:
        return initial_solution(instance)

    def objective(self, instance: IrpInstance, state: IrpSolution) -> float:
        return cost(instance, state)

    def check_feasible(self, instance: IrpInstance, state: IrpSolution) -> list:
        return check_feasible(instance, state)

    def extract_features(self, k: int, instance: IrpInstance, state: IrpSolution) -> FeatureTable:
        return extract_features(k, instance, state)

    def destroy_repair(self, k: int, instance: IrpInstance, state: IrpSolution, indices) -> IrpSolution:
        return apply_removal_and_repair(k, instance, state, indices)

    def seed_heuristics(self) -> list:
        return [SEED_INVENTORY, SEED_ROUTING]

    def load_instance(self, path, experimental: bool = False) -> IrpInstance:
        return load_instance(path, benchmark=experimental)
