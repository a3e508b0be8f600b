import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupledlns import dsl, irp
from coupledlns.irp import Customer, IrpInstance, IrpSolution
from oracles import irp_brute_force


def inst_of(customers, horizon, capacity=18, depot=(0, 0)):
    return IrpInstance("t", horizon, capacity, depot, (0,) * horizon, tuple(customers))


def cust(i, x, y, start=0, mn=0, mx=10, demand=(0, 0), h=0.0):
    return Customer(i, x, y, start, mn, mx, tuple(demand), h)


# ------------------------------------------------------------------ documents

DOC = """name two
horizon 2
capacity 18
depot x=0 y=0 production=5,5
customer id=1 x=3 y=4 start=2 min=0 max=10 holding=0.5 demand=3,3
customer id=2 x=-3 y=4 start=1 min=0 max=6 holding=0.25 demand=1,2
"""


def test_parse_and_format_round_trip():
    inst = irp.parse_instance(DOC)
    assert inst.horizon == 2 and inst.n == 2 and inst.capacity == 18
    assert inst.customers[1].demand == (1, 2)
    assert irp.format_instance(inst) == DOC
    assert inst.d(0, 1) == 5.0


def test_parse_rejects_bad_documents():
    with pytest.raises(irp.InvariantViolation):
        irp.parse_instance(DOC.replace("start=2", "start=12"))
    with pytest.raises(irp.FormatError):
        irp.parse_instance(DOC.replace("capacity 18\n", ""))
    with pytest.raises(irp.FormatError):
        irp.parse_instance(DOC + "vehicle 3\n")
    with pytest.raises(irp.FormatError):
        irp.parse_instance(DOC.replace("holding=0.5 ", ""))
    with pytest.raises(irp.FormatError):
        irp.parse_instance(DOC.replace("x=3", "x"))


def test_shipped_25_node_fixture(irp_25):
    assert irp_25.n == 24 and irp_25.capacity == 18 and irp_25.horizon == 6


def test_benchmark_importer():
    text = "3 2 18\n0 0 0 10 5 0.3\n1 3 4 2 10 0 3 0.5\n2 -3 4 1 6 0 1 0.25\n"
    inst = irp.import_benchmark(text)
    assert inst.n == 2 and inst.customers[0].max_level == 10 and inst.customers[1].demand == (1, 1)
    with pytest.raises(irp.FormatError):
        irp.import_benchmark("garbage")


# ----------------------------------------------------------------- cost model


def test_cost_examples():
    one = inst_of([cust(1, 3, 4, demand=(0,))], 1)
    sol = IrpSolution(((1.0,),), (((0,),),))
    assert irp.transport_cost(one, sol) == 10.0
    assert irp.cost(one, IrpSolution(((0.0,),), ((),))) == 0.0
    hold = inst_of([cust(1, 3, 4, start=5, demand=(1, 3), h=0.5)], 2)
    assert irp.cost(hold, IrpSolution(((0.0, 0.0),), ((), ()))) == 2.5


def test_cost_decomposes(irp_25):
    sol = irp.initial_solution(irp_25)
    t, h = irp.transport_cost(irp_25, sol), irp.holding_cost(irp_25, sol)
    assert t >= 0 and h >= 0
    assert irp.cost(irp_25, sol) == pytest.approx(t + h)


def test_route_length_triangle():
    inst = inst_of([cust(1, 3, 0), cust(2, 3, 4)], 2)
    assert irp.route_length(inst, (0, 1)) == pytest.approx(3 + 4 + 5)


# ------------------------------------------------------------ initial solution


def test_initial_solution_zero_demand():
    inst = inst_of([cust(1, 3, 4, start=4, demand=(0, 0), h=1)], 2)
    sol = irp.initial_solution(inst)
    assert sol.deliveries == ((0.0, 0.0),)
    assert irp.cost(inst, sol) == 8.0


def test_initial_solution_order_up_to_max():
    inst = inst_of([cust(1, 3, 4, start=2, demand=(3, 3))], 2)
    sol = irp.initial_solution(inst)
    assert sol.deliveries[0] == (8.0, 0.0)
    assert irp.check_feasible(inst, sol) == []


def test_initial_solution_splits_routes_on_capacity():
    inst = inst_of([cust(1, 3, 4, demand=(10,)), cust(2, -3, 4, demand=(10,))], 1)
    sol = irp.initial_solution(inst)
    assert len(sol.routes[0]) == 2
    assert irp.check_feasible(inst, sol) == []


def test_infeasible_instance_detected():
    inst = inst_of([cust(1, 3, 4, mx=30, demand=(25,))], 1)
    with pytest.raises(irp.InfeasibleInstance):
        irp.initial_solution(inst)


# ----------------------------------------------------------------- feasibility


def test_check_feasible_reports_each_kind():
    inst = inst_of([cust(1, 3, 4, mx=30, demand=(0,)), cust(2, 3, 0, mx=30, demand=(0,))], 1)
    over = IrpSolution(((10.0,), (9.0,)), (((0, 1),),))
    kinds = [v.kind for v in irp.check_feasible(inst, over)]
    assert kinds == ["CapacityViolation"]
    orphan = IrpSolution(((1.0,), (0.0,)), ((),))
    assert [v.kind for v in irp.check_feasible(inst, orphan)] == ["ConsistencyViolation"]
    low = inst_of([cust(1, 3, 4, demand=(1,))], 1)
    assert [v.kind for v in irp.check_feasible(low, IrpSolution(((0.0,),), ((),)))] == ["InventoryViolation"]


# -------------------------------------------------------------------- features


def test_features_empty_and_geometry():
    inst = inst_of([cust(1, 3, 4, start=5, demand=(0, 0))], 2)
    sol = irp.initial_solution(inst)
    assert len(irp.extract_features(1, inst, sol)) == 0
    single = inst_of([cust(1, 3, 4, demand=(1,))], 1)
    s = irp.initial_solution(single)
    t = irp.extract_features(2, single, s)
    assert t.column("detour")[0] == pytest.approx(10.0)


def test_detour_of_middle_visit():
    inst = inst_of([cust(1, 3, 0, demand=(1,)), cust(2, 3, 4, demand=(1,)), cust(3, 0, 4, demand=(1,))], 1)
    sol = IrpSolution(((1.0,), (1.0,), (1.0,)), (((0, 1, 2),),))
    t = irp.extract_features(2, inst, sol)
    d = inst.d
    assert t.column("detour")[1] == pytest.approx(d(1, 2) + d(2, 3) - d(1, 3))
    assert list(t.column("position")) == [0, 1, 2]
    assert t.column("route_load_ratio")[0] == pytest.approx(3 / 18)


def test_inventory_features(irp_toy1):
    sol = irp.initial_solution(irp_toy1)
    t = irp.extract_features(1, irp_toy1, sol)
    assert t.schema == irp.INVENTORY_SCHEMA
    assert list(t.rows[0]) == [10.0, 0.0, 1.0, 5.0, 1.0, 0.0]


# ---------------------------------------------------------------------- repair


def test_reinsert_into_single_route_is_identity():
    inst = inst_of([cust(1, 3, 0, mx=5, demand=(1,)), cust(2, 3, 4, mx=5, demand=(1,))], 1)
    sol = irp.initial_solution(inst)
    assert len(sol.routes[0]) == 1
    for j in range(2):
        # a reversed route is an equally cheap reinsertion
        new = irp.apply_removal_and_repair(2, inst, sol, [j])
        assert irp.transport_cost(inst, new) == pytest.approx(irp.transport_cost(inst, sol))
    lone = inst_of([cust(1, 3, 4, demand=(1, 1)), cust(2, -3, 4, start=5, demand=(0, 1))], 2)
    sol = irp.initial_solution(lone)
    assert irp.apply_removal_and_repair(2, lone, sol, [0]) == sol


def test_removed_stockout_delivery_is_reinstated():
    inst = inst_of([cust(1, 3, 4, start=2, demand=(3, 3, 3), h=0.1)], 3)
    sol = irp.initial_solution(inst)
    new = irp.apply_removal_and_repair(1, inst, sol, [0])
    assert irp.check_feasible(inst, new) == []
    _, _, end = irp.levels(inst, 0, new.deliveries[0])
    assert min(end) >= 0
    assert new.deliveries[0][0] > 0


def test_repair_is_deterministic(irp_25):
    sol = irp.initial_solution(irp_25)
    for k in (1, 2):
        a = irp.apply_removal_and_repair(k, irp_25, sol, [0, 3, 5])
        b = irp.apply_removal_and_repair(k, irp_25, sol, [0, 3, 5])
        assert a == b
    assert irp.apply_removal_and_repair(1, irp_25, sol, []) is sol


@settings(max_examples=150, deadline=None)
@given(data=st.data())
def test_repair_totality(data, irp_toy6, irp_25):
    inst = data.draw(st.sampled_from([irp_toy6, irp_25]))
    sol = irp.initial_solution(inst)
    for _ in range(data.draw(st.integers(1, 6))):
        k = data.draw(st.sampled_from([1, 2]))
        n = len(irp.extract_features(k, inst, sol))
        if n == 0:
            continue
        idx = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n))
        sol = irp.apply_removal_and_repair(k, inst, sol, sorted(idx))
        assert irp.check_feasible(inst, sol) == []


def _four_customer_toy():
    return inst_of([cust(1, 3, 4, start=1, mx=4, demand=(2, 2), h=0.3),
                    cust(2, -2, 5, start=0, mx=4, demand=(3, 1), h=0.2),
                    cust(3, 6, -1, start=3, mx=4, demand=(1, 2), h=0.1),
                    cust(4, -4, -3, start=2, mx=4, demand=(2, 2), h=0.4)], 2, capacity=7)


@pytest.fixture(scope="module")
def four_toy_optimum():
    inst = _four_customer_toy()
    return inst, irp_brute_force(inst)


def test_full_destroy_cost_is_a_valid_plan_cost(four_toy_optimum):
    inst, (opt, _) = four_toy_optimum
    sol = irp.initial_solution(inst)
    everything = dsl.parse("rho=0.5; score = rand()")
    for it in range(30):
        k = 1 + it % 2
        table = irp.extract_features(k, inst, sol)
        if len(table):
            idx = dsl.select_removals(everything, table, dsl.EvalContext(seed=it))
            sol = irp.apply_removal_and_repair(k, inst, sol, idx)
        assert irp.check_feasible(inst, sol) == []
        # every repaired plan costs at least the exhaustive optimum
        assert irp.cost(inst, sol) >= opt - 1e-9


def test_brute_force_oracle_on_toy1(irp_toy1):
    opt, plan = irp_brute_force(irp_toy1)
    assert opt == pytest.approx(14.0) and plan == ((8.0, 0.0),)
    # independent enumeration of the only customer: deliveries on an integer grid
    best = math.inf
    for q1, q2 in itertools.product(range(11), repeat=2):
        sol = IrpSolution(((float(q1), float(q2)),),
                          tuple(((0,),) if q > 0 else () for q in (q1, q2)))
        if irp.check_feasible(irp_toy1, sol) == []:
            best = min(best, irp.cost(irp_toy1, sol))
    assert best == pytest.approx(opt)


def test_oracle_optimum_matches_cost_model(four_toy_optimum):
    inst, (opt, plan) = four_toy_optimum
    # rebuild the oracle's plan with exact routes and score it with the package
    best = math.inf
    for t_routes in itertools.product(*[_all_routings(inst, [q[t] for q in plan]) for t in range(2)]):
        sol = IrpSolution(tuple(tuple(float(x) for x in q) for q in plan), t_routes)
        if irp.check_feasible(inst, sol) == []:
            best = min(best, irp.cost(inst, sol))
    assert best == pytest.approx(opt)


def _all_routings(inst, qty):
    nodes = [i for i, q in enumerate(qty) if q > 0]
    out = []
    for perm in itertools.permutations(nodes):
        for cuts in itertools.product([0, 1], repeat=max(len(perm) - 1, 0)):
            routes, cur = [], [perm[0]] if perm else []
            for c, i in zip(cuts, perm[1:]):
                if c:
                    routes.append(tuple(cur))
                    cur = []
                cur.append(i)
            if cur:
                routes.append(tuple(cur))
            out.append(tuple(routes))
    return out or [()]
