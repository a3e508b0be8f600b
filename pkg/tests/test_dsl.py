import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupledlns import dsl
from coupledlns.dsl import BinOp, Call, Cmp, FeatureTable, Neg, Num, Program, Var

SCHEMA = ("quantity", "holding", "slack")


def balanced(leaf, n, op="+"):
    """Balanced binary expression over n copies of ``leaf`` (depth about log2 n)."""
    if n == 1:
        return leaf
    return f"({balanced(leaf, n // 2, op)} {op} {balanced(leaf, n - n // 2, op)})"


def table(rows, schema=SCHEMA):
    return FeatureTable(schema, rows)


def random_program(seed, depth=6):
    return dsl.transform("generate", [], seed, SCHEMA, depth)


# ---------------------------------------------------------------- parsing


def test_parse_reference_example():
    p = dsl.parse("rho=0.25; score = quantity + 2*holding")
    assert p == Program(0.25, BinOp("+", Var("quantity"), BinOp("*", Num(2.0), Var("holding"))))


def test_rho_is_clamped():
    assert dsl.parse("rho=0.9; score = 1").rho == 0.5
    assert dsl.parse("rho=0.001; score = 1").rho == 0.05


def test_missing_header_uses_default_rho():
    assert dsl.parse("score = slack").rho == dsl.DEFAULT_RHO


@pytest.mark.parametrize("src", ["score = +", "score = (quantity", "rho=; score = 1", "score = min(1)",
                                 "score = foo(1)", "quantity + 1", "score = 1 2", "score = rand(1)"])
def test_malformed_sources_raise_syntax_error(src):
    with pytest.raises(SyntaxError) as err:
        dsl.parse(src)
    assert isinstance(err.value, dsl.DslError)


def test_syntax_error_reports_position():
    with pytest.raises(dsl.DslSyntaxError) as err:
        dsl.parse("rho=0.2;\nscore = quantity +")
    assert err.value.line == 2
    assert err.value.column > 0


def test_unknown_identifier_rejected_at_bind_not_parse():
    p = dsl.parse("score = mystery")
    with pytest.raises(dsl.UnknownFeature):
        dsl.select_removals(p, table([[1, 2, 3]]))


def test_limits():
    deep = "score = " + "-(" * 12 + "1" + ")" * 12
    with pytest.raises(dsl.LimitExceeded):
        dsl.parse(deep)
    wide = "score = " + " + ".join(["quantity"] * 129)
    with pytest.raises(dsl.LimitExceeded):
        dsl.parse(wide)
    ok = "score = " + "-(" * 11 + "1" + ")" * 11
    assert dsl.parse(ok).depth == 12


def test_comparison_spellings():
    a = dsl.parse("score = if(quantity = 1, 2, 3)")
    b = dsl.parse("score = if(quantity == 1, 2, 3)")
    assert a == b
    assert dsl.parse("score = quantity ≤ 2") == dsl.parse("score = quantity <= 2")


def test_min_max_fold_left():
    assert dsl.parse("score = min(1, 2, 3)").body == Call("min", (Call("min", (Num(1.0), Num(2.0))), Num(3.0)))


# -------------------------------------------------------------- rendering


def test_render_reference_example():
    assert dsl.render(dsl.parse("rho=0.25; score = quantity + 2*holding")) == \
        "rho=0.25; score = (quantity + (2 * holding))"


def test_render_nested_if_round_trips():
    src = "rho=0.3; score = if(quantity > 1, if(slack <= 0, -holding, 2.5), min(quantity, slack))"
    p = dsl.parse(src)
    assert dsl.parse(dsl.render(p)) == p


@pytest.mark.parametrize("seed", range(1000))
def test_render_round_trip_random_asts(seed):
    p = random_program(seed, depth=8)
    text = dsl.render(p)
    assert dsl.parse(text) == p
    assert dsl.render(dsl.parse(text)) == text


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_number_rendering_is_exact(x):
    p = Program(0.2, Num(abs(x)))
    assert dsl.parse(dsl.render(p)).body.value == abs(x)


# -------------------------------------------------------------- semantics


def test_select_removals_examples():
    t = FeatureTable(("quantity",), [[3], [9], [1], [7]])
    assert dsl.select_removals(dsl.parse("rho=0.5; score = quantity"), t) == [1, 3]
    assert dsl.select_removals(dsl.parse("rho=0.05; score = 1"), t) == [0]
    assert dsl.select_removals(dsl.parse("rho=0.5; score = quantity / 0"), t) == [0, 1]


def test_total_semantics():
    row = {"quantity": 2.0, "holding": 0.0, "slack": 1.0}
    cases = {
        "score = quantity / holding": 0.0,
        "score = 1e300 * 1e300": 0.0,
        "score = quantity > 1": 1.0,
        "score = quantity < 1": 0.0,
        "score = if(holding, 5, 7)": 7.0,
        "score = if(quantity, 5, 7)": 5.0,
        "score = max(quantity, slack) - min(quantity, slack)": 1.0,
        "score = -quantity * 3": -6.0,
    }
    t = table([[2.0, 0.0, 1.0]])
    for src, want in cases.items():
        p = dsl.parse(src)
        assert dsl.evaluate_row(p, row) == want, src
        assert dsl.score_rows(p, t)[0] == want, src


def test_rand_is_order_independent_and_in_unit_interval():
    p = dsl.parse("score = rand() + 10 * rand()")
    rows = np.arange(30, dtype=float).reshape(10, 3)
    t = table(rows)
    vec = dsl.score_rows(p, t, dsl.EvalContext(seed=42))
    scal = [dsl.evaluate_row(p, dict(zip(SCHEMA, r)), seed=42, row_index=i) for i, r in enumerate(rows)]
    assert np.array_equal(vec, np.array(scal))
    u = [dsl.rand_value(7, i, 0) for i in range(1000)]
    assert all(0.0 <= x < 1.0 for x in u)
    assert 0.4 < sum(u) / len(u) < 0.6
    # reversed evaluation order, same draws
    back = [dsl.evaluate_row(p, dict(zip(SCHEMA, rows[i])), seed=42, row_index=i) for i in reversed(range(10))]
    assert back[::-1] == scal


def test_lazy_if_in_scalar_evaluator_skips_untaken_branch():
    p = dsl.parse("score = if(1, 2, " + balanced("quantity", 100) + ")")
    assert dsl.evaluate_row(p, {"quantity": 1.0}, budget=10) == 2.0


def test_budget_enforced_on_deep_expression():
    # 128 leaves under a balanced tree: 255 nodes, inside both structural caps
    p = dsl.parse("score = " + balanced("holding", 128, "*"))
    assert p.size == 255 and p.depth <= dsl.MAX_DEPTH
    t = table([[1, 2, 3]])
    with pytest.raises(dsl.BudgetExceeded):
        dsl.select_removals(p, t, dsl.EvalContext(budget=50))
    with pytest.raises(dsl.BudgetExceeded):
        dsl.evaluate_row(p, dict(zip(SCHEMA, [1, 2, 3])), budget=50)
    assert len(dsl.select_removals(p, t, dsl.EvalContext(budget=1000))) == 1


def test_eval_context_rejects_nonpositive_budget():
    with pytest.raises(ValueError):
        dsl.EvalContext(budget=0)


def test_feature_table_invariants():
    with pytest.raises(ValueError):
        table([[1, 2]])
    with pytest.raises(ValueError):
        table([[1, 2, math.inf]])
    assert len(table(np.zeros((0, 3)))) == 0
    with pytest.raises(ValueError):
        dsl.select_removals(dsl.parse("score = 1"), table(np.zeros((0, 3))))


@pytest.mark.parametrize("n", [1, 2, 3, 7, 10, 40])
@pytest.mark.parametrize("rho", [0.05, 0.1, 0.2, 0.3, 0.5])
def test_removal_count(n, rho):
    k = dsl.removal_count(rho, n)
    assert 1 <= k <= math.ceil(0.5 * n)
    assert k == max(1, math.ceil(round(rho * n, 9)))
    assert dsl.removal_count(0.3, 10) == 3


@settings(max_examples=60)
@given(st.integers(0, 10_000), st.lists(st.lists(st.floats(-50, 50), min_size=3, max_size=3), min_size=1, max_size=30),
       st.floats(-1e3, 1e3))
def test_rank_invariance_under_constant_shift(seed, rows, c):
    p = random_program(seed, depth=4)
    shifted = Program(p.rho, BinOp("+", p.body, Num(abs(c))))
    t = table(rows)
    ctx = dsl.EvalContext(seed=seed)
    base = dsl.score_rows(p, t, ctx)
    if np.max(np.abs(base), initial=0) > 1e6:  # float rounding can reorder huge scores
        return
    # the shift must not merge distinct scores
    if len(np.unique(base)) != len(np.unique(base + abs(c))):
        return
    assert dsl.select_removals(p, t, ctx) == dsl.select_removals(shifted, t, ctx)


# -------------------------------------------------------------- transforms


def test_transform_determinism_and_arity():
    a = random_program(1)
    b = random_program(2)
    for kind, parents in [("generate", []), ("mutate", [a]), ("perturb_constants", [a]), ("crossover", [a, b])]:
        assert dsl.transform(kind, parents, 5, SCHEMA) == dsl.transform(kind, parents, 5, SCHEMA)
    with pytest.raises(dsl.ArityError):
        dsl.transform("generate", [a], 0, SCHEMA)
    with pytest.raises(dsl.ArityError):
        dsl.transform("mutate", [], 0, SCHEMA)
    with pytest.raises(dsl.ArityError):
        dsl.transform("crossover", [a], 0, SCHEMA)
    with pytest.raises(ValueError):
        dsl.transform("teleport", [], 0, SCHEMA)


def _shape(node):
    if isinstance(node, Num):
        return "num"
    return (type(node).__name__, getattr(node, "op", getattr(node, "fn", getattr(node, "name", None))),
            tuple(_shape(k) for k in dsl.children(node)))


def _numbers(node):
    return [n.value for n in dsl.walk(node) if isinstance(n, Num)]


def test_perturb_constants_matches_seeded_generator():
    import random
    p = dsl.parse("rho=0.2; score = 3*quantity")
    q = dsl.transform("perturb_constants", [p], 11, SCHEMA)
    rng = random.Random(11)
    want_rho = 0.2 * rng.uniform(0.5, 2.0)
    want_c = 3 * rng.uniform(0.5, 2.0)
    assert _shape(q.body) == _shape(p.body)
    assert q.rho == pytest.approx(dsl.clamp_rho(want_rho))
    assert _numbers(q.body) == [pytest.approx(want_c)]
    assert _numbers(q.body) != [3.0]


@pytest.mark.parametrize("seed", range(50))
def test_perturb_constants_only_touches_literals(seed):
    p = random_program(seed)
    q = dsl.transform("perturb_constants", [p], seed + 1, SCHEMA)
    assert _shape(q.body) == _shape(p.body)
    for a, b in zip(_numbers(p.body), _numbers(q.body)):
        if a != 0:
            assert 0.5 - 1e-9 <= b / a <= 2.0 + 1e-9


def _subtrees(node):
    return set(dsl.walk(node))


@pytest.mark.parametrize("seed", range(100))
def test_crossover_subtrees_come_from_parents(seed):
    a, b = random_program(2 * seed), random_program(2 * seed + 1)
    c = dsl.transform("crossover", [a, b], seed, SCHEMA)
    novel = [n for n in _subtrees(c.body) if n not in _subtrees(a.body) | _subtrees(b.body)]
    # every new subtree lies on the single path from the root to the graft point
    for x in novel:
        for y in novel:
            assert x in _subtrees(y) or y in _subtrees(x)
    assert c.rho in (a.rho, b.rho)


@pytest.mark.parametrize("seed", range(1000))
def test_generate_respects_caps(seed):
    p = dsl.transform("generate", [], seed, SCHEMA, max_depth=12)
    assert p.depth <= dsl.MAX_DEPTH and p.size <= dsl.MAX_NODES
    assert dsl.RHO_MIN <= p.rho <= dsl.RHO_MAX
    assert p.features <= set(SCHEMA)


@pytest.mark.parametrize("seed", range(200))
def test_mutate_respects_caps(seed):
    p = random_program(seed, depth=12)
    q = dsl.transform("mutate", [p], seed, SCHEMA)
    assert q.depth <= dsl.MAX_DEPTH and q.size <= dsl.MAX_NODES


def test_digest_is_stable():
    p = dsl.parse("rho=0.25; score = quantity + 2*holding")
    assert dsl.digest(p) == dsl.digest(dsl.parse(dsl.render(p)))
    assert len(dsl.digest(p)) == 12
    assert dsl.digest(p) != dsl.digest(dsl.parse("rho=0.3; score = quantity + 2*holding"))


def test_grammar_is_published():
    assert "program" in dsl.GRAMMAR and "rand" in dsl.GRAMMAR
