"""Scoring-expression language used to express destroy heuristics.

A program is a removal fraction ``rho`` plus an arithmetic expression that is
evaluated once per removable solution element (one row of a feature table).
The ``ceil(rho * n)`` highest-scoring rows are removed.

Grammar (EBNF)::

    program    = [ "rho" "=" number ";" ] "score" "=" expr [ ";" ] ;
    expr       = additive [ cmp_op additive ] ;
    cmp_op     = "<" | "<=" | ">" | ">=" | "==" | "=" ;
    additive   = term { ( "+" | "-" ) term } ;
    term       = unary { ( "*" | "/" ) unary } ;
    unary      = "-" unary | primary ;
    primary    = number | feature | call | "(" expr ")" ;
    call       = ( "min" | "max" ) "(" expr "," expr { "," expr } ")"
               | "if" "(" expr "," expr "," expr ")"
               | "rand" "(" ")" ;
    number     = digit { digit } [ "." { digit } ] [ exponent ] ;
    feature    = letter { letter | digit | "_" } ;

Semantics are total: division by zero yields 0, any non-finite intermediate
yields 0, comparisons yield 1.0 or 0.0, ``if`` selects on a non-zero
condition. ``rand()`` draws from a counter-based stream keyed by the
evaluation seed, the row index and the call site, so results do not depend on
evaluation order.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

RHO_MIN = 0.05
RHO_MAX = 0.5
DEFAULT_RHO = 0.2
MAX_DEPTH = 12
MAX_NODES = 256
DEFAULT_BUDGET = 10_000
_MAX_NESTING = 64
_MAX_LITERAL = 1e6

BINARY_OPS = ("+", "-", "*", "/")
COMPARE_OPS = ("<", "<=", ">", ">=", "==")
FUNCTIONS = {"min": 2, "max": 2, "if": 3, "rand": 0}
RESERVED = frozenset({"rho", "score", *FUNCTIONS})

GRAMMAR = __doc__.split("Grammar (EBNF)::", 1)[1].split("Semantics", 1)[0].strip("\n")


class DslError(Exception):
    """Base class for heuristic-language errors."""


class DslSyntaxError(DslError, SyntaxError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class LimitExceeded(DslError):
    pass


class UnknownFeature(DslError):
    pass


class BudgetExceeded(DslError):
    pass


class ArityError(DslError):
    pass


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Cmp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple = ()


Node = Union[Num, Var, Neg, BinOp, Cmp, Call]


def children(node: Node) -> tuple:
    if isinstance(node, Neg):
        return (node.arg,)
    if isinstance(node, (BinOp, Cmp)):
        return (node.left, node.right)
    if isinstance(node, Call):
        return node.args
    return ()


def with_children(node: Node, kids: Sequence[Node]) -> Node:
    if isinstance(node, Neg):
        return Neg(kids[0])
    if isinstance(node, BinOp):
        return BinOp(node.op, kids[0], kids[1])
    if isinstance(node, Cmp):
        return Cmp(node.op, kids[0], kids[1])
    if isinstance(node, Call):
        return Call(node.fn, tuple(kids))
    return node


def walk(node: Node):
    """Pre-order traversal."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def node_count(node: Node) -> int:
    return sum(1 for _ in walk(node))


def node_depth(node: Node) -> int:
    kids = children(node)
    return 1 + (max(node_depth(k) for k in kids) if kids else 0)


def clamp_rho(rho: float) -> float:
    if not math.isfinite(rho):
        return DEFAULT_RHO
    return min(RHO_MAX, max(RHO_MIN, float(rho)))


@dataclass(frozen=True)
class Program:
    rho: float
    body: Node

    def __post_init__(self):
        object.__setattr__(self, "rho", clamp_rho(self.rho))
        size = node_count(self.body)
        if size > MAX_NODES:
            raise LimitExceeded(f"program has {size} nodes, limit is {MAX_NODES}")
        depth = node_depth(self.body)
        if depth > MAX_DEPTH:
            raise LimitExceeded(f"program depth {depth} exceeds limit {MAX_DEPTH}")

    @property
    def size(self) -> int:
        return node_count(self.body)

    @property
    def depth(self) -> int:
        return node_depth(self.body)

    @property
    def features(self) -> frozenset:
        return frozenset(n.name for n in walk(self.body) if isinstance(n, Var))

    @property
    def uses_rand(self) -> bool:
        return any(isinstance(n, Call) and n.fn == "rand" for n in walk(self.body))


# ------------------------------------------------------------------------ parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|≤|≥|[-+*/(),;=<>])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            text = {"≤": "<=", "≥": ">="}.get(m.group(), m.group())
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.i = 0
        self.nesting = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str):
        raise DslSyntaxError(message, self.tok.line, self.tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("op", "ident") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")

    def number(self) -> float:
        sign = -1.0 if self.accept("-") else 1.0
        if self.tok.kind != "num":
            self.error("expected a number")
        value = float(self.tok.text)
        self.i += 1
        return sign * value

    def program(self) -> Program:
        rho = DEFAULT_RHO
        if self.accept("rho"):
            self.expect("=")
            rho = self.number()
            self.expect(";")
        self.expect("score")
        self.expect("=")
        body = self.expr()
        self.accept(";")
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r} after expression")
        return Program(rho, body)

    def expr(self) -> Node:
        self.nesting += 1
        if self.nesting > _MAX_NESTING:
            raise LimitExceeded("expression nesting too deep")
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in ("<", "<=", ">", ">=", "==", "="):
            op = "==" if self.tok.text == "=" else self.tok.text
            self.i += 1
            left = Cmp(op, left, self.additive())
        self.nesting -= 1
        return left

    def additive(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            self.nesting += 1
            if self.nesting > _MAX_NESTING:
                raise LimitExceeded("expression nesting too deep")
            node = Neg(self.unary())
            self.nesting -= 1
            return node
        return self.primary()

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if tok.text in FUNCTIONS:
                return self.call(tok)
            if tok.text in RESERVED:
                raise DslSyntaxError(f"{tok.text!r} is reserved", tok.line, tok.col)
            return Var(tok.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.error(f"unexpected {tok.text or 'end of input'!r}")

    def call(self, tok: _Tok) -> Node:
        self.expect("(")
        args = []
        if not self.accept(")"):
            args.append(self.expr())
            while self.accept(","):
                args.append(self.expr())
            self.expect(")")
        fn = tok.text
        if fn in ("min", "max") and len(args) >= 2:
            node = Call(fn, (args[0], args[1]))
            for extra in args[2:]:
                node = Call(fn, (node, extra))
            return node
        if len(args) != FUNCTIONS[fn]:
            raise DslSyntaxError(
                f"{fn}() takes {FUNCTIONS[fn]} arguments, got {len(args)}", tok.line, tok.col
            )
        return Call(fn, tuple(args))


def parse(source: str) -> Program:
    """Parse program source. Feature names are checked later, by ``bind``."""
    return _Parser(source).program()


# ---------------------------------------------------------------------- rendering


def format_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def render_node(node: Node) -> str:
    if isinstance(node, Num):
        text = format_number(abs(node.value))
        return f"(-{text})" if node.value < 0 else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{render_node(node.arg)})"
    if isinstance(node, (BinOp, Cmp)):
        return f"({render_node(node.left)} {node.op} {render_node(node.right)})"
    return f"{node.fn}({', '.join(render_node(a) for a in node.args)})"


def render(program: Program) -> str:
    return f"rho={format_number(program.rho)}; score = {render_node(program.body)}"


def digest(program: Program) -> str:
    return hashlib.sha256(render(program).encode()).hexdigest()[:12]


# ------------------------------------------------------------------- evaluation

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(*parts: int) -> int:
    """Mix integers into one 64-bit seed; order sensitive."""
    h = 0x243F6A8885A308D3
    for p in parts:
        h = splitmix64(h ^ (int(p) & _MASK))
    return h


def rand_value(seed: int, row: int, site: int) -> float:
    key = splitmix64((seed & _MASK) ^ splitmix64(site + 1))
    return (splitmix64((key + row) & _MASK) >> 11) * 2.0**-53


def _rand_column(seed: int, n: int, site: int) -> np.ndarray:
    key = np.uint64(splitmix64((seed & _MASK) ^ splitmix64(site + 1)))
    x = key + np.arange(n, dtype=np.uint64)
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    x = x ^ (x >> np.uint64(31))
    return (x >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class FeatureTable:
    schema: tuple
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.size == 0:
            rows = rows.reshape(0, len(self.schema))
        if rows.ndim != 2 or rows.shape[1] != len(self.schema):
            raise ValueError(f"rows must have {len(self.schema)} columns, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("feature values must be finite")
        rows.setflags(write=False)
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.schema.index(name)]


@dataclass(frozen=True)
class EvalContext:
    seed: int = 0
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("step budget must be positive")


def bind(program: Program, schema: Sequence[str]) -> Program:
    unknown = sorted(program.features - set(schema))
    if unknown:
        raise UnknownFeature(f"unknown feature(s) {', '.join(unknown)}; available: {', '.join(schema)}")
    return program


def _finite(x):
    return np.where(np.isfinite(x), x, 0.0)


def _rand_sites(body: Node) -> dict:
    sites = {}
    for n in walk(body):
        if isinstance(n, Call) and n.fn == "rand":
            sites[id(n)] = len(sites)
    return sites


def _eval_columns(node: Node, table: FeatureTable, seed: int, sites: dict):
    """Returns (values, steps) where steps counts evaluated nodes per row."""
    n = len(table)
    if isinstance(node, Num):
        return np.full(n, float(node.value)), 1
    if isinstance(node, Var):
        return table.column(node.name), 1
    if isinstance(node, Neg):
        v, s = _eval_columns(node.arg, table, seed, sites)
        return -v, 1 + s
    if isinstance(node, (BinOp, Cmp)):
        a, sa = _eval_columns(node.left, table, seed, sites)
        b, sb = _eval_columns(node.right, table, seed, sites)
        op = node.op
        if op == "+":
            v = _finite(a + b)
        elif op == "-":
            v = _finite(a - b)
        elif op == "*":
            v = _finite(a * b)
        elif op == "/":
            safe = np.where(b == 0, 1.0, b)
            v = np.where(b == 0, 0.0, _finite(a / safe))
        elif op == "<":
            v = (a < b).astype(float)
        elif op == "<=":
            v = (a <= b).astype(float)
        elif op == ">":
            v = (a > b).astype(float)
        elif op == ">=":
            v = (a >= b).astype(float)
        else:
            v = (a == b).astype(float)
        return v, 1 + sa + sb
    if node.fn == "rand":
        return _rand_column(seed, n, sites[id(node)]), 1
    if node.fn == "if":
        c, sc = _eval_columns(node.args[0], table, seed, sites)
        a, sa = _eval_columns(node.args[1], table, seed, sites)
        b, sb = _eval_columns(node.args[2], table, seed, sites)
        cond = c != 0
        return np.where(cond, a, b), 1 + sc + np.where(cond, sa, sb)
    a, sa = _eval_columns(node.args[0], table, seed, sites)
    b, sb = _eval_columns(node.args[1], table, seed, sites)
    v = np.minimum(a, b) if node.fn == "min" else np.maximum(a, b)
    return v, 1 + sa + sb


def score_rows(program: Program, table: FeatureTable, ctx: EvalContext = EvalContext()) -> np.ndarray:
    """Vectorised scores for every row of ``table``."""
    bind(program, table.schema)
    with np.errstate(all="ignore"):
        values, steps = _eval_columns(program.body, table, ctx.seed, _rand_sites(program.body))
    if np.max(steps, initial=0) > ctx.budget:
        raise BudgetExceeded(f"row evaluation needs {int(np.max(steps))} steps, budget is {ctx.budget}")
    return np.broadcast_to(np.asarray(values, dtype=float), (len(table),))


def evaluate_row(program: Program, row: dict, seed: int = 0, row_index: int = 0,
                 budget: int = DEFAULT_BUDGET) -> float:
    """Scalar reference interpreter for a single row (lazy ``if``)."""
    sites = _rand_sites(program.body)
    steps = 0

    def fin(x: float) -> float:
        return x if math.isfinite(x) else 0.0

    def ev(node: Node) -> float:
        nonlocal steps
        steps += 1
        if steps > budget:
            raise BudgetExceeded(f"row {row_index} exceeded {budget} steps")
        if isinstance(node, Num):
            return float(node.value)
        if isinstance(node, Var):
            if node.name not in row:
                raise UnknownFeature(node.name)
            return float(row[node.name])
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, (BinOp, Cmp)):
            a, b = ev(node.left), ev(node.right)
            op = node.op
            try:
                if op == "+":
                    return fin(a + b)
                if op == "-":
                    return fin(a - b)
                if op == "*":
                    return fin(a * b)
                if op == "/":
                    return 0.0 if b == 0 else fin(a / b)
            except OverflowError:
                return 0.0
            return float({"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b, "==": a == b}[op])
        if node.fn == "rand":
            return rand_value(seed, row_index, sites[id(node)])
        if node.fn == "if":
            return ev(node.args[1]) if ev(node.args[0]) != 0 else ev(node.args[2])
        a, b = ev(node.args[0]), ev(node.args[1])
        return min(a, b) if node.fn == "min" else max(a, b)

    return ev(program.body)


def removal_count(rho: float, n: int) -> int:
    # rounding guards against products like 0.3 * 10 = 3.0000000000000004
    k = math.ceil(round(rho * n, 9))
    return max(1, min(n, k))


def select_removals(program: Program, table: FeatureTable, ctx: EvalContext = EvalContext()) -> list:
    """Indices of the ``ceil(rho * n)`` best-scoring rows, ties to the lower index."""
    if len(table) == 0:
        raise ValueError("cannot select removals from an empty feature table")
    scores = score_rows(program, table, ctx)
    k = removal_count(program.rho, len(table))
    order = np.argsort(-scores, kind="stable")[:k]
    return sorted(int(i) for i in order)


# ------------------------------------------------------------------ transforms

TRANSFORM_ARITY = {"generate": (0, 0), "mutate": (1, 1), "perturb_constants": (1, 1), "crossover": (2, None)}


def _subtrees_with_depth(node: Node, depth: int = 1, path: tuple = ()):
    yield path, node, depth
    for i, kid in enumerate(children(node)):
        yield from _subtrees_with_depth(kid, depth + 1, path + (i,))


def replace_at(node: Node, path: tuple, new: Node) -> Node:
    if not path:
        return new
    kids = list(children(node))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return with_children(node, kids)


class _Grower:
    """Random expression generator that respects depth and node budgets."""

    def __init__(self, rng: random.Random, schema: Sequence[str]):
        self.rng = rng
        self.schema = list(schema)

    def constant(self) -> Num:
        r = self.rng
        if r.random() < 0.5:
            return Num(float(r.randint(1, 5)))
        return Num(round(r.uniform(0.1, 3.0), 2))

    def leaf(self) -> Node:
        u = self.rng.random()
        if u < 0.7 and self.schema:
            return Var(self.rng.choice(self.schema))
        if u < 0.9:
            return self.constant()
        return Call("rand")

    def grow(self, max_depth: int, budget: int) -> Node:
        """Return a tree of depth <= max_depth with at most ``budget`` nodes."""
        r = self.rng
        if max_depth <= 1 or budget < 3 or r.random() < 0.3:
            return self.leaf()
        kind = r.choices(["bin", "minmax", "neg", "if"], weights=[6, 2, 1, 1])[0]
        if kind == "if" and (budget < 6 or max_depth < 3):
            kind = "bin"
        if kind == "neg":
            return Neg(self.grow(max_depth - 1, budget - 1))
        if kind == "if":
            remaining = budget - 1
            cl = self.grow(max_depth - 2, remaining - 4)
            remaining -= node_count(cl)
            cr = self.grow(max_depth - 2, remaining - 3)
            remaining -= node_count(cr)
            cond = Cmp(r.choice(COMPARE_OPS[:4]), cl, cr)
            remaining -= 1
            a = self.grow(max_depth - 1, remaining - 1)
            remaining -= node_count(a)
            b = self.grow(max_depth - 1, remaining)
            return Call("if", (cond, a, b))
        left = self.grow(max_depth - 1, budget - 2)
        right = self.grow(max_depth - 1, budget - 1 - node_count(left))
        if kind == "minmax":
            return Call(r.choice(["min", "max"]), (left, right))
        return BinOp(r.choice(BINARY_OPS), left, right)


def _perturb(program: Program, rng: random.Random) -> Program:
    rho = program.rho * rng.uniform(0.5, 2.0)

    def scale(node: Node) -> Node:
        if isinstance(node, Num):
            v = node.value * rng.uniform(0.5, 2.0)
            return Num(max(-_MAX_LITERAL, min(_MAX_LITERAL, v)))
        kids = children(node)
        if not kids:
            return node
        return with_children(node, [scale(k) for k in kids])

    return Program(rho, scale(program.body))


def transform(kind: str, parents: Sequence[Program], seed: int, schema: Sequence[str],
              max_depth: int = 4) -> Program:
    """Derive a new program deterministically from ``parents`` and ``seed``.

    ``generate`` builds a fresh random program, ``mutate`` regrows one random
    subtree (or retunes rho), ``crossover`` grafts a subtree of another
    parent into a copy of the first, and ``perturb_constants`` scales rho
    and every numeric literal by factors drawn from U[0.5, 2.0].
    """
    if kind not in TRANSFORM_ARITY:
        raise ValueError(f"unknown transform {kind!r}")
    lo, hi = TRANSFORM_ARITY[kind]
    if len(parents) < lo or (hi is not None and len(parents) > hi):
        raise ArityError(f"{kind} takes {lo}{'+' if hi is None else ''} parent(s), got {len(parents)}")
    rng = random.Random(seed)
    grower = _Grower(rng, schema)
    max_depth = min(max_depth, MAX_DEPTH)

    if kind == "generate":
        rho = round(rng.uniform(RHO_MIN, RHO_MAX), 2)
        return Program(rho, grower.grow(max_depth, MAX_NODES))

    if kind == "perturb_constants":
        return _perturb(parents[0], rng)

    base = parents[0]
    for _ in range(10):
        spots = list(_subtrees_with_depth(base.body))
        path, old, depth = rng.choice(spots)
        room_depth = MAX_DEPTH - depth + 1
        room_nodes = MAX_NODES - base.size + node_count(old)
        if kind == "mutate":
            if rng.random() < 0.15:
                return Program(round(base.rho * rng.uniform(0.5, 2.0), 3), base.body)
            graft = grower.grow(min(3, room_depth), room_nodes)
            rho = base.rho
        else:
            donor = rng.choice(list(parents[1:]))
            graft = rng.choice([t for _, t, _ in _subtrees_with_depth(donor.body)])
            rho = rng.choice([p.rho for p in parents])
        if node_depth(graft) > room_depth or node_count(graft) > room_nodes:
            continue
        return Program(rho, replace_at(base.body, path, graft))
    return _perturb(base, rng)
