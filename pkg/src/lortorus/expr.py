"""Profile expression language.

A tiny infix language in the single variable ``x``::

    sin(2*x) - 2*0.5*cos(x)^2
    ln(2 + sin(x))
    jacobi_sd(x, 1/2)

Supported: numbers, ``x``, ``pi``, ``+ - * /``, ``^`` or ``**`` (right
associative), unary minus, and the functions sin, cos, tan, exp, ln (alias
log), sqrt, pow(a, b), jacobi_sn/cn/dn/sd(u, k).  The second argument of the
Jacobi functions is the elliptic modulus k (parameter m = k^2) and must be a
constant expression.

Expressions are parsed into an immutable tree.  Derivatives are built by
rule on the tree (no finite differences) and the tree is compiled to a
Python function for fast scalar evaluation and a numpy one for arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import elliptic
from .errors import DomainError, ParseError

# ---------------------------------------------------------------------------
# tree


class Node:
    __slots__ = ()

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True, eq=True)
class Const(Node):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Node):
    pass


@dataclass(frozen=True, eq=True)
class BinOp(Node):
    op: str  # one of + - * / ^
    left: Node
    right: Node


@dataclass(frozen=True, eq=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True, eq=True)
class Call(Node):
    name: str
    arg: Node
    modulus: float | None = None  # jacobi_* only


X = Var()
ZERO = Const(0.0)
ONE = Const(1.0)

# Smart constructors with light constant folding.  This is not a simplifier;
# it only keeps derivative trees from filling up with 0*... and 1*... terms.


def _c(v) -> Node:
    return v if isinstance(v, Node) else Const(float(v))


def add(a, b) -> Node:
    a, b = _c(a), _c(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return BinOp("+", a, b)


def sub(a, b) -> Node:
    a, b = _c(a), _c(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    return BinOp("-", a, b)


def mul(a, b) -> Node:
    a, b = _c(a), _c(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    if isinstance(b, Const) and not isinstance(a, Const):
        a, b = b, a
    return BinOp("*", a, b)


def div(a, b) -> Node:
    a, b = _c(a), _c(b)
    if isinstance(b, Const) and b.value == 0.0:
        return BinOp("/", a, b)  # left for the evaluator to reject
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return BinOp("/", a, b)


def power(a, b) -> Node:
    a, b = _c(a), _c(b)
    if isinstance(b, Const):
        if b.value == 0.0:
            return ONE
        if b.value == 1.0:
            return a
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            return Const(math.pow(a.value, b.value))
        except (ValueError, OverflowError):
            pass
    return BinOp("^", a, b)


def neg(a) -> Node:
    a = _c(a)
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def call(name: str, arg, modulus: float | None = None) -> Node:
    arg = _c(arg)
    if isinstance(arg, Const) and name not in _JACOBI:
        try:
            return Const(float(_SCALAR_FUNCS[name](arg.value)))
        except (ValueError, OverflowError, ZeroDivisionError):
            pass
    return Call(name, arg, modulus)


_JACOBI = ("jacobi_sn", "jacobi_cn", "jacobi_dn")

# ---------------------------------------------------------------------------
# differentiation


def derivative(node: Node) -> Node:
    """Exact d/dx of ``node``."""
    return _d(node)


@lru_cache(maxsize=None)
def _d(n: Node) -> Node:
    if isinstance(n, Const):
        return ZERO
    if isinstance(n, Var):
        return ONE
    if isinstance(n, Neg):
        return neg(_d(n.arg))
    if isinstance(n, BinOp):
        a, b = n.left, n.right
        if n.op == "+":
            return add(_d(a), _d(b))
        if n.op == "-":
            return sub(_d(a), _d(b))
        if n.op == "*":
            return add(mul(_d(a), b), mul(a, _d(b)))
        if n.op == "/":
            da, db = _d(a), _d(b)
            if db == ZERO:
                return div(da, b)
            return div(sub(mul(da, b), mul(a, db)), power(b, 2))
        if n.op == "^":
            da, db = _d(a), _d(b)
            if db == ZERO:
                if not isinstance(b, Const):
                    # constant but non-literal exponent
                    return mul(mul(b, power(a, sub(b, 1))), da)
                return mul(mul(b, power(a, b.value - 1.0)), da)
            # a^b = exp(b ln a)
            return mul(n, add(mul(db, call("ln", a)), div(mul(b, da), a)))
    if isinstance(n, Call):
        u, du = n.arg, _d(n.arg)
        if du == ZERO:
            return ZERO
        name = n.name
        if name == "sin":
            outer = call("cos", u)
        elif name == "cos":
            outer = neg(call("sin", u))
        elif name == "tan":
            outer = add(1, power(n, 2))
        elif name == "exp":
            outer = n
        elif name == "ln":
            return div(du, u)
        elif name == "sqrt":
            return div(du, mul(2, n))
        elif name == "jacobi_sn":
            outer = mul(call("jacobi_cn", u, n.modulus), call("jacobi_dn", u, n.modulus))
        elif name == "jacobi_cn":
            outer = neg(mul(call("jacobi_sn", u, n.modulus), call("jacobi_dn", u, n.modulus)))
        elif name == "jacobi_dn":
            m = n.modulus * n.modulus
            outer = neg(mul(m, mul(call("jacobi_sn", u, n.modulus), call("jacobi_cn", u, n.modulus))))
        else:  # pragma: no cover - parser rejects unknown names
            raise ValueError(name)
        return mul(outer, du)
    raise TypeError(f"not an expression node: {n!r}")


# ---------------------------------------------------------------------------
# printing and compilation


def to_source(node: Node) -> str:
    """Canonical DSL text of ``node`` (fully parenthesised, round-trippable)."""
    if isinstance(node, Const):
        return repr(node.value) if node.value >= 0 else f"({node.value!r})"
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        if node.modulus is not None:
            return f"{node.name}({to_source(node.arg)}, {node.modulus!r})"
        return f"{node.name}({to_source(node.arg)})"
    raise TypeError(node)


def _emit(node: Node, env: dict, cse: dict, lines: list, lib: str) -> str:
    """Emit straight-line code for ``node``; returns the name holding its value."""
    if node in cse:
        return cse[node]
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Neg):
        expr = f"-{_emit(node.arg, env, cse, lines, lib)}"
    elif isinstance(node, BinOp):
        a = _emit(node.left, env, cse, lines, lib)
        b = _emit(node.right, env, cse, lines, lib)
        if node.op == "^":
            if isinstance(node.right, Const) and float(node.right.value).is_integer():
                expr = f"{a} ** {int(node.right.value)}"
            else:
                expr = f"_pow({a}, {b})"
        elif node.op == "/":
            expr = f"_div({a}, {b})"
        else:
            expr = f"{a} {node.op} {b}"
    elif isinstance(node, Call):
        a = _emit(node.arg, env, cse, lines, lib)
        if node.name in _JACOBI:
            key = ("ellipj", node.arg, node.modulus)
            if key not in cse:
                name = f"_e{len(lines)}"
                lines.append(f"{name} = _ellipj({a}, {node.modulus!r})")
                cse[key] = name
            idx = _JACOBI.index(node.name)
            expr = f"{cse[key]}[{idx}]"
        else:
            expr = f"_{node.name}({a})"
    else:
        raise TypeError(node)
    name = f"_t{len(lines)}"
    lines.append(f"{name} = {expr}")
    cse[node] = name
    return name


def _scalar_div(a, b):
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


def _scalar_pow(a, b):
    try:
        return math.pow(a, b)
    except (ValueError, OverflowError) as exc:
        raise DomainError(f"pow({a!r}, {b!r}) is not real") from exc


def _checked(fn, label):
    def wrapped(v):
        try:
            return fn(v)
        except (ValueError, OverflowError) as exc:
            raise DomainError(f"{label}({v!r}) is outside the real domain") from exc

    return wrapped


_SCALAR_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": _checked(math.exp, "exp"),
    "ln": _checked(math.log, "ln"),
    "sqrt": _checked(math.sqrt, "sqrt"),
}

_SCALAR_ENV = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_tan": math.tan,
    "_exp": _SCALAR_FUNCS["exp"],
    "_ln": _SCALAR_FUNCS["ln"],
    "_sqrt": _SCALAR_FUNCS["sqrt"],
    "_div": _scalar_div,
    "_pow": _scalar_pow,
    "_ellipj": elliptic.ellipj_scalar,
}

_VECTOR_ENV = {
    "_sin": np.sin,
    "_cos": np.cos,
    "_tan": np.tan,
    "_exp": np.exp,
    "_ln": np.log,
    "_sqrt": np.sqrt,
    "_div": np.divide,
    "_pow": np.power,
    "_ellipj": elliptic.ellipj,
}


def compile_nodes(nodes, vectorized: bool = False):
    """Compile several trees into one function of x returning a tuple.

    Shared subtrees are computed once, which matters for the derivative
    stack (f, f', f'', f''') whose trees overlap heavily.
    """
    lines: list[str] = []
    cse: dict = {}
    outs = [_emit(n, {}, cse, lines, "np" if vectorized else "math") for n in nodes]
    body = "\n    ".join(lines) if lines else "pass"
    src = f"def _f(x):\n    {body}\n    return ({', '.join(outs)},)\n"
    env = dict(_VECTOR_ENV if vectorized else _SCALAR_ENV)
    exec(compile(src, "<profile>", "exec"), env)  # noqa: S102 - generated from a parsed tree
    fn = env["_f"]
    if not vectorized:
        return fn

    def vec(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            vals = fn(x)
        out = tuple(np.broadcast_to(np.asarray(v, dtype=float), x.shape).copy() for v in vals)
        for v in out:
            if not np.all(np.isfinite(v)):
                bad = x[~np.isfinite(v)] if x.ndim else x
                raise DomainError(f"expression is not finite at x = {np.ravel(bad)[0]!r}")
        return out

    return vec


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCS_1 = {"sin", "cos", "tan", "exp", "ln", "log", "sqrt"}
_FUNCS_J = {"jacobi_sn", "jacobi_cn", "jacobi_dn", "jacobi_sd"}
_CONSTS = {"pi": math.pi}


@dataclass
class _Tok:
    kind: str
    text: str
    start: int
    end: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind), m.end(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text), len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.take()
        if t.text != text:
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ParseError(f"expected {text!r}, found {found}", self.text, t.start, t.end)
        return t

    def fail(self, msg, tok):
        raise ParseError(msg, self.text, tok.start, tok.end)

    def parse(self) -> Node:
        if self.peek().kind == "end":
            self.fail("empty expression", self.peek())
        node = self.expr()
        t = self.peek()
        if t.kind != "end":
            self.fail(f"unexpected {t.text!r}", t)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self) -> Node:
        t = self.peek()
        if t.text == "-":
            self.take()
            return neg(self.unary())
        if t.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek().text in ("^", "**"):
            self.take()
            return power(base, self.unary())
        return base

    def args(self, name_tok: _Tok) -> list[tuple[Node, _Tok]]:
        self.expect("(")
        out = []
        if self.peek().text == ")":
            self.fail(f"{name_tok.text}() needs an argument", self.peek())
        while True:
            start = self.peek()
            out.append((self.expr(), start))
            if self.peek().text == ",":
                self.take()
                continue
            self.expect(")")
            return out

    def atom(self) -> Node:
        t = self.take()
        if t.kind == "num":
            return Const(float(t.text))
        if t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "name":
            name = t.text
            if name == "x":
                return X
            if name in _CONSTS:
                return Const(_CONSTS[name])
            if name in _FUNCS_1 or name in _FUNCS_J or name == "pow":
                return self.function(t)
            self.fail(f"unknown name {name!r}", t)
        if t.kind == "end":
            self.fail("unexpected end of input", t)
        self.fail(f"unexpected {t.text!r}", t)

    def function(self, t: _Tok) -> Node:
        name = t.text
        args = self.args(t)
        want = 1 if name in _FUNCS_1 else 2
        if len(args) != want:
            self.fail(f"{name} takes {want} argument(s), got {len(args)}", t)
        if name in _FUNCS_1:
            return call("ln" if name == "log" else name, args[0][0])
        if name == "pow":
            return power(args[0][0], args[1][0])
        k_node, k_tok = args[1]
        if not isinstance(k_node, Const):
            self.fail(f"{name}: modulus must be a constant", k_tok)
        k = k_node.value
        if not 0.0 <= k < 1.0:
            self.fail(f"{name}: modulus must lie in [0, 1), got {k!r}", k_tok)
        u = args[0][0]
        if name == "jacobi_sd":
            return div(call("jacobi_sn", u, k), call("jacobi_dn", u, k))
        return call(name, u, k)


def parse(text: str) -> Node:
    """Parse DSL ``text`` into an expression tree; raises ParseError with a span."""
    if not isinstance(text, str):
        raise TypeError("expression must be a string")
    return _Parser(text).parse()


class Expression:
    """A parsed profile with its first three exact derivatives."""

    def __init__(self, text: str):
        self.text = text
        self.tree = parse(text)
        d1 = derivative(self.tree)
        d2 = derivative(d1)
        d3 = derivative(d2)
        self.trees = (self.tree, d1, d2, d3)
        self._scalar = compile_nodes(self.trees)
        self._scalar12 = compile_nodes((d1, d2))
        self._vector = compile_nodes(self.trees, vectorized=True)

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __reduce__(self):
        return (Expression, (self.text,))

    @property
    def is_constant(self) -> bool:
        return self.trees[1] == ZERO

    def derivs(self, x: float) -> tuple[float, float, float, float]:
        """(f, f', f'', f''') at a scalar x."""
        x = float(x)
        try:
            return self._scalar(x)
        except ZeroDivisionError as exc:
            raise DomainError(f"division by zero at x = {x!r}") from exc

    def d12(self, x: float) -> tuple[float, float]:
        """(f', f'') at scalar x; the hot path of the geodesic integrator."""
        try:
            return self._scalar12(x)
        except ZeroDivisionError as exc:
            raise DomainError(f"division by zero at x = {x!r}") from exc

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self.derivs(x)[0]
        return self._vector(x)[0]

    def derivs_array(self, x) -> tuple[np.ndarray, ...]:
        return self._vector(x)
