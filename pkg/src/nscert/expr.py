"""Closed-form field expressions: parsing, evaluation and symbolic derivatives.

Grammar (frozen, it is the config-file contract for ``u0`` and forcing)::

    vector     := '(' expression ',' expression ',' expression ')'
    expression := term (('+' | '-') term)*
    term       := factor (('*' | '/') factor)*
    factor     := ('+' | '-') factor | base ('^' ['-'] integer)?
    base       := number | 'pi' | variable | function '(' expression ')'
                | '(' expression ')'

Variables are ``x, y, z, t``; functions are ``sin, cos, exp``.  Powers are
integer only, which keeps differentiation closed-form.  The only
simplification performed is constant folding plus the trivial identities
``0 + a``, ``1 * a``, ``0 * a`` and ``a ^ 1``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

VARIABLES = ("x", "y", "z", "t")
FUNCTIONS = ("sin", "cos", "exp")
SPACE_VARS = ("x", "y", "z")


class ExpressionError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExpressionError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ConstantDivisionError(ExprSyntaxError):
    pass


class UnsupportedExpressionError(ExpressionError):
    pass


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True, eq=False)
class Node:
    pass


@dataclass(frozen=True, eq=False)
class Const(Node):
    value: float


@dataclass(frozen=True, eq=False)
class Var(Node):
    name: str


@dataclass(frozen=True, eq=False)
class Neg(Node):
    arg: Node


@dataclass(frozen=True, eq=False)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True, eq=False)
class Pow(Node):
    base: Node
    exponent: int


@dataclass(frozen=True, eq=False)
class Call(Node):
    func: str
    arg: Node


ZERO = Const(0.0)
ONE = Const(1.0)

_FUNC_IMPL = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinOp("+", a, b)


def sub(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return BinOp("*", a, b)


def div(a, b, position=None):
    if _is_const(b, 0.0):
        raise ConstantDivisionError("division by constant zero", position)
    if _is_const(a) and _is_const(b):
        return Const(a.value / b.value)
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return BinOp("/", a, b)


def power(a, n):
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const):
        if a.value == 0.0 and n < 0:
            raise ConstantDivisionError("division by constant zero", None)
        return Const(a.value ** n)
    return Pow(a, n)


def call(func, a):
    if isinstance(a, Const):
        return Const(float(_FUNC_IMPL[func](a.value)))
    return Call(func, a)


# --------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.tok
        if kind != "op" or val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)
        return self.advance()

    def at_op(self, *values):
        kind, val, _ = self.tok
        return kind == "op" and val in values

    def parse_field(self):
        # A top-level '(' may open either a vector or a parenthesised scalar.
        if self.at_op("("):
            save = self.i
            self.advance()
            first = self.expression()
            if self.at_op(","):
                self.advance()
                second = self.expression()
                self.expect(",")
                third = self.expression()
                self.expect(")")
                self.finish()
                return (first, second, third)
            self.i = save
        node = self.expression()
        self.finish()
        return (node,)

    def finish(self):
        kind, val, pos = self.tok
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)

    def expression(self):
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.at_op("*", "/"):
            _, op, pos = self.advance()
            rhs = self.factor()
            node = mul(node, rhs) if op == "*" else div(node, rhs, pos)
        return node

    def factor(self):
        if self.at_op("-"):
            self.advance()
            return neg(self.factor())
        if self.at_op("+"):
            self.advance()
            return self.factor()
        node = self.base()
        if self.at_op("^"):
            _, _, pos = self.advance()
            sign = 1
            if self.at_op("-"):
                self.advance()
                sign = -1
            kind, val, vpos = self.tok
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", vpos)
            self.advance()
            try:
                node = power(node, sign * int(val))
            except ConstantDivisionError:
                raise ConstantDivisionError("division by constant zero", pos) from None
        return node

    def base(self):
        kind, val, pos = self.tok
        if kind == "num":
            self.advance()
            return Const(float(val))
        if kind == "name":
            self.advance()
            if val == "pi":
                return Const(math.pi)
            if val in VARIABLES:
                return Var(val)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expression()
                self.expect(")")
                return call(val, arg)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            self.advance()
            node = self.expression()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos)


# --------------------------------------------------------------------------
# printing, evaluation, differentiation

def to_text(node):
    if isinstance(node, Const):
        if node.value == math.pi:
            return "pi"
        if node.value < 0 or math.copysign(1.0, node.value) < 0:
            return f"(-{repr(-node.value)})"
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Pow):
        exp = str(node.exponent) if node.exponent >= 0 else f"-{-node.exponent}"
        return f"{to_text(node.base)}^{exp}"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(node)


def evaluate_node(node, env, memo=None):
    """Evaluate ``node`` with ``env`` mapping variable names to arrays."""
    if memo is None:
        memo = {}
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Const):
        out = node.value
    elif isinstance(node, Var):
        out = env[node.name]
    elif isinstance(node, Neg):
        out = -evaluate_node(node.arg, env, memo)
    elif isinstance(node, BinOp):
        a = evaluate_node(node.left, env, memo)
        b = evaluate_node(node.right, env, memo)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        else:
            out = a / b
    elif isinstance(node, Pow):
        base = evaluate_node(node.base, env, memo)
        out = base ** node.exponent if node.exponent > 0 else 1.0 / base ** (-node.exponent)
    elif isinstance(node, Call):
        out = _FUNC_IMPL[node.func](evaluate_node(node.arg, env, memo))
    else:
        raise TypeError(node)
    memo[key] = out
    return out


def diff_node(node, var, memo=None):
    """Symbolic partial derivative of ``node`` with respect to ``var``."""
    if memo is None:
        memo = {}
    key = id(node)
    if key in memo:
        return memo[key]
    d = lambda n: diff_node(n, var, memo)  # noqa: E731
    if isinstance(node, Const):
        out = ZERO
    elif isinstance(node, Var):
        out = ONE if node.name == var else ZERO
    elif isinstance(node, Neg):
        out = neg(d(node.arg))
    elif isinstance(node, BinOp):
        a, b = node.left, node.right
        if node.op == "+":
            out = add(d(a), d(b))
        elif node.op == "-":
            out = sub(d(a), d(b))
        elif node.op == "*":
            out = add(mul(d(a), b), mul(a, d(b)))
        else:
            out = div(sub(mul(d(a), b), mul(a, d(b))), power(b, 2))
    elif isinstance(node, Pow):
        n = node.exponent
        out = mul(mul(Const(float(n)), power(node.base, n - 1)), d(node.base))
    elif isinstance(node, Call):
        inner = d(node.arg)
        if node.func == "sin":
            outer = call("cos", node.arg)
        elif node.func == "cos":
            outer = neg(call("sin", node.arg))
        else:
            outer = node
        out = mul(outer, inner)
    else:
        raise TypeError(node)
    memo[key] = out
    return out


# --------------------------------------------------------------------------
# fields

class Field:
    """Common interface of scalar (ncomp=1) and vector (ncomp=3) fields.

    All evaluators take coordinate arrays of a common shape and return
    arrays with the component axes in front: ``value`` gives
    ``(ncomp, *shape)``, ``grad`` gives ``(ncomp, 3, *shape)`` and
    ``hessian`` gives ``(ncomp, 3, 3, *shape)``.
    """

    ncomp = 1

    def value(self, x, y, z, t=0.0):
        raise NotImplementedError

    def grad(self, x, y, z, t=0.0):
        raise UnsupportedExpressionError(f"{type(self).__name__} has no gradient")

    def hessian(self, x, y, z, t=0.0):
        raise UnsupportedExpressionError(f"{type(self).__name__} has no second derivatives")

    def dt(self, x, y, z, t=0.0):
        raise UnsupportedExpressionError(f"{type(self).__name__} has no time derivative")

    def at_points(self, points, t=0.0):
        """Evaluate at an ``(..., 3)`` array of points."""
        points = np.asarray(points, dtype=float)
        return self.value(points[..., 0], points[..., 1], points[..., 2], t)

    @property
    def is_vector(self):
        return self.ncomp == 3


class FieldExpression(Field):
    """A parsed scalar or 3-vector expression with cached symbolic derivatives."""

    def __init__(self, components):
        components = tuple(components)
        if len(components) not in (1, 3):
            raise ExpressionError("a field has 1 or 3 components")
        self.components = components
        self.ncomp = len(components)
        self._derivs = {}

    def __str__(self):
        if self.ncomp == 1:
            return to_text(self.components[0])
        return "(" + ", ".join(to_text(c) for c in self.components) + ")"

    def __repr__(self):
        return f"FieldExpression({str(self)!r})"

    def _eval(self, nodes, x, y, z, t):
        x = np.asarray(x, dtype=float)
        y, z = np.broadcast_arrays(x, np.asarray(y, dtype=float), np.asarray(z, dtype=float))[1:]
        env = {"x": x, "y": y, "z": z, "t": np.broadcast_to(np.asarray(t, dtype=float), x.shape)}
        memo = {}
        out = np.empty((len(nodes),) + x.shape)
        for i, node in enumerate(nodes):
            out[i] = evaluate_node(node, env, memo)
        return out

    def value(self, x, y, z, t=0.0):
        return self._eval(self.components, x, y, z, t)

    def diff(self, var, order=1):
        """Symbolic derivative of every component, ``order`` times in ``var``."""
        if var not in VARIABLES:
            raise UnknownIdentifierError(f"unknown variable {var!r}", None)
        if order not in (0, 1, 2):
            raise UnsupportedExpressionError("derivative order must be 0, 1 or 2")
        out = self
        for _ in range(order):
            out = out._partial(var)
        return out

    def _partial(self, var):
        if var not in self._derivs:
            memo = {}
            self._derivs[var] = FieldExpression(diff_node(c, var, memo) for c in self.components)
        return self._derivs[var]

    def grad(self, x, y, z, t=0.0):
        nodes = [self._partial(v).components[c] for c in range(self.ncomp) for v in SPACE_VARS]
        vals = self._eval(nodes, x, y, z, t)
        return vals.reshape((self.ncomp, 3) + vals.shape[1:])

    def hessian(self, x, y, z, t=0.0):
        nodes = [
            self._partial(a)._partial(b).components[c]
            for c in range(self.ncomp)
            for a in SPACE_VARS
            for b in SPACE_VARS
        ]
        vals = self._eval(nodes, x, y, z, t)
        return vals.reshape((self.ncomp, 3, 3) + vals.shape[1:])

    def dt(self, x, y, z, t=0.0):
        return self._partial("t").value(x, y, z, t)


def parse(text):
    """Parse ``text`` into a :class:`FieldExpression`."""
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return FieldExpression(_Parser(text).parse_field())


def differentiate(expr, var, order=1):
    return expr.diff(var, order)


# --------------------------------------------------------------------------
# manufactured forcing

def manufactured_forcing(w, q, mu):
    """Forcing that makes ``(w, q)`` an exact solution of the forced system.

    ``f = dw/dt + (w . grad) w - mu * lap(w) + grad(q)``.  Two parsed
    expressions give a symbolic result; any other :class:`Field` pair gives a
    numeric composition of their derivative evaluators.
    """
    if w.ncomp != 3 or q.ncomp != 1:
        raise ExpressionError("manufactured forcing needs a vector w and scalar q")
    if not (isinstance(w, FieldExpression) and isinstance(q, FieldExpression)):
        return ForcingField(w, q, mu)
    wc = w.components
    mu_c = Const(float(mu))
    comps = []
    for i in range(3):
        f = w.diff("t").components[i]
        for j, v in enumerate(SPACE_VARS):
            f = add(f, mul(wc[j], w.diff(v).components[i]))
        lap = ZERO
        for v in SPACE_VARS:
            lap = add(lap, w.diff(v, 2).components[i])
        f = sub(f, mul(mu_c, lap))
        f = add(f, q.diff(SPACE_VARS[i]).components[0])
        comps.append(f)
    return FieldExpression(comps)


class ForcingField(Field):
    """Numeric manufactured forcing built from derivative evaluators."""

    ncomp = 3

    def __init__(self, w, q, mu):
        self.w = w
        self.q = q
        self.mu = float(mu)

    def value(self, x, y, z, t=0.0):
        w = self.w.value(x, y, z, t)
        gw = self.w.grad(x, y, z, t)
        hw = self.w.hessian(x, y, z, t)
        gq = self.q.grad(x, y, z, t)[0]
        conv = np.einsum("j...,ij...->i...", w, gw)
        lap = hw[:, 0, 0] + hw[:, 1, 1] + hw[:, 2, 2]
        return self.w.dt(x, y, z, t) + conv - self.mu * lap + gq


def divergence(w, x, y, z, t=0.0):
    g = w.grad(x, y, z, t)
    return g[0, 0] + g[1, 1] + g[2, 2]
