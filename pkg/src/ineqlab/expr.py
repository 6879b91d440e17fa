"""Arithmetic expressions over x1..xn with forward-mode differentiation.

Grammar, loosest binding first::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right-associative
    atom   := number | var | name "(" expr ("," expr)* ")" | "(" expr ")"

``x`` is an alias of ``x1`` when the arity is 1. The derivative of ``abs`` at
0 is taken to be 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import ArityError, DomainError, ParseError
from .functions import TestFunction


class Num(NamedTuple):
    value: float


class Var(NamedTuple):
    index: int


class Neg(NamedTuple):
    arg: "Node"


class Bin(NamedTuple):
    op: str
    left: "Node"
    right: "Node"


class Call(NamedTuple):
    name: str
    args: tuple


Node = Union[Num, Var, Neg, Bin, Call]

UNARY_FUNCS = ("exp", "log", "sin", "cos", "abs", "sqrt")
VARIADIC_FUNCS = ("min", "max")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


class _Parser:
    def __init__(self, src: str, arity: int):
        self.src = src
        self.arity = arity
        self.tokens = []
        pos = 0
        while pos < len(src):
            if src[pos:].strip() == "":
                break
            pos += len(src[pos:]) - len(src[pos:].lstrip())
            m = _TOKEN.match(src, pos)
            if not m:
                raise ParseError(f"unexpected character {src[pos]!r}", pos,
                                 {"number", "name", "operator"})
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.tokens.append(("end", "", len(src)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            raise ParseError(f"found {text or 'end of input'!r}", pos, {repr(value)})

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos, {"'+'", "'-'", "'*'", "'/'", "'^'", "end"})
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                return self.call(text, pos)
            return self.variable(text, pos)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"found {text or 'end of input'!r}", pos,
                         {"number", "variable", "function", "'('", "'-'"})

    def variable(self, text, pos):
        if text == "x":
            if self.arity != 1:
                raise ArityError("bare 'x' needs arity 1; use x1..xn", pos)
            return Var(0)
        m = re.fullmatch(r"x(\d+)", text)
        if not m:
            raise ParseError(f"unknown name {text!r}", pos, {"x1..xn", *UNARY_FUNCS, *VARIADIC_FUNCS})
        k = int(m.group(1))
        if not 1 <= k <= self.arity:
            raise ArityError(f"variable {text} outside x1..x{self.arity}", pos)
        return Var(k - 1)

    def call(self, name, pos):
        if name not in UNARY_FUNCS + VARIADIC_FUNCS:
            raise ParseError(f"unknown function {name!r}", pos, set(UNARY_FUNCS + VARIADIC_FUNCS))
        self.expect("(")
        args = [self.expr()]
        while self.peek()[:2] == ("op", ","):
            self.take()
            args.append(self.expr())
        self.expect(")")
        if name in UNARY_FUNCS and len(args) != 1:
            raise ParseError(f"{name} takes one argument", pos)
        if name in VARIADIC_FUNCS and len(args) < 2:
            raise ParseError(f"{name} takes at least two arguments", pos)
        return Call(name, tuple(args))


def to_source(node: Node) -> str:
    """Fully parenthesized source that parses back to ``node``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, Bin):
        return f"({to_source(node.left)}{node.op}{to_source(node.right)})"
    return f"{node.name}(" + ",".join(to_source(a) for a in node.args) + ")"


def _has_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, Neg):
        return _has_var(node.arg)
    if isinstance(node, Bin):
        return _has_var(node.left) or _has_var(node.right)
    return any(_has_var(a) for a in node.args)


def _value(node: Node, pts: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(pts.shape[0], node.value)
    if isinstance(node, Var):
        return pts[:, node.index]
    if isinstance(node, Neg):
        return -_value(node.arg, pts)
    if isinstance(node, Bin):
        a, b = _value(node.left, pts), _value(node.right, pts)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)
    vals = [_value(a, pts) for a in node.args]
    if node.name in VARIADIC_FUNCS:
        return (np.minimum if node.name == "min" else np.maximum).reduce(vals)
    return getattr(np, node.name)(vals[0])


def _dual(node: Node, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Value and gradient (k, d) by forward-mode dual arithmetic."""
    k, d = pts.shape
    if isinstance(node, Num):
        return np.full(k, node.value), np.zeros((k, d))
    if isinstance(node, Var):
        der = np.zeros((k, d))
        der[:, node.index] = 1.0
        return pts[:, node.index].copy(), der
    if isinstance(node, Neg):
        v, g = _dual(node.arg, pts)
        return -v, -g
    if isinstance(node, Bin):
        a, da = _dual(node.left, pts)
        b, db = _dual(node.right, pts)
        if node.op == "+":
            return a + b, da + db
        if node.op == "-":
            return a - b, da - db
        if node.op == "*":
            return a * b, da * b[:, None] + a[:, None] * db
        if node.op == "/":
            return a / b, (da * b[:, None] - a[:, None] * db) / (b * b)[:, None]
        v = np.power(a, b)
        if not _has_var(node.right):
            return v, (b * np.power(a, b - 1.0))[:, None] * da
        return v, v[:, None] * (db * np.log(a)[:, None] + (b / a)[:, None] * da)
    if node.name in VARIADIC_FUNCS:
        parts = [_dual(a, pts) for a in node.args]
        vals = np.stack([p[0] for p in parts])
        v = (np.min if node.name == "min" else np.max)(vals, axis=0)
        # ties take the mean of the tied gradients, so max(a,b) + min(a,b) differentiates like a + b
        hit = (vals == v).astype(float)
        g = np.einsum("ak,akd->kd", hit, np.stack([p[1] for p in parts])) / hit.sum(axis=0)[:, None]
        return v, g
    u, du = _dual(node.args[0], pts)
    name = node.name
    if name == "exp":
        v = np.exp(u)
        return v, v[:, None] * du
    if name == "log":
        return np.log(u), du / u[:, None]
    if name == "sin":
        return np.sin(u), np.cos(u)[:, None] * du
    if name == "cos":
        return np.cos(u), -np.sin(u)[:, None] * du
    if name == "abs":
        return np.abs(u), np.sign(u)[:, None] * du
    v = np.sqrt(u)
    return v, du / (2.0 * v)[:, None]


@dataclass(frozen=True)
class Expression:
    source: str
    arity: int
    ast: Node

    def __str__(self) -> str:
        return to_source(self.ast)

    def value(self, pts: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            return _value(self.ast, pts)

    def value_and_gradient(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        with np.errstate(all="ignore"):
            return _dual(self.ast, pts)

    def to_test_function(self) -> TestFunction:
        return TestFunction(
            self.arity,
            self.value,
            lambda p: self.value_and_gradient(p)[1],
            label=self.source,
        )


def parse_expression(src: str, arity: int = 1) -> Expression:
    if not src or not src.strip():
        raise ParseError("empty expression", 0, {"number", "variable", "function", "'('"})
    if arity < 1:
        raise DomainError("arity must be at least 1")
    return Expression(src, arity, _Parser(src, arity).parse())


def test_function(src: str, arity: int = 1) -> TestFunction:
    """Parse ``src`` and wrap it as a TestFunction."""
    return parse_expression(src, arity).to_test_function()


test_function.__test__ = False
