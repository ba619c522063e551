"""Parsing and evaluation of coordinate expressions.

The grammar covers exactly what geometry inputs need: numbers, ``pi``,
named variables (unicode identifiers are fine, so ``tau`` and ``τ`` both
work), ``+ - * / ^`` with standard precedence, unary minus, and the analytic
functions sin, cos, exp, log, sqrt, atan.  ``^`` binds tighter than unary
minus and is right-associative, so ``2*x^2^3`` parses as ``2*(x^(2^3))``.

Evaluation is pure: an AST can be evaluated to a plain float or, with
coordinates seeded as first-order jets, to a jet of any requested order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import jets
from .errors import ExprSyntaxError, UnboundVariable, UnknownFunction
from .jets import Jet

__all__ = [
    "ExprAst",
    "Lit",
    "Pi",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "FUNCTIONS",
    "parse",
    "to_string",
    "eval_jet",
    "eval_value",
    "variables",
]


# --- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: float


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "ExprAst"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    lhs: "ExprAst"
    rhs: "ExprAst"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "ExprAst"


ExprAst = Lit | Pi | Var | Neg | Bin | Call

FUNCTIONS = {
    "sin": jets.sin,
    "cos": jets.cos,
    "exp": jets.exp,
    "log": jets.log,
    "sqrt": jets.sqrt,
    "atan": jets.atan,
}


# --- tokenizer ---------------------------------------------------------------

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _NUMBER.match(text, i)
            assert m is not None
            tokens.append(("num", m.group(), i))
            i = m.end()
        elif ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
        elif ch in "+-*/^()":
            tokens.append(("op", ch, i))
            i += 1
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


# --- parser ------------------------------------------------------------------

_PREC_ADD = 10
_PREC_MUL = 20
_PREC_UNARY = 25
_PREC_POW = 30

_BINARY_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL, "^": _PREC_POW}


class _Parser:
    def __init__(self, tokens: list[tuple[str, str, int]]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, text, at = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected {op!r}", at)
        self.advance()

    def expression(self, min_prec: int = 0) -> ExprAst:
        kind, text, at = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            left: ExprAst = Neg(self.expression(_PREC_UNARY + 1))
        else:
            left = self.atom()
        while True:
            kind, text, at = self.peek()
            if kind != "op" or text not in _BINARY_PREC:
                break
            prec = _BINARY_PREC[text]
            if prec < min_prec:
                break
            self.advance()
            # '^' is right-associative; the others are left-associative
            next_min = prec if text == "^" else prec + 1
            right = self.expression(next_min)
            left = Bin(text, left, right)
        return left

    def atom(self) -> ExprAst:
        kind, text, at = self.advance()
        if kind == "num":
            return Lit(float(text))
        if kind == "name":
            nkind, ntext, _ = self.peek()
            if nkind == "op" and ntext == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {text!r}", at)
                self.advance()
                arg = self.expression(0)
                self.expect_op(")")
                return Call(text, arg)
            if text == "pi":
                return Pi()
            return Var(text)
        if kind == "op" and text == "(":
            inner = self.expression(0)
            self.expect_op(")")
            return inner
        raise ExprSyntaxError("expected a number, name or parenthesis", at)


def parse(text: str) -> ExprAst:
    parser = _Parser(_tokenize(text))
    ast = parser.expression(0)
    kind, tok, at = parser.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected trailing input {tok!r}", at)
    return ast


# --- printing ----------------------------------------------------------------


def _print(ast: ExprAst, parent_prec: int) -> str:
    if isinstance(ast, Lit):
        s = repr(ast.value)
        return s
    if isinstance(ast, Pi):
        return "pi"
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Neg):
        inner = _print(ast.arg, _PREC_UNARY + 1)
        s = f"-{inner}"
        return f"({s})" if parent_prec > _PREC_UNARY else s
    if isinstance(ast, Call):
        return f"{ast.fn}({_print(ast.arg, 0)})"
    assert isinstance(ast, Bin)
    prec = _BINARY_PREC[ast.op]
    if ast.op == "^":
        left = _print(ast.lhs, prec + 1)
        right = _print(ast.rhs, prec)
    else:
        left = _print(ast.lhs, prec)
        right = _print(ast.rhs, prec + 1)
    s = f"{left} {ast.op} {right}"
    return f"({s})" if prec < parent_prec else s


def to_string(ast: ExprAst) -> str:
    """Render an AST; re-parsing the output reproduces the AST."""
    return _print(ast, 0)


def variables(ast: ExprAst) -> set[str]:
    if isinstance(ast, Var):
        return {ast.name}
    if isinstance(ast, Neg):
        return variables(ast.arg)
    if isinstance(ast, Call):
        return variables(ast.arg)
    if isinstance(ast, Bin):
        return variables(ast.lhs) | variables(ast.rhs)
    return set()


# --- evaluation --------------------------------------------------------------

import math as _math


def _const_fold(ast: ExprAst, params: Mapping[str, float]) -> float | None:
    """Fold constant subtrees so integer powers stay integer powers."""
    if isinstance(ast, Lit):
        return ast.value
    if isinstance(ast, Pi):
        return _math.pi
    if isinstance(ast, Var):
        return params.get(ast.name)
    if isinstance(ast, Neg):
        v = _const_fold(ast.arg, params)
        return None if v is None else -v
    if isinstance(ast, Bin):
        a = _const_fold(ast.lhs, params)
        b = _const_fold(ast.rhs, params)
        if a is None or b is None:
            return None
        if ast.op == "+":
            return a + b
        if ast.op == "-":
            return a - b
        if ast.op == "*":
            return a * b
        if ast.op == "/":
            return jets.div(a, b)
        return jets.pow_(a, b)
    if isinstance(ast, Call):
        v = _const_fold(ast.arg, params)
        return None if v is None else FUNCTIONS[ast.fn](v)
    return None


def eval_jet(
    ast: ExprAst,
    coords: Mapping[str, float] | Sequence[tuple[str, float]],
    order: int,
    params: Mapping[str, float] | None = None,
) -> Jet:
    """Evaluate at a chart point with coordinates seeded as first-order jets."""
    coord_items = list(coords.items()) if isinstance(coords, Mapping) else list(coords)
    params = dict(params or {})
    nvars = len(coord_items)
    seeds = {
        name: Jet.variable(nvars, order, i, float(value))
        for i, (name, value) in enumerate(coord_items)
    }

    def ev(node: ExprAst):
        if isinstance(node, Lit):
            return node.value
        if isinstance(node, Pi):
            return _math.pi
        if isinstance(node, Var):
            seed = seeds.get(node.name)
            if seed is not None:
                return seed
            if node.name in params:
                return params[node.name]
            raise UnboundVariable(f"variable {node.name!r} is not bound")
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, Bin):
            if node.op == "^":
                folded = _const_fold(node.rhs, params)
                if folded is not None:
                    return jets.pow_(ev(node.lhs), folded)
                return jets.pow_(ev(node.lhs), ev(node.rhs))
            a, b = ev(node.lhs), ev(node.rhs)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            return jets.div(a, b)
        assert isinstance(node, Call)
        return FUNCTIONS[node.fn](ev(node.arg))

    result = ev(ast)
    if not isinstance(result, Jet):
        result = Jet.constant(nvars, order, float(result))
    return result


def eval_value(ast: ExprAst, env: Mapping[str, float]) -> float:
    """Plain float evaluation with every variable bound in ``env``."""
    if isinstance(ast, Lit):
        return ast.value
    if isinstance(ast, Pi):
        return _math.pi
    if isinstance(ast, Var):
        if ast.name not in env:
            raise UnboundVariable(f"variable {ast.name!r} is not bound")
        return float(env[ast.name])
    if isinstance(ast, Neg):
        return -eval_value(ast.arg, env)
    if isinstance(ast, Bin):
        a = eval_value(ast.lhs, env)
        b = eval_value(ast.rhs, env)
        if ast.op == "+":
            return a + b
        if ast.op == "-":
            return a - b
        if ast.op == "*":
            return a * b
        if ast.op == "/":
            return jets.div(a, b)
        return jets.pow_(a, b)
    assert isinstance(ast, Call)
    return FUNCTIONS[ast.fn](eval_value(ast.arg, env))
