"""Scalar expressions in one variable ``r``.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | 'r' | 'pi' | 'e' | NAME '(' args ')' | '(' expr ')'

Supported functions: exp, log, sqrt, abs (one argument) and min, max, pow
(two arguments).  Evaluation accepts floats or numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Num",
    "Var",
    "Const",
    "Neg",
    "BinOp",
    "Call",
    "Expression",
    "ParseError",
    "EvaluationError",
    "parse",
    "unparse",
    "evaluate",
    "log_evaluate",
]


class ParseError(ValueError):
    """Malformed expression text; ``offset`` is the character offset of the problem."""

    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset
        self.text = text


class EvaluationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expression = Union[Num, Var, Const, Neg, BinOp, Call]

CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {"exp": 1, "log": 1, "sqrt": 1, "abs": 1, "min": 2, "max": 2, "pow": 2}

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise self.error(f"expected {value!r}, found {found}")
        return self.advance()

    def parse(self) -> Expression:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected trailing token {tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.advance()
            return Num(float(value))
        if kind == "name":
            self.advance()
            if value == "r":
                return Var()
            if value in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[value]:
                    raise ParseError(
                        f"{value} takes {FUNCTIONS[value]} argument(s), got {len(args)}",
                        tok[2],
                        self.text,
                    )
                return Call(value, tuple(args))
            if value in CONSTANTS:
                return Const(value)
            raise self.error(f"unknown identifier {value!r}", tok)
        if kind == "op" and value == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected token {value!r}")


def parse(text: str) -> Expression:
    """Parse ``text`` into an expression tree.

    Raises
    ------
    ParseError
        With the character offset of the offending token.
    """
    if not text or not text.strip():
        raise ParseError("empty expression", 0, text)
    return _Parser(text).parse()


def unparse(node: Expression) -> str:
    """Render a tree as text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "r"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        return f"(-{unparse(node.operand)})"
    if isinstance(node, BinOp):
        return f"({unparse(node.left)} {node.op} {unparse(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(unparse(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def _check(value, what):
    if np.any(np.isnan(value)):
        raise EvaluationError(f"{what} produced an undefined value")
    return value


def _eval(node, r):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return r
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, r)
    if isinstance(node, BinOp):
        a = _eval(node.left, r)
        b = _eval(node.right, r)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if np.any(np.asarray(b) == 0):
                raise EvaluationError("division by zero")
            return a / b
        return _power(a, b)
    if isinstance(node, Call):
        args = [_eval(arg, r) for arg in node.args]
        name = node.name
        if name == "exp":
            return np.exp(args[0])
        if name == "log":
            if np.any(np.asarray(args[0]) <= 0):
                raise EvaluationError("log of a nonpositive value")
            return np.log(args[0])
        if name == "sqrt":
            if np.any(np.asarray(args[0]) < 0):
                raise EvaluationError("sqrt of a negative value")
            return np.sqrt(args[0])
        if name == "abs":
            return np.abs(args[0])
        if name == "min":
            return np.minimum(args[0], args[1])
        if name == "max":
            return np.maximum(args[0], args[1])
        return _power(args[0], args[1])
    raise TypeError(f"not an expression node: {node!r}")


def _power(a, b):
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise EvaluationError("division by zero in power")
    if np.any((a_arr < 0) & (b_arr != np.round(b_arr))):
        raise EvaluationError("non-integer power of a negative value")
    with np.errstate(over="ignore"):
        return _check(np.power(a_arr, b_arr), "power")


def evaluate(node: Expression, r):
    """Evaluate at ``r`` (float or array) in double precision.

    Domain violations raise :class:`EvaluationError` instead of returning
    ``nan``; overflow to ``inf`` is allowed.
    """
    scalar = np.ndim(r) == 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        value = _check(np.asarray(_eval(node, np.asarray(r, dtype=float)), dtype=float), "expression")
    if scalar:
        return float(value)
    return np.broadcast_to(value, np.shape(r)).astype(float)


def log_evaluate(node: Expression, r):
    """Natural log of a positive expression, simplified structurally.

    Products, quotients, powers, ``exp`` and ``sqrt`` are expanded so that
    e.g. ``r^(-2)*exp(4*r^2)`` stays finite where its value overflows.
    """
    scalar = np.ndim(r) == 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        value = np.asarray(_log_eval(node, np.asarray(r, dtype=float)), dtype=float)
    _check(value, "log expression")
    if scalar:
        return float(value)
    return np.broadcast_to(value, np.shape(r)).astype(float)


def _log_eval(node, r):
    if isinstance(node, BinOp):
        if node.op == "*":
            return _log_eval(node.left, r) + _log_eval(node.right, r)
        if node.op == "/":
            return _log_eval(node.left, r) - _log_eval(node.right, r)
        if node.op == "^":
            return _eval(node.right, r) * _log_eval(node.left, r)
    if isinstance(node, Call):
        if node.name == "exp":
            return _eval(node.args[0], r)
        if node.name == "sqrt":
            return 0.5 * _log_eval(node.args[0], r)
        if node.name == "pow":
            return _eval(node.args[1], r) * _log_eval(node.args[0], r)
    value = np.asarray(_eval(node, r), dtype=float)
    if np.any(value <= 0):
        raise EvaluationError("log of a nonpositive value")
    return np.log(value)
