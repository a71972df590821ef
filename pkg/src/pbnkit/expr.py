"""Boolean predictor expressions.

Expressions are small immutable trees (``Const``, ``Var``, ``Not``, ``And``,
``Or``, ``Xor``).  The concrete syntax is::

    expr   := term (('|' | '^') term)*
    term   := factor ('&' factor)*
    factor := '!' factor | '(' expr ')' | '0' | '1' | ident

``&`` binds tighter than ``|`` and ``^``; the latter two share a level and
associate to the left.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np


class ExprSyntaxError(ValueError):
    """Raised on malformed expression text.  ``position`` is 1-based."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnboundVariableError(KeyError):
    pass


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be nonempty")


@dataclass(frozen=True)
class Not:
    child: "BoolExpr"


@dataclass(frozen=True)
class And:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Or:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Xor:
    left: "BoolExpr"
    right: "BoolExpr"


BoolExpr = Union[Const, Var, Not, And, Or, Xor]

FALSE = Const(False)
TRUE = Const(True)

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TOKEN_RE = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<num>[0-9]+)|(?P<op>[&|^!()]))")


# ---------------------------------------------------------------- parsing

class ExprParser:
    """Recursive-descent parser over a token list.

    Tokens are ``(kind, text, offset)`` triples; ``kind`` is one of
    ``ident``, ``num`` or an operator character.  The model-file parser
    reuses this class on its own token stream, so the parser never looks at
    raw text.
    """

    def __init__(self, tokens, error):
        self.tokens = tokens
        self.pos = 0
        self.error = error

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse_expr(self) -> BoolExpr:
        node = self.parse_term()
        while True:
            tok = self.peek()
            if tok is not None and tok[0] in ("|", "^"):
                self._advance()
                right = self.parse_term()
                node = Or(node, right) if tok[0] == "|" else Xor(node, right)
            else:
                return node

    def parse_term(self) -> BoolExpr:
        node = self.parse_factor()
        while True:
            tok = self.peek()
            if tok is not None and tok[0] == "&":
                self._advance()
                node = And(node, self.parse_factor())
            else:
                return node

    def parse_factor(self) -> BoolExpr:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of input, expected an operand", None)
        kind, text, _ = tok
        if kind == "!":
            self._advance()
            return Not(self.parse_factor())
        if kind == "(":
            self._advance()
            node = self.parse_expr()
            close = self.peek()
            if close is None or close[0] != ")":
                raise self.error("expected ')'", close)
            self._advance()
            return node
        if kind == "num":
            if text not in ("0", "1"):
                raise self.error(f"invalid constant {text!r}", tok)
            self._advance()
            return TRUE if text == "1" else FALSE
        if kind == "ident":
            self._advance()
            return Var(text)
        raise self.error(f"unexpected {text!r}, expected an operand", tok)


def _tokenize(text: str):
    tokens = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(text, i)
        if m is None or m.end() == i:
            raise ExprSyntaxError(f"unexpected character {text[i]!r}", i + 1)
        kind = m.lastgroup
        tok = m.group(kind)
        start = m.start(kind)
        tokens.append((tok if kind == "op" else kind, tok, start))
        i = m.end()
    return tokens


def parse_expr(text: str) -> BoolExpr:
    """Parse predictor expression text into a :data:`BoolExpr`."""
    tokens = _tokenize(text)
    if not tokens:
        raise ExprSyntaxError("empty expression", 1)

    def error(msg, tok):
        return ExprSyntaxError(msg, (tok[2] if tok else len(text)) + 1)

    parser = ExprParser(tokens, error)
    node = parser.parse_expr()
    if parser.pos != len(tokens):
        tok = tokens[parser.pos]
        raise ExprSyntaxError(f"unexpected {tok[1]!r}", tok[2] + 1)
    return node


# --------------------------------------------------------------- printing

_LEVEL = {Or: 0, Xor: 0, And: 1}
_SYMBOL = {Or: "|", Xor: "^", And: "&"}


def pretty(expr: BoolExpr) -> str:
    """Render ``expr`` with the fewest parentheses that reparse to the same tree."""
    return _pretty(expr, 0)


def _pretty(e: BoolExpr, ctx: int) -> str:
    if isinstance(e, Const):
        return "1" if e.value else "0"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Not):
        return "!" + _pretty(e.child, 2)
    level = _LEVEL[type(e)]
    # left-associative: a right operand at the same level needs parentheses
    s = f"{_pretty(e.left, level)} {_SYMBOL[type(e)]} {_pretty(e.right, level + 1)}"
    return f"({s})" if level < ctx else s


# ------------------------------------------------------------- semantics

def evaluate(expr: BoolExpr, assignment: Mapping[str, object]) -> bool:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        try:
            return bool(assignment[expr.name])
        except KeyError:
            raise UnboundVariableError(expr.name) from None
    if isinstance(expr, Not):
        return not evaluate(expr.child, assignment)
    a = evaluate(expr.left, assignment)
    b = evaluate(expr.right, assignment)
    if isinstance(expr, And):
        return a and b
    if isinstance(expr, Or):
        return a or b
    return a != b


def evaluate_array(expr: BoolExpr, columns: Mapping[str, np.ndarray], size: int | None = None) -> np.ndarray:
    """Vectorized :func:`evaluate`: each column holds one variable's values
    for a batch of assignments.  Returns a boolean array."""
    if size is None:
        size = len(next(iter(columns.values()))) if columns else 1
    return _eval_array(expr, columns, size)


def _eval_array(expr, columns, size):
    if isinstance(expr, Const):
        return np.full(size, expr.value, dtype=bool)
    if isinstance(expr, Var):
        try:
            return np.asarray(columns[expr.name], dtype=bool)
        except KeyError:
            raise UnboundVariableError(expr.name) from None
    if isinstance(expr, Not):
        return ~_eval_array(expr.child, columns, size)
    a = _eval_array(expr.left, columns, size)
    b = _eval_array(expr.right, columns, size)
    if isinstance(expr, And):
        return a & b
    if isinstance(expr, Or):
        return a | b
    return a ^ b


def support(expr: BoolExpr) -> frozenset:
    """Variables occurring syntactically in ``expr``."""
    out = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Var):
            out.add(e.name)
        elif isinstance(e, Not):
            stack.append(e.child)
        elif isinstance(e, (And, Or, Xor)):
            stack.append(e.left)
            stack.append(e.right)
    return frozenset(out)


def truth_table(expr: BoolExpr, inputs: Sequence[str]) -> list[bool]:
    """Rows in the same order :func:`synthesize_from_truth_table` expects."""
    k = len(inputs)
    rows = np.arange(2 ** k)
    cols = {name: (rows >> (k - 1 - i)) & 1 for i, name in enumerate(inputs)}
    return [bool(v) for v in evaluate_array(expr, cols, size=2 ** k)]


def _chain(op, items):
    node = items[0]
    for item in items[1:]:
        node = op(node, item)
    return node


def synthesize_from_truth_table(inputs: Sequence[str], outputs: Sequence[object]) -> BoolExpr:
    """Canonical disjunction of minterms reproducing ``outputs``.

    Row ``r`` assigns input ``i`` the bit ``(r >> (k-1-i)) & 1``, so the first
    input is the most significant digit.  No minimization is attempted.
    """
    k = len(inputs)
    if len(outputs) != 2 ** k:
        raise ValueError(f"truth table for {k} inputs needs {2 ** k} rows, got {len(outputs)}")
    minterms = []
    for row, out in enumerate(outputs):
        if not out:
            continue
        lits = []
        for i, name in enumerate(inputs):
            bit = (row >> (k - 1 - i)) & 1
            lits.append(Var(name) if bit else Not(Var(name)))
        minterms.append(_chain(And, lits) if lits else TRUE)
    if not minterms:
        return FALSE
    return _chain(Or, minterms)
