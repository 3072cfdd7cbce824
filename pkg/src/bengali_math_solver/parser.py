"""Recursive-descent parsing and exact evaluation of lexed expressions."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .errors import DivisionByZero, ExpressionError, ExpressionSyntaxError
from .expression import ExpressionLine, LexItem, LexKind, assemble_numbers

logger = logging.getLogger(__name__)

# Fractional digits of the decimal rendering
RENDER_PLACES = 6


@dataclass(frozen=True)
class Number:
    value: Fraction


@dataclass(frozen=True)
class Negate:
    operand: Expr


@dataclass(frozen=True)
class BinaryOp:
    """``left op right``; for '/' the right subtree is the divisor."""

    op: str
    left: Expr
    right: Expr


Expr = Union[Number, Negate, BinaryOp]

PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}

_ADDITIVE = {LexKind.ADD: "+", LexKind.SUB: "-"}
_MULTIPLICATIVE = {LexKind.MUL: "*", LexKind.DIV: "/"}


@dataclass(frozen=True)
class EvalOutcome:
    """Exact value of an expression and its decimal rendering."""

    value: Fraction
    text: str
    had_equals: bool = False


class Parser:
    """
    Parser for the grammar

        expr   := term (('+' | '-') term)*
        term   := factor (('*' | '/') factor)*
        factor := NUMBER | '(' expr ')' | '-' factor

    where unary minus is only accepted at the start of the expression or
    directly after '('. The first '=' ends the expression; anything after
    it is ignored with a warning.
    """

    def __init__(self, items: Sequence[LexItem]) -> None:
        items = list(items)
        eq = next((i for i, item in enumerate(items) if item.kind is LexKind.EQ), None)
        self.had_equals = eq is not None
        self.items = items if eq is None else items[:eq]
        self.ignored = [] if eq is None else items[eq + 1:]
        self._pos = 0

    def _peek(self) -> LexItem | None:
        if self._pos < len(self.items):
            return self.items[self._pos]
        return None

    def parse(self) -> Expr:
        """
        Parse the items into an expression tree.

        Raises:
            ExpressionSyntaxError: With the position of the offending item.
        """
        if self.ignored:
            logger.warning(
                "Ignoring %d item(s) after '=': %s",
                len(self.ignored), "".join(str(i) for i in self.ignored),
            )
        if not self.items:
            raise ExpressionSyntaxError("empty expression", 0)
        expr = self._expr()
        item = self._peek()
        if item is not None:
            if item.kind is LexKind.RBR:
                raise ExpressionSyntaxError("unbalanced ')'", self._pos)
            raise ExpressionSyntaxError(f"unexpected '{item}'", self._pos)
        return expr

    def _expr(self) -> Expr:
        node = self._term()
        while (item := self._peek()) is not None and item.kind in _ADDITIVE:
            self._pos += 1
            node = BinaryOp(_ADDITIVE[item.kind], node, self._term())
        return node

    def _term(self) -> Expr:
        node = self._factor()
        while (item := self._peek()) is not None and item.kind in _MULTIPLICATIVE:
            self._pos += 1
            node = BinaryOp(_MULTIPLICATIVE[item.kind], node, self._factor())
        return node

    def _factor(self) -> Expr:
        pos = self._pos
        item = self._peek()
        if item is None:
            raise ExpressionSyntaxError("expression ends with an operator", pos)

        if item.kind is LexKind.NUMBER:
            self._pos += 1
            return Number(item.value)

        if item.kind is LexKind.LBR:
            self._pos += 1
            closing = self._peek()
            if closing is not None and closing.kind is LexKind.RBR:
                raise ExpressionSyntaxError("empty brackets", self._pos)
            inner = self._expr()
            closing = self._peek()
            if closing is None or closing.kind is not LexKind.RBR:
                raise ExpressionSyntaxError("unbalanced '('", pos)
            self._pos += 1
            return inner

        if item.kind is LexKind.SUB and (pos == 0 or self.items[pos - 1].kind is LexKind.LBR):
            self._pos += 1
            return Negate(self._factor())

        if item.kind in _ADDITIVE or item.kind in _MULTIPLICATIVE:
            if pos == 0:
                raise ExpressionSyntaxError(f"leading binary operator '{item}'", pos)
            raise ExpressionSyntaxError(f"adjacent operators before '{item}'", pos)

        if item.kind is LexKind.RBR:
            raise ExpressionSyntaxError("unbalanced ')'", pos)
        raise ExpressionSyntaxError(f"unexpected '{item}'", pos)


def parse(items: Sequence[LexItem]) -> Expr:
    """Parse lexed items; see Parser for the grammar."""
    return Parser(items).parse()


def _value(node: Expr) -> Fraction:
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Negate):
        return -_value(node.operand)
    left = _value(node.left)
    right = _value(node.right)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if right == 0:
        raise DivisionByZero(node.right, render(node.right))
    return left / right


def evaluate(e: Expr, had_equals: bool = False) -> EvalOutcome:
    """
    Evaluate exactly with rational arithmetic.

    Raises:
        DivisionByZero: Identifying the divisor subtree.
    """
    value = _value(e)
    return EvalOutcome(value=value, text=render_decimal(value), had_equals=had_equals)


def format_number(value: Fraction) -> str:
    """Exact decimal text of a terminating fraction (no trailing zeros)."""
    if value < 0:
        return "-" + format_number(-value)
    for places in range(0, 31):
        scaled = value * 10 ** places
        if scaled.denominator == 1:
            whole, frac = divmod(scaled.numerator, 10 ** places)
            return str(whole) if places == 0 else f"{whole}.{frac:0{places}d}"
    return render_decimal(value)


def render_decimal(value: Fraction, places: int = RENDER_PLACES) -> str:
    """Decimal text rounded half-even to *places* digits, trailing zeros trimmed."""
    rounded = round(value, places)
    if rounded == 0:
        return "0"
    return format_number(rounded)


def format_fraction(value: Fraction) -> str:
    """``p/q`` text, or ``p`` for integers."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def render(e: Expr) -> str:
    """Canonical ASCII text that re-parses to the same tree."""
    if isinstance(e, Number):
        return format_number(e.value)
    if isinstance(e, Negate):
        if isinstance(e.operand, Number):
            return "-" + render(e.operand)
        return f"-({render(e.operand)})"

    prec = PRECEDENCE[e.op]
    left = render(e.left)
    if isinstance(e.left, Negate) or (
        isinstance(e.left, BinaryOp) and PRECEDENCE[e.left.op] < prec
    ):
        left = f"({left})"
    right = render(e.right)
    if isinstance(e.right, Negate) or (
        isinstance(e.right, BinaryOp) and PRECEDENCE[e.right.op] <= prec
    ):
        right = f"({right})"
    return f"{left}{e.op}{right}"


def solve_line(line: ExpressionLine) -> tuple[str, EvalOutcome]:
    """
    Assemble, parse and evaluate one expression line.

    Raises:
        MalformedNumber, ExpressionSyntaxError, DivisionByZero: Tagged
            with the line's y band.
    """
    try:
        parser = Parser(assemble_numbers(line.tokens))
        expr = parser.parse()
        outcome = evaluate(expr, had_equals=parser.had_equals)
    except ExpressionError as e:
        e.y_band = line.y_band
        raise
    return render(expr), outcome
