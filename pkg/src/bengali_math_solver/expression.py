"""Expression-line separation, token ordering and number assembly."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence

from .errors import MalformedNumber
from .model import Box, ClassMap, Detection, TokenKind, symbols_from_text

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Token:
    """A detected symbol with its semantic kind and position."""

    kind: TokenKind
    x_center: float
    y_center: float
    source: Detection
    value: int | None = None

    @property
    def text(self) -> str:
        """ASCII rendering of the token."""
        if self.kind is TokenKind.DIGIT:
            return str(self.value)
        return _KIND_TEXT[self.kind]


_KIND_TEXT = {
    TokenKind.ADD: "+",
    TokenKind.SUB: "-",
    TokenKind.MUL: "*",
    TokenKind.DIV: "/",
    TokenKind.LBR: "(",
    TokenKind.RBR: ")",
    TokenKind.EQ: "=",
    TokenKind.DOT: ".",
}


@dataclass(frozen=True)
class ExpressionLine:
    """Tokens of one expression, sorted by x, with the anchor's vertical band."""

    tokens: tuple[Token, ...]
    y_band: tuple[float, float]

    @property
    def detections(self) -> tuple[Detection, ...]:
        """Source detections, left to right."""
        return tuple(t.source for t in self.tokens)

    @property
    def text(self) -> str:
        """ASCII rendering of the whole line."""
        return line_text(self.tokens)


class LexKind(Enum):
    """Kinds of lexical items handed to the parser."""

    NUMBER = "number"
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"
    LBR = "("
    RBR = ")"
    EQ = "="


@dataclass(frozen=True)
class LexItem:
    """A number or an operator/bracket/equals sign, with its source tokens."""

    kind: LexKind
    value: Fraction | None = None
    tokens: tuple[Token, ...] = ()
    text: str = ""

    def __str__(self) -> str:
        return self.text or self.kind.value


_OPERATOR_KINDS = {
    TokenKind.ADD: LexKind.ADD,
    TokenKind.SUB: LexKind.SUB,
    TokenKind.MUL: LexKind.MUL,
    TokenKind.DIV: LexKind.DIV,
    TokenKind.LBR: LexKind.LBR,
    TokenKind.RBR: LexKind.RBR,
    TokenKind.EQ: LexKind.EQ,
}


def _x_order(d: Detection) -> tuple[float, float, int]:
    return (d.box.x_center, d.box.y_center, d.class_id)


def line_text(tokens: Sequence[Token]) -> str:
    """Raw ASCII text of a token sequence."""
    return "".join(t.text for t in tokens)


def tokens_from_detections(
    line: Sequence[Detection],
    class_map: ClassMap | None = None,
) -> list[Token]:
    """Tokens sorted by x_center; ties broken by (y_center, class id)."""
    class_map = class_map or ClassMap.default()
    tokens = []
    for det in sorted(line, key=_x_order):
        kind, value = class_map.token_kind(det.class_id)
        tokens.append(Token(kind, det.box.x_center, det.box.y_center, det, value))
    return tokens


def separate_expressions(
    dets: Sequence[Detection],
    class_map: ClassMap | None = None,
    band_scale: float = 1.0,
) -> list[ExpressionLine]:
    """
    Split one image's detections into expression lines.

    Repeatedly take the leftmost remaining detection as anchor; every
    remaining detection whose vertical center lies within the anchor's
    vertical extent (scaled by *band_scale*) joins its line. Lines are
    returned in anchor-discovery order.
    """
    if band_scale <= 0:
        raise ValueError(f"band_scale must be positive, got {band_scale}")
    remaining = sorted(dets, key=_x_order)
    lines: list[ExpressionLine] = []
    while remaining:
        anchor = remaining[0]
        half = 0.5 * anchor.box.height * band_scale
        y_min, y_max = anchor.box.y_center - half, anchor.box.y_center + half
        members = [d for d in remaining if y_min <= d.box.y_center <= y_max]
        remaining = [d for d in remaining if not y_min <= d.box.y_center <= y_max]
        lines.append(
            ExpressionLine(tuple(tokens_from_detections(members, class_map)), (y_min, y_max))
        )
    logger.debug("Separated %d detections into %d lines", len(dets), len(lines))
    return lines


def _number_from_run(run: Sequence[Token]) -> LexItem:
    text = "".join(t.text for t in run)
    dots = [i for i, t in enumerate(run) if t.kind is TokenKind.DOT]
    if len(dots) > 1:
        raise MalformedNumber(f"number '{text}' has {len(dots)} decimal points")
    if dots and (dots[0] == 0 or dots[0] == len(run) - 1):
        raise MalformedNumber(f"decimal point in '{text}' must sit between digits")
    return LexItem(LexKind.NUMBER, Fraction(text), tuple(run), text)


def assemble_numbers(tokens: Sequence[Token]) -> list[LexItem]:
    """
    Merge maximal runs of digit/decimal-point tokens into numbers.

    Raises:
        MalformedNumber: A run with several decimal points, or a point not
            both preceded and followed by a digit.
    """
    items: list[LexItem] = []
    run: list[Token] = []
    for token in tokens:
        if token.kind in (TokenKind.DIGIT, TokenKind.DOT):
            run.append(token)
            continue
        if run:
            items.append(_number_from_run(run))
            run = []
        kind = _OPERATOR_KINDS[token.kind]
        items.append(LexItem(kind, tokens=(token,), text=kind.value))
    if run:
        items.append(_number_from_run(run))
    return items


def tokens_from_text(text: str, class_map: ClassMap | None = None) -> list[Token]:
    """Tokens for expression text laid out on one unit-spaced line."""
    class_map = class_map or ClassMap.default()
    symbols = symbols_from_text(text)
    step = 1.0 / (len(symbols) + 1)
    detections = [
        Detection(class_map.class_id(s), Box((i + 1) * step, 0.5, step / 2, 0.1))
        for i, s in enumerate(symbols)
    ]
    return tokens_from_detections(detections, class_map)


def lex_text(text: str) -> list[LexItem]:
    """Lex expression text the way detections of it would be lexed."""
    return assemble_numbers(tokens_from_text(text))
