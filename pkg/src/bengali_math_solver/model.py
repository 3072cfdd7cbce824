"""Shared domain types, the 18-class symbol vocabulary and box geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

NUM_CLASSES = 18

# Default class-id ordering: index == class id
SYMBOL_NAMES: tuple[str, ...] = (
    "d0", "d1", "d2", "d3", "d4", "d5", "d6", "d7", "d8", "d9",
    "add", "sub", "mul", "div", "lbr", "rbr", "eq", "dot",
)

# Bengali digit glyphs, for display only
BENGALI_DIGITS = "০১২৩৪৫৬৭৮৯"


class TokenKind(Enum):
    """Semantic kind of a detected symbol."""

    DIGIT = "digit"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    LBR = "lbr"
    RBR = "rbr"
    EQ = "eq"
    DOT = "dot"


# Canonical ASCII rendering per symbol name
SYMBOL_TEXT: dict[str, str] = {
    **{f"d{i}": str(i) for i in range(10)},
    "add": "+",
    "sub": "-",
    "mul": "*",
    "div": "/",
    "lbr": "(",
    "rbr": ")",
    "eq": "=",
    "dot": ".",
}

# Accepted input characters, including the typeset operators
TEXT_SYMBOLS: dict[str, str] = {
    **{text: name for name, text in SYMBOL_TEXT.items()},
    "×": "mul",
    "x": "mul",
    "÷": "div",
    "−": "sub",
    "–": "sub",
    **{digit: f"d{i}" for i, digit in enumerate(BENGALI_DIGITS)},
}


def symbol_kind(symbol: str) -> tuple[TokenKind, int | None]:
    """Return (kind, digit value) for a symbol name."""
    if symbol.startswith("d") and len(symbol) == 2 and symbol[1].isdigit():
        return TokenKind.DIGIT, int(symbol[1])
    return TokenKind(symbol), None


def symbols_from_text(text: str) -> list[str]:
    """
    Split expression text into symbol names, ignoring whitespace.

    Raises:
        ValueError: If a character is not part of the vocabulary.
    """
    symbols: list[str] = []
    for pos, ch in enumerate(text):
        if ch.isspace():
            continue
        try:
            symbols.append(TEXT_SYMBOLS[ch])
        except KeyError:
            raise ValueError(f"Unknown symbol {ch!r} at position {pos} in {text!r}") from None
    return symbols


@dataclass(frozen=True)
class ClassMap:
    """Mapping between class ids and symbol names (index == class id)."""

    symbols: tuple[str, ...] = SYMBOL_NAMES

    def __post_init__(self) -> None:
        """Validate that every symbol appears exactly once."""
        if len(self.symbols) != NUM_CLASSES:
            raise ValueError(
                f"Class map must have {NUM_CLASSES} entries, got {len(self.symbols)}"
            )
        unknown = sorted(set(self.symbols) - set(SYMBOL_NAMES))
        if unknown:
            raise ValueError(f"Unknown symbol names in class map: {', '.join(unknown)}")
        if len(set(self.symbols)) != NUM_CLASSES:
            raise ValueError("Duplicate symbol names in class map")

    @classmethod
    def default(cls) -> ClassMap:
        """The canonical ordering: digits 0-9, + - * / ( ) = ."""
        return cls()

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, str]]) -> ClassMap:
        """Build a map from (class_id, symbol) pairs covering every id once."""
        by_id: dict[int, str] = {}
        for class_id, symbol in pairs:
            if not 0 <= class_id < NUM_CLASSES:
                raise ValueError(f"Class id {class_id} outside [0, {NUM_CLASSES - 1}]")
            if class_id in by_id:
                raise ValueError(f"Class id {class_id} listed twice")
            by_id[class_id] = symbol
        missing = [i for i in range(NUM_CLASSES) if i not in by_id]
        if missing:
            raise ValueError(f"Class map misses id(s): {', '.join(map(str, missing))}")
        return cls(tuple(by_id[i] for i in range(NUM_CLASSES)))

    def symbol(self, class_id: int) -> str:
        """Symbol name of a class id."""
        return self.symbols[class_id]

    def class_id(self, symbol: str) -> int:
        """Class id of a symbol name."""
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValueError(f"Unknown symbol name: {symbol!r}") from None

    def token_kind(self, class_id: int) -> tuple[TokenKind, int | None]:
        """(kind, digit value) of a class id."""
        return symbol_kind(self.symbol(class_id))

    def text(self, class_id: int) -> str:
        """ASCII rendering of a class id."""
        return SYMBOL_TEXT[self.symbol(class_id)]


def _check_class_id(class_id: int) -> None:
    if isinstance(class_id, bool) or not isinstance(class_id, int):
        raise ValueError(f"class id must be an integer, got {class_id!r}")
    if not 0 <= class_id < NUM_CLASSES:
        raise ValueError(f"class id {class_id} outside [0, {NUM_CLASSES - 1}]")


@dataclass(frozen=True)
class Box:
    """Center-form bounding box normalized to the image size."""

    x_center: float
    y_center: float
    width: float
    height: float

    def __post_init__(self) -> None:
        """Validate the normalized ranges."""
        values = (self.x_center, self.y_center, self.width, self.height)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"Box values must be finite: {values}")
        if not (0.0 <= self.x_center <= 1.0 and 0.0 <= self.y_center <= 1.0):
            raise ValueError(f"Box center outside [0, 1]: ({self.x_center}, {self.y_center})")
        if not (0.0 < self.width <= 1.0 and 0.0 < self.height <= 1.0):
            raise ValueError(f"Box size outside (0, 1]: ({self.width}, {self.height})")

    @property
    def area(self) -> float:
        """Box area in normalized units."""
        return self.width * self.height

    def corners(self, clamp: bool = False) -> tuple[float, float, float, float]:
        """
        Corner form (x_min, y_min, x_max, y_max).

        With *clamp* the corners are limited to [0, 1]; the stored center
        form is never changed.
        """
        half_w = self.width / 2
        half_h = self.height / 2
        x_min, y_min = self.x_center - half_w, self.y_center - half_h
        x_max, y_max = self.x_center + half_w, self.y_center + half_h
        if clamp:
            x_min, y_min = max(0.0, x_min), max(0.0, y_min)
            x_max, y_max = min(1.0, x_max), min(1.0, y_max)
        return x_min, y_min, x_max, y_max

    def translated(self, dx: float, dy: float) -> Box:
        """A copy moved by (dx, dy)."""
        return Box(self.x_center + dx, self.y_center + dy, self.width, self.height)


def box_from_corners(x_min: float, y_min: float, x_max: float, y_max: float) -> Box:
    """Build a Box from corner coordinates."""
    return Box(
        (x_min + x_max) / 2,
        (y_min + y_max) / 2,
        x_max - x_min,
        y_max - y_min,
    )


def clamped_box(x_center: float, y_center: float, width: float, height: float) -> Box:
    """Box with its center clamped to [0, 1] and its size to [1e-6, 1]."""
    return Box(
        min(1.0, max(0.0, x_center)),
        min(1.0, max(0.0, y_center)),
        min(1.0, max(1e-6, width)),
        min(1.0, max(1e-6, height)),
    )


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0.0 when disjoint."""
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    inter_w = min(ax2, bx2) - max(ax1, bx1)
    inter_h = min(ay2, by2) - max(ay1, by1)
    if inter_w <= 0.0 or inter_h <= 0.0:
        return 0.0
    inter = inter_w * inter_h
    union = a.area + b.area - inter
    return min(1.0, max(0.0, inter / union))


@dataclass(frozen=True)
class Detection:
    """A detector output: class, box and confidence score."""

    class_id: int
    box: Box
    confidence: float = 1.0

    def __post_init__(self) -> None:
        """Validate class id and confidence."""
        _check_class_id(self.class_id)
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class GroundTruthObject:
    """An annotated object: class and box."""

    class_id: int
    box: Box

    def __post_init__(self) -> None:
        """Validate class id."""
        _check_class_id(self.class_id)


@dataclass(frozen=True)
class Scene:
    """One image worth of objects (ground truth or detections)."""

    image_id: str
    width_px: int = 608
    height_px: int = 608
    objects: tuple[GroundTruthObject | Detection, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        """Validate id and pixel size."""
        if not self.image_id:
            raise ValueError("image_id is required")
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError(
                f"Pixel dimensions must be positive: {self.width_px}x{self.height_px}"
            )
