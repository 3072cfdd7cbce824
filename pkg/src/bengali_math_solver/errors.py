"""Exception hierarchy for bengali-math-solver."""

from __future__ import annotations

from typing import Any


class MathSolverError(Exception):
    """Base class for every error raised by the library."""


class FormatError(MathSolverError, ValueError):
    """A text file did not follow its documented line format."""

    def __init__(self, message: str, path: str | None = None, line_no: int | None = None) -> None:
        self.path = path
        self.line_no = line_no
        self.reason = message
        if path is not None and line_no is not None:
            message = f"{path}:{line_no}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class MalformedLine(FormatError):
    """Wrong field count, non-numeric field or out-of-range coordinate."""


class OutOfRangeClass(FormatError):
    """Class id outside the 18-class vocabulary."""


class ConfidenceOutOfRange(FormatError):
    """Detection confidence outside [0, 1]."""


class InvalidClassMap(FormatError):
    """Class-map file does not cover all 18 ids exactly once."""


class EmptyGroundTruth(MathSolverError, ValueError):
    """A precision-recall curve was requested for a class with no ground truth."""

    def __init__(self, class_id: int) -> None:
        self.class_id = class_id
        super().__init__(f"class {class_id} has no ground-truth instances")


class NoGroundTruthAtAll(MathSolverError, ValueError):
    """Evaluation was requested without a single ground-truth object."""


class MissingAnnotation(MathSolverError, ValueError):
    """Detections exist for images that have no annotation."""

    def __init__(self, image_ids: list[str]) -> None:
        self.image_ids = list(image_ids)
        super().__init__(f"no annotations for image(s): {', '.join(self.image_ids)}")


class InsufficientBoxes(MathSolverError, ValueError):
    """Fewer boxes than requested anchor clusters."""

    def __init__(self, count: int, k: int) -> None:
        self.count = count
        self.k = k
        super().__init__(f"need at least {k} boxes for k={k}, got {count}")


class DoesNotFit(MathSolverError, ValueError):
    """A synthetic layout would extend past the image."""


class ExpressionError(MathSolverError, ValueError):
    """Failure turning one expression line into a value."""

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.reason = message
        self.y_band: tuple[float, float] | None = None

    def __str__(self) -> str:
        if self.y_band is None:
            return self.reason
        return f"{self.reason} (line y=[{self.y_band[0]:.4f}, {self.y_band[1]:.4f}])"


class MalformedNumber(ExpressionError):
    """A digit/decimal-point run that does not form a number."""


class ExpressionSyntaxError(ExpressionError):
    """The lexed items do not form an arithmetic expression."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} at position {position}")
        self.position = position


class DivisionByZero(ExpressionError):
    """A divisor evaluated to zero."""

    def __init__(self, divisor: Any, rendering: str) -> None:
        super().__init__(f"division by zero: divisor '{rendering}' evaluates to 0")
        self.divisor = divisor
        self.rendering = rendering
