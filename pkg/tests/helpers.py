"""Builders shared by several test modules."""

from __future__ import annotations

from pathlib import Path

from bengali_math_solver.model import SYMBOL_TEXT, Box, ClassMap, Detection

_TEXT_TO_SYMBOL = {text: name for name, text in SYMBOL_TEXT.items()}


def detections_for(
    text: str,
    y: float = 0.5,
    x0: float = 0.1,
    pitch: float = 0.05,
    confidence: float = 1.0,
) -> list[Detection]:
    """Detections spelling ASCII *text* left to right on one horizontal line."""
    class_map = ClassMap.default()
    return [
        Detection(
            class_map.class_id(_TEXT_TO_SYMBOL[ch]),
            Box(x0 + i * pitch, y, 0.04, 0.08),
            confidence,
        )
        for i, ch in enumerate(text)
    ]


def detection_lines(dets: list[Detection]) -> list[str]:
    """Detection-file lines for *dets*."""
    return [
        f"{d.class_id} {d.confidence} {d.box.x_center} {d.box.y_center} {d.box.width} {d.box.height}"
        for d in dets
    ]


def write_lines(path: Path, lines: list[str]) -> str:
    """Write text lines to *path* and return it as a string."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return str(path)
