"""Grid decoding, class-specific confidence and non-maximum suppression."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .model import NUM_CLASSES, Box, Detection

logger = logging.getLogger(__name__)

# Grid sizes of the three detection heads
DEFAULT_GRID_SIZES = (19, 38, 76)

DEFAULT_CONF_THRESHOLD = 0.25
DEFAULT_NMS_THRESHOLD = 0.45


@dataclass(frozen=True)
class GridSpec:
    """An S x S detection grid predicting *boxes_per_cell* boxes per cell."""

    size: int = 19
    boxes_per_cell: int = 3

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"grid size must be >= 1, got {self.size}")
        if self.boxes_per_cell < 1:
            raise ValueError(f"boxes_per_cell must be >= 1, got {self.boxes_per_cell}")


@dataclass(frozen=True)
class CellPrediction:
    """
    One activated box prediction of a grid cell.

    ``objectness`` is the product P(Object) * IoU(truth, pred) as the
    detector emits it; ``class_probs`` are the conditional probabilities
    P(Class_i | Object). ``grid`` optionally overrides the GridSpec size so
    predictions from several heads can share one stream.
    """

    row: int
    col: int
    rel_x: float
    rel_y: float
    norm_w: float
    norm_h: float
    objectness: float
    class_probs: tuple[float, ...]
    grid: int | None = None
    box_index: int = 0

    def __post_init__(self) -> None:
        """Validate ranges that do not depend on the grid."""
        if len(self.class_probs) != NUM_CLASSES:
            raise ValueError(
                f"expected {NUM_CLASSES} class probabilities, got {len(self.class_probs)}"
            )
        if any(not 0.0 <= p <= 1.0 for p in self.class_probs):
            raise ValueError("class probabilities must lie in [0, 1]")
        if not 0.0 <= self.objectness <= 1.0:
            raise ValueError(f"objectness {self.objectness} outside [0, 1]")
        if not (0.0 <= self.rel_x <= 1.0 and 0.0 <= self.rel_y <= 1.0):
            raise ValueError(f"relative position outside [0, 1]: ({self.rel_x}, {self.rel_y})")
        if not (0.0 < self.norm_w <= 1.0 and 0.0 < self.norm_h <= 1.0):
            raise ValueError(f"box size outside (0, 1]: ({self.norm_w}, {self.norm_h})")
        if self.row < 0 or self.col < 0:
            raise ValueError(f"negative cell index: ({self.row}, {self.col})")
        if self.grid is not None and self.grid < 1:
            raise ValueError(f"grid size must be >= 1, got {self.grid}")
        if self.box_index < 0:
            raise ValueError(f"negative box index: {self.box_index}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CellPrediction:
        """Create CellPrediction from a decoded JSON object."""
        return cls(
            row=int(data["row"]),
            col=int(data["col"]),
            rel_x=float(data["rel_x"]),
            rel_y=float(data["rel_y"]),
            norm_w=float(data["norm_w"]),
            norm_h=float(data["norm_h"]),
            objectness=float(data["objectness"]),
            class_probs=tuple(float(p) for p in data["class_probs"]),
            grid=int(data["grid"]) if data.get("grid") is not None else None,
            box_index=int(data.get("box_index", 0)),
        )

    def to_dict(self) -> dict[str, Any]:
        """JSON-serializable form (inverse of from_dict)."""
        data: dict[str, Any] = {
            "row": self.row,
            "col": self.col,
            "rel_x": self.rel_x,
            "rel_y": self.rel_y,
            "norm_w": self.norm_w,
            "norm_h": self.norm_h,
            "objectness": self.objectness,
            "class_probs": list(self.class_probs),
        }
        if self.grid is not None:
            data["grid"] = self.grid
        if self.box_index:
            data["box_index"] = self.box_index
        return data


def decode_cell(p: CellPrediction, g: GridSpec) -> Box:
    """
    Convert a cell-relative prediction to an image-normalized Box.

    Raises:
        ValueError: If the cell lies outside the grid.
    """
    size = p.grid if p.grid is not None else g.size
    if p.row >= size or p.col >= size:
        raise ValueError(f"cell ({p.row}, {p.col}) outside {size}x{size} grid")
    if p.box_index >= g.boxes_per_cell:
        raise ValueError(f"box index {p.box_index} >= boxes_per_cell {g.boxes_per_cell}")
    return Box(
        (p.col + p.rel_x) / size,
        (p.row + p.rel_y) / size,
        p.norm_w,
        p.norm_h,
    )


def class_scores(p: CellPrediction) -> tuple[float, ...]:
    """Class-specific confidence: P(Class_i | Object) * objectness."""
    return tuple(float(s) for s in np.asarray(p.class_probs, dtype=float) * p.objectness)


def _rank_key(d: Detection) -> tuple[float, int, float, float, float, float]:
    # Descending confidence; the remaining fields make the order total.
    return (-d.confidence, d.class_id, d.box.x_center, d.box.y_center, d.box.width, d.box.height)


def _iou_against(boxes: np.ndarray, areas: np.ndarray, i: int, others: np.ndarray) -> np.ndarray:
    """IoU of box *i* with each box of *others*, computed like :func:`iou`."""
    inter_w = np.minimum(boxes[i, 2], boxes[others, 2]) - np.maximum(boxes[i, 0], boxes[others, 0])
    inter_h = np.minimum(boxes[i, 3], boxes[others, 3]) - np.maximum(boxes[i, 1], boxes[others, 1])
    inter = np.maximum(inter_w, 0.0) * np.maximum(inter_h, 0.0)
    return inter / (areas[i] + areas[others] - inter)


def nms(dets: Iterable[Detection], iou_threshold: float = DEFAULT_NMS_THRESHOLD) -> list[Detection]:
    """
    Class-wise greedy non-maximum suppression for one image.

    The highest-ranked detection of each class is kept and every
    same-class detection overlapping a kept one with IoU > *iou_threshold*
    is dropped. Output is sorted by descending confidence.
    """
    ranked = sorted(dets, key=_rank_key)
    by_class: dict[int, list[int]] = {}
    for rank, det in enumerate(ranked):
        by_class.setdefault(det.class_id, []).append(rank)

    keep: list[int] = []
    for ranks in by_class.values():
        boxes = np.array([ranked[r].box.corners() for r in ranks], dtype=float)
        areas = np.array([ranked[r].box.area for r in ranks], dtype=float)
        order = np.arange(len(ranks))
        while order.size > 0:
            i = int(order[0])
            keep.append(ranks[i])
            overlap = _iou_against(boxes, areas, i, order[1:])
            order = order[1:][overlap <= iou_threshold]
    return [ranked[r] for r in sorted(keep)]


def finalize(
    cells: Sequence[CellPrediction],
    g: GridSpec,
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
    nms_threshold: float = DEFAULT_NMS_THRESHOLD,
) -> list[Detection]:
    """
    Turn raw cell predictions into final detections.

    Each cell contributes its argmax class with that class's score; cells
    scoring below *conf_threshold* are dropped and the rest go through nms.
    """
    candidates: list[Detection] = []
    for cell in cells:
        scores = class_scores(cell)
        best = int(np.argmax(scores))
        score = min(1.0, scores[best])
        if score < conf_threshold:
            continue
        candidates.append(Detection(best, decode_cell(cell, g), score))
    result = nms(candidates, nms_threshold)
    logger.debug(
        "Finalized %d cells: %d above threshold, %d after NMS",
        len(cells), len(candidates), len(result),
    )
    return result
