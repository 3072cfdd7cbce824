"""Anchor-box priors from k-means clustering under the 1 - IoU distance."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import InsufficientBoxes

logger = logging.getLogger(__name__)

DEFAULT_K = 9
DEFAULT_MAX_ITERS = 300

# Largest network input of the 19/38/76 grid heads
REFERENCE_RESOLUTION = (608, 608)

UNIT_NORMALIZED = "normalized"
UNIT_PIXELS = "pixels"


def anchor_iou(a: tuple[float, float], b: tuple[float, float]) -> float:
    """IoU of two (w, h) boxes sharing a common center."""
    inter = min(a[0], b[0]) * min(a[1], b[1])
    return inter / (a[0] * a[1] + b[0] * b[1] - inter)


def wh_iou(boxes: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """N x K matrix of centered IoU between (w, h) rows."""
    inter = np.minimum(boxes[:, None, :], centroids[None, :, :]).prod(axis=2)
    return inter / (boxes.prod(axis=1)[:, None] + centroids.prod(axis=1)[None, :] - inter)


@dataclass(frozen=True)
class AnchorSet:
    """k anchor (width, height) pairs sorted ascending by area."""

    anchors: tuple[tuple[float, float], ...]
    unit: str = UNIT_NORMALIZED
    reference: tuple[int, int] | None = None
    iterations: int = 0
    mean_distance: float = 0.0
    mean_iou: float = 0.0
    distance_history: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if any(w <= 0 or h <= 0 for w, h in self.anchors):
            raise ValueError("anchor dimensions must be positive")
        if self.unit not in (UNIT_NORMALIZED, UNIT_PIXELS):
            raise ValueError(f"unknown anchor unit: {self.unit!r}")

    @property
    def k(self) -> int:
        """Number of anchors."""
        return len(self.anchors)

    def scaled(self, width: int, height: int) -> AnchorSet:
        """Normalized anchors expressed in pixels of a width x height input."""
        if self.unit != UNIT_NORMALIZED:
            raise ValueError("only normalized anchors can be scaled")
        return AnchorSet(
            anchors=tuple((w * width, h * height) for w, h in self.anchors),
            unit=UNIT_PIXELS,
            reference=(width, height),
            iterations=self.iterations,
            mean_distance=self.mean_distance,
            mean_iou=self.mean_iou,
            distance_history=self.distance_history,
        )

    def darknet_line(self) -> str:
        """``w,h, w,h, ...`` as in a Darknet cfg; pixels are rounded to integers."""
        if self.unit == UNIT_PIXELS:
            pairs = [f"{round(w)},{round(h)}" for w, h in self.anchors]
        else:
            pairs = [f"{w:.6f},{h:.6f}" for w, h in self.anchors]
        return ", ".join(pairs)

    def to_dict(self) -> dict[str, Any]:
        """JSON document; key order is fixed."""
        return {
            "schema_version": 1,
            "k": self.k,
            "unit": self.unit,
            "reference": list(self.reference) if self.reference else None,
            "anchors": [[w, h] for w, h in self.anchors],
            "iterations": self.iterations,
            "mean_distance": self.mean_distance,
            "mean_iou": self.mean_iou,
            "darknet": self.darknet_line(),
        }

    def to_json(self) -> str:
        """Indented JSON of to_dict()."""
        return json.dumps(self.to_dict(), indent=2)


def _seed_centroids(boxes: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """
    Greedy k-means++ seeding weighted by the squared 1 - IoU distance.

    Each step samples ``2 + log(k)`` candidates and keeps the one that
    lowers the summed squared distance the most.
    """
    n = len(boxes)
    trials = 2 + int(np.log(k))
    chosen = [int(rng.integers(n))]
    min_dist = 1.0 - wh_iou(boxes, boxes[chosen])[:, 0]
    while len(chosen) < k:
        weights = min_dist ** 2
        weights[chosen] = 0.0
        total = weights.sum()
        if total <= 0:
            # All remaining boxes coincide with a chosen centroid
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(free))
            chosen.append(idx)
            continue
        candidates = rng.choice(n, size=trials, p=weights / total)
        cand_dist = np.minimum(min_dist[None, :], 1.0 - wh_iou(boxes[candidates], boxes))
        potentials = (cand_dist ** 2).sum(axis=1)
        best = int(np.argmin(potentials))
        idx = int(candidates[best])
        chosen.append(idx)
        min_dist = cand_dist[best]
    return boxes[chosen].copy()


def _repair_empty(
    boxes: np.ndarray,
    centroids: np.ndarray,
    assignment: np.ndarray,
    distances: np.ndarray,
) -> None:
    """Move each empty cluster's centroid to the box farthest from its own centroid."""
    counts = np.bincount(assignment, minlength=len(centroids))
    own = distances[np.arange(len(boxes)), assignment].copy()
    for cluster in np.flatnonzero(counts == 0):
        far = int(np.argmax(own))
        logger.debug("Re-seeding empty cluster %d with box %d", cluster, far)
        centroids[cluster] = boxes[far]
        own[far] = -1.0


def cluster_anchors(
    boxes: Sequence[tuple[float, float]],
    k: int = DEFAULT_K,
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> AnchorSet:
    """
    Lloyd k-means over (w, h) with d = 1 - anchor_iou.

    Boxes are sorted canonically before seeding, so the result depends
    only on the multiset of boxes and the seed. Centroids are updated to
    the arithmetic mean of their members; iteration stops when the
    assignment repeats or after *max_iters* assignments.

    Raises:
        InsufficientBoxes: If there are fewer boxes than *k*.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    data = np.asarray(boxes, dtype=float).reshape(-1, 2)
    if len(data) < k:
        raise InsufficientBoxes(len(data), k)
    if (data <= 0).any():
        raise ValueError("box dimensions must be positive")

    data = data[np.lexsort((data[:, 1], data[:, 0]))]
    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(data, k, rng)

    history: list[float] = []
    assignment: np.ndarray | None = None
    iterations = 0
    for iterations in range(1, max_iters + 1):
        distances = 1.0 - wh_iou(data, centroids)
        nearest = np.argmin(distances, axis=1)
        total = float(distances[np.arange(len(data)), nearest].sum())
        if history and total > history[-1] + 1e-12:
            logger.warning(
                "k-means distance increased at iteration %d: %.6f -> %.6f",
                iterations, history[-1], total,
            )
        history.append(total)

        if assignment is not None and np.array_equal(nearest, assignment):
            break
        assignment = nearest

        for cluster in range(k):
            members = data[assignment == cluster]
            if len(members):
                centroids[cluster] = members.mean(axis=0)
        _repair_empty(data, centroids, assignment, distances)

    final = wh_iou(data, centroids)
    best = final.max(axis=1)
    mean_iou = float(best.mean())
    mean_distance = float((1.0 - best).mean())
    logger.info(
        "k-means (k=%d) finished after %d iterations, mean distance %.6f, mean IoU %.4f",
        k, iterations, mean_distance, mean_iou,
    )

    order = sorted(range(k), key=lambda i: (centroids[i, 0] * centroids[i, 1], centroids[i, 0]))
    return AnchorSet(
        anchors=tuple((float(centroids[i, 0]), float(centroids[i, 1])) for i in order),
        iterations=iterations,
        mean_distance=mean_distance,
        mean_iou=mean_iou,
        distance_history=tuple(history),
    )
