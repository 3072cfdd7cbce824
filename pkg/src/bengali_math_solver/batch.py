"""Batch processing behind the CLI subcommands."""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Mapping, Sequence

from .anchors import UNIT_PIXELS, AnchorSet, cluster_anchors
from .annotations import read_annotations, read_cell_predictions, read_detections
from .config import GenSpec, RunConfig
from .errors import ExpressionError
from .expression import lex_text, separate_expressions
from .metrics import EvalReport, evaluate_map
from .model import ClassMap, Detection
from .parser import evaluate, format_fraction, parse, solve_line
from .postprocess import GridSpec, finalize
from .synthgen import (
    REFERENCE_EXPRESSIONS,
    expression_category,
    generate_scenes,
    read_scene_meta,
    write_scene_directory,
)
from .utils import atomic_write_text

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_IO = 3


def emit_json(document: dict[str, Any], out: str | None = None) -> None:
    """Write a JSON document to *out*, or to standard output."""
    text = json.dumps(document, indent=2, ensure_ascii=False) + "\n"
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def solve_image(
    image_id: str,
    detections: Sequence[Detection],
    class_map: ClassMap | None = None,
) -> dict[str, Any]:
    """Solve every expression line of one image; entries ordered by Y_min."""
    lines = separate_expressions(detections, class_map)
    entries = []
    for line in sorted(lines, key=lambda ln: ln.y_band):
        entry: dict[str, Any] = {
            "expression_text": line.text,
            "value": None,
            "fraction": None,
            "had_equals": False,
            "y_band": [line.y_band[0], line.y_band[1]],
            "error": None,
        }
        try:
            text, outcome = solve_line(line)
        except ExpressionError as e:
            logger.warning("%s: cannot solve '%s': %s", image_id, line.text, e)
            entry["error"] = e.reason
        else:
            entry["expression_text"] = text
            entry["value"] = outcome.text
            entry["fraction"] = format_fraction(outcome.value)
            entry["had_equals"] = outcome.had_equals
        entries.append(entry)
    return {"image_id": image_id, "expressions": entries}


def _load_detections(config: RunConfig) -> list[tuple[str, list[Detection]]]:
    path = config.inputs[0]
    if config.input_kind == "cells":
        grid = GridSpec(size=config.grid_size)
        return [
            (image_id, finalize(cells, grid, config.conf_threshold, config.nms_threshold))
            for image_id, cells in read_cell_predictions(path, grid)
        ]
    return read_detections(path)


def cmd_solve(config: RunConfig, class_map: ClassMap | None = None) -> tuple[dict[str, Any], int]:
    """
    Solve every image of a detection directory.

    With ``config.expected`` naming an ``images.meta`` file the report also
    carries per-category accuracy under ``"accuracy"``.

    Returns:
        (report, exit status): status is EXIT_DOMAIN when any expression
        failed, EXIT_OK otherwise.
    """
    records = _load_detections(config)
    logger.info("Solving %d images with %d workers…", len(records), config.jobs)

    with ThreadPoolExecutor(max_workers=config.jobs) as executor:
        futures = {
            image_id: executor.submit(solve_image, image_id, dets, class_map)
            for image_id, dets in records
        }
    images = [futures[image_id].result() for image_id in sorted(futures)]

    failures = sum(1 for image in images for e in image["expressions"] if e["error"])
    if failures:
        logger.warning("%d expression(s) could not be solved", failures)
    report = {"schema_version": SCHEMA_VERSION, "images": images}
    if config.expected:
        report["accuracy"] = score_categories(report, read_scene_meta(config.expected))
    return report, EXIT_DOMAIN if failures else EXIT_OK


def _expected_value(text: str) -> str | None:
    try:
        return evaluate(parse(lex_text(text))).text
    except ExpressionError:
        return None


def _image_correct(entries: Sequence[dict[str, Any]] | None, texts: Sequence[str]) -> bool:
    # Lines pair up top to bottom; an unsolvable expected line matches a failed one.
    if entries is None or len(entries) != len(texts):
        return False
    return all(entry["value"] == _expected_value(text) for entry, text in zip(entries, texts))


def _category_order(category: str) -> tuple[int, str]:
    names = list(REFERENCE_EXPRESSIONS)
    return (names.index(category) if category in names else len(names), category)


def score_categories(
    report: Mapping[str, Any],
    expected: Mapping[str, Sequence[str]],
) -> dict[str, Any]:
    """
    Count correctly solved images per expression category.

    An image is correct when it yields as many lines as expected and
    each line's value equals the value of the expected expression.
    Images without a solution count as wrong.
    """
    solved = {image["image_id"]: image["expressions"] for image in report["images"]}
    unexpected = sorted(set(solved) - set(expected))
    if unexpected:
        logger.warning("%d solved image(s) have no expected expressions", len(unexpected))

    tallies: dict[str, list[int]] = {}
    for image_id in sorted(expected):
        texts = expected[image_id]
        tally = tallies.setdefault(expression_category(texts), [0, 0])
        tally[0] += 1
        if _image_correct(solved.get(image_id), texts):
            tally[1] += 1

    categories = [
        {"category": category, "images": images, "correct": correct, "accuracy": correct / images}
        for category, (images, correct) in sorted(tallies.items(), key=lambda kv: _category_order(kv[0]))
    ]
    total = sum(c["images"] for c in categories)
    correct = sum(c["correct"] for c in categories)
    return {
        "images": total,
        "correct": correct,
        "accuracy": correct / total if total else 0.0,
        "categories": categories,
    }


def format_accuracy(accuracy: Mapping[str, Any]) -> str:
    """Human-readable per-category table."""
    lines = [f"{'category':<32} {'images':>6} {'correct':>7} {'accuracy':>8}", "-" * 56]
    for c in accuracy["categories"]:
        lines.append(f"{c['category']:<32} {c['images']:>6} {c['correct']:>7} {c['accuracy']:>8.2%}")
    lines.append("-" * 56)
    lines.append(f"{'total':<32} {accuracy['images']:>6} {accuracy['correct']:>7} {accuracy['accuracy']:>8.2%}")
    return "\n".join(lines)


def cmd_eval_map(config: RunConfig) -> EvalReport:
    """Evaluate a detection directory against an annotation directory."""
    dets_path, annotations_path = config.inputs[:2]
    with ThreadPoolExecutor(max_workers=min(2, config.jobs)) as executor:
        det_future = executor.submit(read_detections, dets_path)
        gt_future = executor.submit(read_annotations, annotations_path)
    dets = dict(det_future.result())
    gts = dict(gt_future.result())
    logger.info(
        "Evaluating %d detection files against %d annotation files at IoU %.2f",
        len(dets), len(gts), config.iou_threshold,
    )
    return evaluate_map(dets, gts, config.iou_threshold)


def cmd_anchors(
    config: RunConfig,
    unit: str = "normalized",
    reference: tuple[int, int] = (608, 608),
) -> AnchorSet:
    """Cluster the (w, h) of every annotated object into k anchors."""
    boxes = [
        (obj.box.width, obj.box.height)
        for _image_id, objects in read_annotations(config.inputs[0])
        for obj in objects
    ]
    logger.info("Clustering %d boxes into k=%d anchors", len(boxes), config.k)
    anchors = cluster_anchors(boxes, config.k, config.seed, config.max_iters)
    if unit == UNIT_PIXELS:
        anchors = anchors.scaled(*reference)
    return anchors


def cmd_gen(config: RunConfig, spec: GenSpec, class_map: ClassMap | None = None) -> int:
    """Generate scenes into ``config.out``; returns the scene count."""
    scenes = generate_scenes(spec, config.seed, class_map)
    write_scene_directory(config.out, scenes, config.seed)
    return len(scenes)
