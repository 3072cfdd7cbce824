"""Readers and writers for annotation, detection, class-map and cell-prediction files."""

from __future__ import annotations

import json
import logging
import math
import os
from typing import Iterable, Iterator, Sequence

from .errors import ConfidenceOutOfRange, FormatError, InvalidClassMap, MalformedLine, OutOfRangeClass
from .model import NUM_CLASSES, Box, ClassMap, Detection, GroundTruthObject
from .postprocess import CellPrediction, GridSpec, decode_cell
from .utils import CELLS_SUFFIX, TEXT_SUFFIX, atomic_write_text, image_id_from_path, walk_files

logger = logging.getLogger(__name__)

# Serialized coordinate precision (decimal places)
PRECISION = 6


def _input_files(path: str | os.PathLike[str], suffix: str) -> list[str]:
    """
    A single file, or every matching file of a directory sorted by image id.

    Raises:
        FormatError: If two files of the directory share an image id.
    """
    if not os.path.isdir(path):
        return [os.fspath(path)]
    files = walk_files(path, suffix)
    seen: dict[str, str] = {}
    for file in files:
        image_id = image_id_from_path(file)
        if image_id in seen:
            raise FormatError(
                f"duplicate image id {image_id!r} (also {os.path.basename(seen[image_id])})", file
            )
        seen[image_id] = file
    return files


def _numbered_lines(path: str) -> Iterator[tuple[int, list[str]]]:
    """Yield (line number, fields) for every non-blank line."""
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            fields = raw.split()
            if fields:
                yield line_no, fields


def _parse_class_id(token: str, path: str, line_no: int) -> int:
    try:
        class_id = int(token)
    except ValueError:
        raise MalformedLine(f"class id {token!r} is not an integer", path, line_no) from None
    if not 0 <= class_id < NUM_CLASSES:
        raise OutOfRangeClass(
            f"class id {class_id} outside [0, {NUM_CLASSES - 1}]", path, line_no
        )
    return class_id


def _parse_float(token: str, name: str, path: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedLine(f"{name} {token!r} is not a number", path, line_no) from None
    if not math.isfinite(value):
        raise MalformedLine(f"{name} {token!r} is not finite", path, line_no)
    return value


def _parse_box(tokens: Sequence[str], path: str, line_no: int) -> Box:
    x, y, w, h = (
        _parse_float(t, name, path, line_no)
        for t, name in zip(tokens, ("x_center", "y_center", "width", "height"))
    )
    try:
        return Box(x, y, w, h)
    except ValueError as e:
        raise MalformedLine(str(e), path, line_no) from None


def _read_annotation_file(path: str) -> list[GroundTruthObject]:
    objects: list[GroundTruthObject] = []
    for line_no, fields in _numbered_lines(path):
        if len(fields) != 5:
            raise MalformedLine(f"expected 5 fields, got {len(fields)}", path, line_no)
        class_id = _parse_class_id(fields[0], path, line_no)
        objects.append(GroundTruthObject(class_id, _parse_box(fields[1:], path, line_no)))
    return objects


def _read_detection_file(path: str) -> list[Detection]:
    detections: list[Detection] = []
    for line_no, fields in _numbered_lines(path):
        if len(fields) != 6:
            raise MalformedLine(f"expected 6 fields, got {len(fields)}", path, line_no)
        class_id = _parse_class_id(fields[0], path, line_no)
        confidence = _parse_float(fields[1], "confidence", path, line_no)
        if not 0.0 <= confidence <= 1.0:
            raise ConfidenceOutOfRange(
                f"confidence {confidence} outside [0, 1]", path, line_no
            )
        box = _parse_box(fields[2:], path, line_no)
        detections.append(Detection(class_id, box, confidence))
    return detections


def read_annotations(
    path: str | os.PathLike[str],
) -> list[tuple[str, list[GroundTruthObject]]]:
    """
    Read ground truth from one annotation file or a directory of them.

    Each line is ``<class_id> <x_center> <y_center> <width> <height>``;
    the image id is the file stem.

    Raises:
        MalformedLine: Wrong field count, non-numeric or out-of-range value.
        OutOfRangeClass: Class id outside the vocabulary.
    """
    result = []
    for file in _input_files(path, TEXT_SUFFIX):
        objects = _read_annotation_file(file)
        logger.debug("Read %d objects from %s", len(objects), file)
        result.append((image_id_from_path(file), objects))
    return result


def read_detections(
    path: str | os.PathLike[str],
) -> list[tuple[str, list[Detection]]]:
    """
    Read detections from one detection file or a directory of them.

    Each line is ``<class_id> <confidence> <x_center> <y_center> <width> <height>``.

    Raises:
        MalformedLine, OutOfRangeClass, ConfidenceOutOfRange
    """
    result = []
    for file in _input_files(path, TEXT_SUFFIX):
        detections = _read_detection_file(file)
        logger.debug("Read %d detections from %s", len(detections), file)
        result.append((image_id_from_path(file), detections))
    return result


def _fmt(value: float) -> str:
    return f"{value:.{PRECISION}f}"


def format_annotations(objects: Iterable[GroundTruthObject]) -> str:
    """Annotation file content for *objects*."""
    return "".join(
        f"{o.class_id} {_fmt(o.box.x_center)} {_fmt(o.box.y_center)} "
        f"{_fmt(o.box.width)} {_fmt(o.box.height)}\n"
        for o in objects
    )


def format_detections(detections: Iterable[Detection]) -> str:
    """Detection file content for *detections*."""
    return "".join(
        f"{d.class_id} {_fmt(d.confidence)} {_fmt(d.box.x_center)} {_fmt(d.box.y_center)} "
        f"{_fmt(d.box.width)} {_fmt(d.box.height)}\n"
        for d in detections
    )


def write_annotations(path: str | os.PathLike[str], objects: Iterable[GroundTruthObject]) -> None:
    """Write an annotation file atomically."""
    atomic_write_text(path, format_annotations(objects))


def write_detections(path: str | os.PathLike[str], detections: Iterable[Detection]) -> None:
    """Write a detection file atomically."""
    atomic_write_text(path, format_detections(detections))


def read_class_map(path: str | os.PathLike[str]) -> ClassMap:
    """
    Read a class-map file of ``<class_id> <symbol-name>`` lines.

    Raises:
        InvalidClassMap: If a line is malformed or the ids are not covered
            exactly once.
    """
    path = os.fspath(path)
    pairs: list[tuple[int, str]] = []
    for line_no, fields in _numbered_lines(path):
        if len(fields) != 2:
            raise InvalidClassMap(f"expected 2 fields, got {len(fields)}", path, line_no)
        try:
            class_id = int(fields[0])
        except ValueError:
            raise InvalidClassMap(f"class id {fields[0]!r} is not an integer", path, line_no) from None
        pairs.append((class_id, fields[1]))
    try:
        return ClassMap.from_pairs(pairs)
    except ValueError as e:
        raise InvalidClassMap(str(e), path) from None


def read_cell_predictions(
    path: str | os.PathLike[str],
    grid: GridSpec | None = None,
) -> list[tuple[str, list[CellPrediction]]]:
    """
    Read raw per-cell predictions from a JSON-lines file or a directory of them.

    With *grid*, every cell must also decode on that grid (row, column and
    box index in range).

    Raises:
        MalformedLine: A line is not a JSON object describing a valid cell.
    """
    result = []
    for file in _input_files(path, CELLS_SUFFIX):
        cells: list[CellPrediction] = []
        with open(file, "r", encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                if not raw.strip():
                    continue
                try:
                    cell = CellPrediction.from_dict(json.loads(raw))
                    if grid is not None:
                        decode_cell(cell, grid)
                    cells.append(cell)
                except (ValueError, TypeError, KeyError) as e:
                    raise MalformedLine(f"invalid cell prediction: {e}", file, line_no) from None
        logger.debug("Read %d cell predictions from %s", len(cells), file)
        result.append((image_id_from_path(file), cells))
    return result
