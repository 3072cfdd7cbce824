"""Tests for annotation, detection, class-map and cell-prediction files."""

import json
from pathlib import Path

import pytest

from bengali_math_solver.annotations import (
    format_detections,
    read_annotations,
    read_cell_predictions,
    read_class_map,
    read_detections,
    write_annotations,
    write_detections,
)
from bengali_math_solver.errors import (
    ConfidenceOutOfRange,
    FormatError,
    InvalidClassMap,
    MalformedLine,
    OutOfRangeClass,
)
from bengali_math_solver.model import SYMBOL_NAMES, Box, Detection, GroundTruthObject
from bengali_math_solver.postprocess import GridSpec
from tests.helpers import write_lines


class TestReadAnnotations:
    """Tests for read_annotations."""

    def test_single_line(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.txt", ["3 0.5 0.5 0.1 0.2"])
        [(image_id, objects)] = read_annotations(path)
        assert image_id == "img"
        assert objects == [GroundTruthObject(3, Box(0.5, 0.5, 0.1, 0.2))]

    def test_empty_file(self, temp_dir):
        path = write_lines(Path(temp_dir) / "empty.txt", [])
        assert read_annotations(path) == [("empty", [])]

    def test_blank_lines_skipped(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.txt", ["", "3 0.5 0.5 0.1 0.2", "   "])
        assert len(read_annotations(path)[0][1]) == 1

    def test_out_of_range_class(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.txt", ["18 0.5 0.5 0.1 0.2"])
        with pytest.raises(OutOfRangeClass) as excinfo:
            read_annotations(path)
        assert excinfo.value.line_no == 1
        assert excinfo.value.path == path

    def test_wrong_field_count(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.txt", ["1 0.5 0.5 0.1 0.2", "3 0.5 0.5 0.1"])
        with pytest.raises(MalformedLine, match="expected 5 fields") as excinfo:
            read_annotations(path)
        assert excinfo.value.line_no == 2

    @pytest.mark.parametrize(
        "line",
        ["a 0.5 0.5 0.1 0.2", "3 0.5 nan 0.1 0.2", "3 0.5 0.5 0 0.2", "3 1.5 0.5 0.1 0.2"],
    )
    def test_malformed_values(self, temp_dir, line):
        path = write_lines(Path(temp_dir) / "img.txt", [line])
        with pytest.raises(MalformedLine):
            read_annotations(path)

    def test_format_errors_are_value_errors(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.txt", ["x"])
        with pytest.raises(ValueError):
            read_annotations(path)

    def test_directory_sorted_by_image_id(self, temp_dir):
        write_lines(Path(temp_dir) / "b.txt", ["1 0.5 0.5 0.1 0.1"])
        write_lines(Path(temp_dir) / "a.txt", ["2 0.5 0.5 0.1 0.1"])
        write_lines(Path(temp_dir) / "notes.md", ["ignored"])
        write_lines(Path(temp_dir) / ".hidden.txt", ["ignored"])
        assert [image_id for image_id, _ in read_annotations(temp_dir)] == ["a", "b"]

    def test_duplicate_image_id(self, temp_dir):
        """Suffixes match case-insensitively, so a.txt and a.TXT collide."""
        write_lines(Path(temp_dir) / "a.txt", ["1 0.5 0.5 0.1 0.1"])
        write_lines(Path(temp_dir) / "a.TXT", ["2 0.5 0.5 0.1 0.1"])
        with pytest.raises(FormatError, match="duplicate image id 'a'"):
            read_annotations(temp_dir)


class TestReadDetections:
    """Tests for read_detections."""

    def test_single_line(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.txt", ["10 0.9 0.2 0.3 0.05 0.08"])
        [(_, [det])] = read_detections(path)
        assert det == Detection(10, Box(0.2, 0.3, 0.05, 0.08), 0.9)

    def test_confidence_out_of_range(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.txt", ["10 1.5 0.2 0.3 0.05 0.08"])
        with pytest.raises(ConfidenceOutOfRange):
            read_detections(path)

    def test_annotation_line_rejected(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.txt", ["10 0.2 0.3 0.05 0.08"])
        with pytest.raises(MalformedLine, match="expected 6 fields"):
            read_detections(path)


class TestWriters:
    """Tests for the annotation and detection writers."""

    def test_detections_written_with_six_decimals(self):
        text = format_detections([Detection(3, Box(0.5, 0.25, 0.1, 0.2), 0.75)])
        assert text == "3 0.750000 0.500000 0.250000 0.100000 0.200000\n"

    def test_written_files_read_back(self, temp_dir, sample_objects):
        ann = Path(temp_dir) / "out" / "scene.txt"
        det = Path(temp_dir) / "det" / "scene.txt"
        dets = [Detection(o.class_id, o.box, 0.5) for o in sample_objects]
        write_annotations(ann, sample_objects)
        write_detections(det, dets)

        [(_, objects)] = read_annotations(ann)
        [(_, read_back)] = read_detections(det)
        for original, read in zip(sample_objects, objects):
            assert read.class_id == original.class_id
            assert read.box.x_center == pytest.approx(original.box.x_center, abs=1e-6)
        assert [d.confidence for d in read_back] == [0.5, 0.5, 0.5]

    def test_no_temp_file_left(self, temp_dir, sample_objects):
        write_annotations(Path(temp_dir) / "a.txt", sample_objects)
        assert sorted(p.name for p in Path(temp_dir).iterdir()) == ["a.txt"]


class TestReadClassMap:
    """Tests for read_class_map."""

    def test_valid_map(self, temp_dir):
        names = list(reversed(SYMBOL_NAMES))
        path = write_lines(Path(temp_dir) / "classes.txt", [f"{i} {n}" for i, n in enumerate(names)])
        cmap = read_class_map(path)
        assert cmap.symbol(0) == "dot"
        assert cmap.class_id("d0") == 17

    def test_missing_id(self, temp_dir):
        path = write_lines(Path(temp_dir) / "classes.txt", ["0 d0", "1 d1"])
        with pytest.raises(InvalidClassMap, match="misses"):
            read_class_map(path)

    def test_malformed_line(self, temp_dir):
        path = write_lines(Path(temp_dir) / "classes.txt", ["zero d0"])
        with pytest.raises(InvalidClassMap) as excinfo:
            read_class_map(path)
        assert isinstance(excinfo.value, FormatError)
        assert excinfo.value.line_no == 1


class TestReadCellPredictions:
    """Tests for read_cell_predictions."""

    def _cell(self, **overrides):
        cell = {
            "row": 0, "col": 1, "rel_x": 0.5, "rel_y": 0.5,
            "norm_w": 0.1, "norm_h": 0.1, "objectness": 0.9,
            "class_probs": [0.0] * 17 + [1.0],
        }
        cell.update(overrides)
        return json.dumps(cell)

    def test_reads_cells(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.jsonl", [self._cell(), "", self._cell(grid=38)])
        [(image_id, cells)] = read_cell_predictions(path)
        assert image_id == "img"
        assert len(cells) == 2
        assert cells[1].grid == 38

    def test_invalid_cell(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.jsonl", [self._cell(objectness=2.0)])
        with pytest.raises(MalformedLine, match="invalid cell prediction") as excinfo:
            read_cell_predictions(path)
        assert excinfo.value.line_no == 1

    def test_not_json(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.jsonl", ["{not json"])
        with pytest.raises(MalformedLine):
            read_cell_predictions(path)

    def test_cell_outside_grid(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.jsonl", [self._cell(), self._cell(row=30)])
        assert len(read_cell_predictions(path)[0][1]) == 2
        with pytest.raises(MalformedLine, match="outside 19x19 grid") as excinfo:
            read_cell_predictions(path, GridSpec(size=19))
        assert excinfo.value.line_no == 2
        assert excinfo.value.path == path

    def test_box_index_beyond_grid(self, temp_dir):
        path = write_lines(Path(temp_dir) / "img.jsonl", [self._cell(box_index=3)])
        with pytest.raises(MalformedLine, match="box index 3"):
            read_cell_predictions(path, GridSpec(size=19, boxes_per_cell=3))
