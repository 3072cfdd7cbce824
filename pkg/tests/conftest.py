"""Pytest fixtures for bengali-math-solver tests."""

import tempfile
from pathlib import Path

import pytest

from bengali_math_solver.config import LayoutSpec
from bengali_math_solver.model import Box, ClassMap, GroundTruthObject
from tests.helpers import write_lines


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield tmpdir


@pytest.fixture
def class_map():
    """The default 18-class map."""
    return ClassMap.default()


@pytest.fixture
def still_layout():
    """A layout without any jitter."""
    return LayoutSpec()


@pytest.fixture
def sample_objects():
    """Ground truth for '2+3' on one line."""
    return [
        GroundTruthObject(2, Box(0.1, 0.5, 0.04, 0.08)),
        GroundTruthObject(10, Box(0.15, 0.5, 0.032, 0.04)),
        GroundTruthObject(3, Box(0.2, 0.5, 0.04, 0.08)),
    ]


@pytest.fixture
def annotation_dir(temp_dir, sample_objects):
    """Directory holding one annotation file, img_a.txt."""
    ann = Path(temp_dir) / "annotations"
    write_lines(
        ann / "img_a.txt",
        [
            f"{o.class_id} {o.box.x_center} {o.box.y_center} {o.box.width} {o.box.height}"
            for o in sample_objects
        ],
    )
    return str(ann)


@pytest.fixture
def yaml_spec_content():
    """Return sample generator YAML."""
    return """
scenes: 4
depth: 1
expressions_per_scene: [1, 2]
allow_decimals: false

layout:
  position_jitter: 0.002
  size_jitter: 0.05

noise:
  drop_prob: 0.1
  spurious_rate: 0.5
"""


@pytest.fixture
def yaml_spec_file(temp_dir, yaml_spec_content):
    """Create a YAML generator spec file."""
    path = Path(temp_dir) / "gen.yaml"
    path.write_text(yaml_spec_content)
    return str(path)
