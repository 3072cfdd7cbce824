"""Configuration for bengali-math-solver: generator specs and per-run settings."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .model import symbols_from_text

# Environment variable naming a default generator config file
CONFIG_ENV = "BENGALI_MATH_CONFIG"

SUBCOMMANDS = ("solve", "eval-map", "anchors", "gen")

INPUT_KINDS = ("detections", "cells")


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")


def _check_band(name: str, band: tuple[float, float]) -> None:
    low, high = band
    if not 0.0 <= low <= high <= 1.0:
        raise ValueError(f"{name} must satisfy 0 <= low <= high <= 1, got {band}")


def _known_keys(cls: type, data: dict[str, Any]) -> dict[str, Any]:
    """Keep only keys that are dataclass fields of *cls*."""
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValueError(f"Unknown {cls.__name__} keys: {', '.join(unknown)}")
    return dict(data)


@dataclass(frozen=True)
class LayoutSpec:
    """Geometry of a synthetic scene; every length is a fraction of the image."""

    glyph_width: float = 0.04
    glyph_height: float = 0.08
    gap: float = 0.01
    line_gap: float = 0.05
    margin: float = 0.05
    position_jitter: float = 0.0
    size_jitter: float = 0.0
    scale_jitter: float = 0.0
    shear: float = 0.0
    width_px: int = 608
    height_px: int = 608

    def __post_init__(self) -> None:
        """Validate sizes and jitter."""
        if not (0.0 < self.glyph_width <= 1.0 and 0.0 < self.glyph_height <= 1.0):
            raise ValueError("glyph size must be in (0, 1]")
        for name in ("gap", "line_gap", "margin"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("position_jitter", "size_jitter", "scale_jitter", "shear"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.scale_jitter >= 1.0:
            raise ValueError("scale_jitter must be < 1")
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("pixel dimensions must be positive")

    @property
    def pitch(self) -> float:
        """Horizontal distance between consecutive glyph centers."""
        return self.glyph_width + self.gap

    @property
    def line_pitch(self) -> float:
        """Vertical distance between consecutive line centers."""
        return self.glyph_height + self.line_gap

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LayoutSpec:
        """Create LayoutSpec from a dictionary."""
        return cls(**_known_keys(cls, data))


@dataclass(frozen=True)
class NoiseSpec:
    """Detector-noise model applied to ground truth."""

    drop_prob: float = 0.0
    spurious_rate: float = 0.0
    class_flip_prob: float = 0.0
    box_noise: float = 0.0
    tp_confidence: tuple[float, float] = (0.7, 1.0)
    fp_confidence: tuple[float, float] = (0.25, 0.6)

    def __post_init__(self) -> None:
        """Validate probabilities and confidence bands."""
        _check_probability("drop_prob", self.drop_prob)
        _check_probability("class_flip_prob", self.class_flip_prob)
        if self.spurious_rate < 0:
            raise ValueError("spurious_rate must be >= 0")
        if self.box_noise < 0:
            raise ValueError("box_noise must be >= 0")
        object.__setattr__(self, "tp_confidence", tuple(self.tp_confidence))
        object.__setattr__(self, "fp_confidence", tuple(self.fp_confidence))
        _check_band("tp_confidence", self.tp_confidence)
        _check_band("fp_confidence", self.fp_confidence)

    @property
    def is_noiseless(self) -> bool:
        """True when detections should reproduce ground truth exactly."""
        return (
            self.drop_prob == 0.0
            and self.spurious_rate == 0.0
            and self.class_flip_prob == 0.0
            and self.box_noise == 0.0
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> NoiseSpec:
        """Create NoiseSpec from a dictionary."""
        return cls(**_known_keys(cls, data))


@dataclass(frozen=True)
class GenSpec:
    """What the ``gen`` subcommand produces."""

    scenes: int = 10
    depth: int = 2
    expressions_per_scene: tuple[int, int] = (1, 3)
    allow_decimals: bool = True
    allow_brackets: bool = True
    expressions: tuple[str, ...] = ()
    layout: LayoutSpec = field(default_factory=LayoutSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self) -> None:
        """Validate counts and fixed expressions."""
        if self.scenes < 0:
            raise ValueError("scenes must be >= 0")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        object.__setattr__(self, "expressions_per_scene", tuple(self.expressions_per_scene))
        object.__setattr__(self, "expressions", tuple(self.expressions))
        low, high = self.expressions_per_scene
        if not 1 <= low <= high:
            raise ValueError("expressions_per_scene must satisfy 1 <= low <= high")
        for text in self.expressions:
            if not symbols_from_text(text):
                raise ValueError("expressions must not be empty")

    def with_overrides(self, **overrides: Any) -> GenSpec:
        """Copy with top-level, layout and noise fields replaced where given."""
        layout_keys = {f.name for f in fields(LayoutSpec)}
        noise_keys = {f.name for f in fields(NoiseSpec)}
        top: dict[str, Any] = {}
        layout: dict[str, Any] = {}
        noise: dict[str, Any] = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key in layout_keys:
                layout[key] = value
            elif key in noise_keys:
                noise[key] = value
            else:
                top[key] = value
        return replace(
            self,
            layout=replace(self.layout, **layout),
            noise=replace(self.noise, **noise),
            **top,
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GenSpec:
        """Create GenSpec from a dictionary with optional layout/noise sections."""
        data = dict(data or {})
        layout = LayoutSpec.from_dict(data.pop("layout", None) or {})
        noise = NoiseSpec.from_dict(data.pop("noise", None) or {})
        return cls(layout=layout, noise=noise, **_known_keys(cls, data))

    @classmethod
    def from_yaml_file(cls, path: str) -> GenSpec:
        """Load a generator spec from a YAML file."""
        with open(path, "r", encoding="utf-8") as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ValueError(f"Invalid YAML in {path}: {e}") from e
        if data is not None and not isinstance(data, dict):
            raise ValueError(f"Config file {path} must contain a mapping")
        return cls.from_dict(data or {})

    @classmethod
    def from_json_string(cls, json_str: str) -> GenSpec:
        """Load a generator spec from a JSON string."""
        return cls.from_dict(json.loads(json_str))


def load_gen_spec(path: str | None = None) -> GenSpec:
    """
    Load the generator spec.

    Sources in priority order:
    1. *path* (the ``--config`` flag)
    2. the BENGALI_MATH_CONFIG environment variable
    3. built-in defaults

    Raises:
        ValueError: If a named config file does not exist or is invalid.
    """
    path = path or os.getenv(CONFIG_ENV)
    if not path:
        return GenSpec()
    if not Path(path).exists():
        raise ValueError(f"Config file not found: {path}")
    return GenSpec.from_yaml_file(path)


@dataclass
class RunConfig:
    """Settings of one CLI invocation."""

    subcommand: str
    inputs: list[str] = field(default_factory=list)
    out: str | None = None
    iou_threshold: float = 0.5
    conf_threshold: float = 0.25
    nms_threshold: float = 0.45
    class_map: str | None = None
    seed: int = 0
    jobs: int = 4
    input_kind: str = "detections"
    grid_size: int = 19
    k: int = 9
    max_iters: int = 300
    expected: str | None = None

    def __post_init__(self) -> None:
        """Validate thresholds and counts."""
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(
                f"Unknown subcommand '{self.subcommand}'. Supported: {', '.join(SUBCOMMANDS)}"
            )
        for name in ("iou_threshold", "conf_threshold", "nms_threshold"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {value}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grid_size < 1:
            raise ValueError("grid_size must be >= 1")
        if self.input_kind not in INPUT_KINDS:
            raise ValueError(
                f"Unknown input kind '{self.input_kind}'. Supported: {', '.join(INPUT_KINDS)}"
            )

    def validate_paths(self) -> None:
        """
        Check input paths before any work starts.

        Raises:
            ValueError: If an input, the class-map or the expected-expressions
                file is missing.
        """
        for path in self.inputs:
            if not os.path.exists(path):
                raise ValueError(f"Input path does not exist: {path}")
        if self.expected and not os.path.exists(self.expected):
            raise ValueError(f"Expected-expressions file does not exist: {self.expected}")
        if self.class_map and not os.path.isfile(self.class_map):
            raise ValueError(f"Class-map file does not exist: {self.class_map}")
