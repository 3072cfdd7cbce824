"""Synthetic annotated scenes and detector noise for testing the pipeline."""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .annotations import format_annotations, format_detections
from .config import GenSpec, LayoutSpec, NoiseSpec
from .errors import DoesNotFit, FormatError
from .model import (
    NUM_CLASSES,
    SYMBOL_TEXT,
    ClassMap,
    Detection,
    GroundTruthObject,
    Scene,
    clamped_box,
    symbols_from_text,
)
from .utils import atomic_write_text, nfc

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1

# Example expressions per category of the published evaluation set
REFERENCE_EXPRESSIONS: dict[str, tuple[str, ...]] = {
    "single_digit_single_operator": ("2+3",),
    "single_digit_multiple_operators": ("3-1*2",),
    "single_digit_brackets": ("(3+7+5)/4",),
    "double_digit_single_operator": ("21-15",),
    "double_digit_brackets": ("(42-47)/7",),
    "decimal_point": ("(2.54+5.55)*2",),
    "multiple_expressions": ("(2+7-5)*33.2", "9+4-2", "(3+4-5)/(6+7)"),
}

# (width, height, vertical offset) of each glyph kind relative to the glyph cell
_GLYPH_SHAPES = {
    "digit": (1.0, 1.0, 0.0),
    "operator": (0.8, 0.5, 0.0),
    "bracket": (0.5, 1.0, 0.0),
    # a dot sits low but its center stays inside an operator's vertical extent
    "dot": (0.3, 0.25, 0.2),
}

_OPERATORS = "+-*/"

CATEGORY_OTHER = "other"

_NUMBER = re.compile(r"\d+(?:\.\d+)?")

META_FILE = "images.meta"
ANNOTATIONS_DIR = "annotations"
DETECTIONS_DIR = "detections"


def mix_seed(base: int, index: int) -> int:
    """
    Derive a per-item seed: splitmix64 of ``base + (index + 1) * golden``.

    Both arguments are reduced modulo 2**64; the result is a 64-bit
    unsigned integer.
    """
    z = (base + (index + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _glyph_shape(symbol: str) -> tuple[float, float, float]:
    if symbol == "dot":
        return _GLYPH_SHAPES["dot"]
    if symbol[1:].isdigit():
        return _GLYPH_SHAPES["digit"]
    if symbol in ("lbr", "rbr"):
        return _GLYPH_SHAPES["bracket"]
    return _GLYPH_SHAPES["operator"]


def max_symbols_per_line(spec: LayoutSpec) -> int:
    """How many glyphs fit on one line."""
    return int((1.0 - 2 * spec.margin + spec.gap) / spec.pitch + 1e-9)


def max_lines(spec: LayoutSpec) -> int:
    """How many lines fit on one image."""
    return int((1.0 - 2 * spec.margin + spec.line_gap) / spec.line_pitch + 1e-9)


def layout_scene(
    expressions: Sequence[str],
    spec: LayoutSpec,
    seed: int | np.random.Generator = 0,
    image_id: str = "scene",
    class_map: ClassMap | None = None,
) -> Scene:
    """
    Lay expressions out as stacked horizontal lines of ground-truth boxes.

    Jitter covers per-glyph position and size noise, independent x/y
    scaling of the whole scene and a per-line baseline shear. Boxes are
    clamped into the image after jitter.

    Raises:
        DoesNotFit: If the unjittered layout exceeds the image.
        ValueError: If an expression contains an unknown symbol.
    """
    class_map = class_map or ClassMap.default()
    rng = _rng(seed)
    lines = [symbols_from_text(text) for text in expressions]

    longest = max((len(symbols) for symbols in lines), default=0)
    if longest > max_symbols_per_line(spec):
        raise DoesNotFit(
            f"{longest} symbols need width "
            f"{2 * spec.margin + longest * spec.pitch - spec.gap:.3f} > 1"
        )
    if len(lines) > max_lines(spec):
        raise DoesNotFit(
            f"{len(lines)} lines need height "
            f"{2 * spec.margin + len(lines) * spec.line_pitch - spec.line_gap:.3f} > 1"
        )

    scale_x = 1.0 + rng.uniform(-spec.scale_jitter, spec.scale_jitter)
    scale_y = 1.0 + rng.uniform(-spec.scale_jitter, spec.scale_jitter)
    x0 = spec.margin + spec.glyph_width / 2
    y0 = spec.margin + spec.glyph_height / 2

    objects: list[GroundTruthObject] = []
    for line_index, symbols in enumerate(lines):
        slope = rng.uniform(-spec.shear, spec.shear)
        y_line = y0 + line_index * spec.line_pitch
        for pos, symbol in enumerate(symbols):
            rel_w, rel_h, rel_dy = _glyph_shape(symbol)
            dx_line = pos * spec.pitch
            x = x0 + dx_line
            y = y_line + rel_dy * spec.glyph_height + slope * dx_line
            w = spec.glyph_width * rel_w
            h = spec.glyph_height * rel_h

            x = spec.margin + (x - spec.margin) * scale_x + rng.normal(0.0, spec.position_jitter)
            y = spec.margin + (y - spec.margin) * scale_y + rng.normal(0.0, spec.position_jitter)
            w *= scale_x * max(0.2, 1.0 + rng.normal(0.0, spec.size_jitter))
            h *= scale_y * max(0.2, 1.0 + rng.normal(0.0, spec.size_jitter))

            objects.append(
                GroundTruthObject(class_map.class_id(symbol), clamped_box(x, y, w, h))
            )

    return Scene(
        image_id=image_id,
        width_px=spec.width_px,
        height_px=spec.height_px,
        objects=tuple(objects),
    )


def perturb(
    scene: Scene,
    noise: NoiseSpec,
    seed: int | np.random.Generator = 0,
) -> list[Detection]:
    """
    Simulate detector output for a ground-truth scene.

    Each object is dropped with ``drop_prob``; survivors get localization
    noise, a possible class flip and a confidence from the TP band.
    Poisson(``spurious_rate``) false boxes are then added with
    FP-band confidences. A noiseless spec reproduces the ground truth
    with confidence 1.0.
    """
    rng = _rng(seed)
    noiseless = noise.is_noiseless
    detections: list[Detection] = []

    for obj in scene.objects:
        dropped = rng.random() < noise.drop_prob
        flipped = rng.random() < noise.class_flip_prob
        flip_offset = int(rng.integers(1, NUM_CLASSES))
        jitter = rng.normal(0.0, noise.box_noise, size=4)
        confidence = float(rng.uniform(*noise.tp_confidence))
        if dropped:
            continue

        box = obj.box
        if noise.box_noise > 0:
            box = clamped_box(
                box.x_center + jitter[0] * box.width,
                box.y_center + jitter[1] * box.height,
                box.width * max(0.2, 1.0 + jitter[2]),
                box.height * max(0.2, 1.0 + jitter[3]),
            )
        class_id = (obj.class_id + flip_offset) % NUM_CLASSES if flipped else obj.class_id
        detections.append(Detection(class_id, box, 1.0 if noiseless else confidence))

    if noise.spurious_rate > 0:
        sizes = [(o.box.width, o.box.height) for o in scene.objects] or [(0.04, 0.08)]
        for _ in range(int(rng.poisson(noise.spurious_rate))):
            w, h = sizes[int(rng.integers(len(sizes)))]
            box = clamped_box(
                float(rng.uniform(w / 2, 1.0 - w / 2)),
                float(rng.uniform(h / 2, 1.0 - h / 2)),
                w,
                h,
            )
            detections.append(
                Detection(
                    int(rng.integers(NUM_CLASSES)),
                    box,
                    float(rng.uniform(*noise.fp_confidence)),
                )
            )
    return detections


def _random_number(rng: np.random.Generator, allow_decimals: bool) -> str:
    high = 100 if rng.random() < 0.5 else 10
    whole = int(rng.integers(0, high))
    if allow_decimals and rng.random() < 0.3:
        places = int(rng.integers(1, 3))
        frac = int(rng.integers(0, 10 ** places))
        return f"{whole}.{frac:0{places}d}"
    return str(whole)


def _random_operand(
    rng: np.random.Generator, depth: int, allow_decimals: bool, allow_brackets: bool
) -> str:
    if depth < 1 or rng.random() < 0.3:
        return _random_number(rng, allow_decimals)
    sub = _random_tree(rng, int(rng.integers(1, depth + 1)), allow_decimals, allow_brackets)
    if allow_brackets and rng.random() < 0.6:
        return f"({sub})"
    return sub


def _random_tree(
    rng: np.random.Generator, depth: int, allow_decimals: bool, allow_brackets: bool
) -> str:
    op = _OPERATORS[int(rng.integers(len(_OPERATORS)))]
    if depth <= 1:
        return f"{_random_number(rng, allow_decimals)}{op}{_random_number(rng, allow_decimals)}"
    left = _random_operand(rng, depth - 1, allow_decimals, allow_brackets)
    right = _random_operand(rng, depth - 1, allow_decimals, allow_brackets)
    return f"{left}{op}{right}"


def random_expression(
    depth: int = 1,
    allow_decimals: bool = False,
    allow_brackets: bool = False,
    seed: int | np.random.Generator = 0,
) -> str:
    """
    A well-formed expression in canonical ASCII.

    Depth 1 is one operator between two numbers; each further level lets
    operands be sub-expressions (bracketed when *allow_brackets*).
    Division by a zero-valued divisor is possible.
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    return _random_tree(_rng(seed), depth, allow_decimals, allow_brackets)


def sample_box_sizes(
    sizes: Sequence[tuple[float, float]],
    count: int,
    jitter: float = 0.01,
    seed: int | np.random.Generator = 0,
) -> list[tuple[float, float]]:
    """
    *count* (w, h) pairs drawn round-robin from *sizes*.

    Each dimension is scaled independently by a uniform factor in
    [1 - jitter, 1 + jitter].
    """
    rng = _rng(seed)
    base = np.asarray(sizes, dtype=float).reshape(-1, 2)
    picked = base[np.arange(count) % len(base)]
    factors = rng.uniform(1.0 - jitter, 1.0 + jitter, size=(count, 2))
    return [(float(w), float(h)) for w, h in picked * factors]


@dataclass(frozen=True)
class GeneratedScene:
    """A ground-truth scene, its source expressions and simulated detections."""

    scene: Scene
    expressions: tuple[str, ...]
    detections: tuple[Detection, ...]


def _pick_expressions(spec: GenSpec, rng: np.random.Generator) -> list[str]:
    low, high = spec.expressions_per_scene
    count = min(int(rng.integers(low, high + 1)), max_lines(spec.layout))
    if spec.expressions:
        picks = rng.integers(len(spec.expressions), size=count)
        return [spec.expressions[int(i)] for i in picks]

    limit = max_symbols_per_line(spec.layout)
    texts = []
    for _ in range(count):
        for _attempt in range(100):
            depth = int(rng.integers(1, spec.depth + 1))
            text = random_expression(depth, spec.allow_decimals, spec.allow_brackets, rng)
            if len(text) <= limit:
                break
        else:
            raise DoesNotFit(f"could not generate an expression of at most {limit} symbols")
        texts.append(text)
    return texts


def generate_scenes(
    spec: GenSpec,
    seed: int = 0,
    class_map: ClassMap | None = None,
) -> list[GeneratedScene]:
    """Generate ``spec.scenes`` scenes; scene i uses ``mix_seed(seed, i)``."""
    generated = []
    for index in range(spec.scenes):
        scene_seed = mix_seed(seed, index)
        rng = np.random.default_rng(scene_seed)
        texts = _pick_expressions(spec, rng)
        scene = layout_scene(texts, spec.layout, rng, image_id=f"scene_{index:05d}", class_map=class_map)
        detections = perturb(scene, spec.noise, mix_seed(scene_seed, 0))
        generated.append(GeneratedScene(scene, tuple(texts), tuple(detections)))
    logger.info("Generated %d scenes", len(generated))
    return generated


def write_scene_directory(
    out_dir: str | os.PathLike[str],
    scenes: Sequence[GeneratedScene],
    seed: int = 0,
) -> None:
    """
    Write ``images.meta`` plus ``annotations/<id>.txt`` and ``detections/<id>.txt``.

    Output bytes depend only on the scenes and the seed.
    """
    out_dir = os.fspath(out_dir)
    meta = {
        "schema_version": 1,
        "seed": seed,
        "scenes": [
            {
                "image_id": g.scene.image_id,
                "width_px": g.scene.width_px,
                "height_px": g.scene.height_px,
                "expressions": list(g.expressions),
                "objects": len(g.scene.objects),
                "detections": len(g.detections),
            }
            for g in scenes
        ],
    }
    for g in scenes:
        image_id = g.scene.image_id
        atomic_write_text(
            os.path.join(out_dir, ANNOTATIONS_DIR, f"{image_id}.txt"),
            format_annotations(g.scene.objects),
        )
        atomic_write_text(
            os.path.join(out_dir, DETECTIONS_DIR, f"{image_id}.txt"),
            format_detections(g.detections),
        )
    atomic_write_text(os.path.join(out_dir, META_FILE), json.dumps(meta, indent=2) + "\n")


def expression_category(texts: Sequence[str]) -> str:
    """
    Structural category of the expressions of one scene.

    Names match the keys of REFERENCE_EXPRESSIONS: several lines make
    ``multiple_expressions``; for a single line a decimal point decides
    first, then multi-digit numbers, then brackets and the operator count.
    Anything else is ``other``.

    Raises:
        ValueError: If an expression contains an unknown symbol.
    """
    if len(texts) > 1:
        return "multiple_expressions"
    if not texts:
        return CATEGORY_OTHER
    text = "".join(SYMBOL_TEXT[s] for s in symbols_from_text(texts[0]))
    numbers = _NUMBER.findall(text)
    operators = sum(text.count(op) for op in _OPERATORS)
    brackets = "(" in text
    if any("." in n for n in numbers):
        return "decimal_point"
    if any(len(n) > 1 for n in numbers):
        if brackets:
            return "double_digit_brackets"
        return "double_digit_single_operator" if operators == 1 else CATEGORY_OTHER
    if brackets:
        return "single_digit_brackets"
    if operators == 1:
        return "single_digit_single_operator"
    if operators > 1:
        return "single_digit_multiple_operators"
    return CATEGORY_OTHER


def read_scene_meta(path: str | os.PathLike[str]) -> dict[str, tuple[str, ...]]:
    """
    Expected expressions per image id, top line first, from ``images.meta``.

    *path* is the meta file or the scene directory holding it.

    Raises:
        FormatError: If the file is not a scene index or names an unknown symbol.
    """
    path = os.fspath(path)
    if os.path.isdir(path):
        path = os.path.join(path, META_FILE)
    with open(path, "r", encoding="utf-8") as f:
        try:
            meta = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    try:
        expected = {
            nfc(str(scene["image_id"])): tuple(str(text) for text in scene["expressions"])
            for scene in meta["scenes"]
        }
        for texts in expected.values():
            for text in texts:
                symbols_from_text(text)
    except (KeyError, TypeError) as e:
        raise FormatError(f"not a scene index: missing or invalid {e}", path) from None
    except ValueError as e:
        raise FormatError(str(e), path) from None
    return expected
