"""Main entry point for bengali-math-solver."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from .anchors import DEFAULT_K, DEFAULT_MAX_ITERS, REFERENCE_RESOLUTION, UNIT_NORMALIZED, UNIT_PIXELS
from .annotations import read_class_map
from .batch import (
    EXIT_DOMAIN,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    cmd_anchors,
    cmd_eval_map,
    cmd_gen,
    cmd_solve,
    emit_json,
    format_accuracy,
)
from .config import INPUT_KINDS, GenSpec, RunConfig, load_gen_spec
from .errors import FormatError, MathSolverError, MissingAnnotation
from .metrics import DEFAULT_IOU_THRESHOLD, format_summary
from .model import ClassMap
from .postprocess import DEFAULT_CONF_THRESHOLD, DEFAULT_NMS_THRESHOLD
from .synthgen import REFERENCE_EXPRESSIONS

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage status instead of 2."""

    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def setup_logging(verbose: bool = False) -> None:
    """Configure logging for the application (to stderr; stdout carries JSON)."""
    # Ensure Unicode output works
    try:
        if hasattr(sys.stdout, "reconfigure"):
            sys.stdout.reconfigure(encoding="utf-8")
        if hasattr(sys.stderr, "reconfigure"):
            sys.stderr.reconfigure(encoding="utf-8")
    except Exception:
        pass

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s: %(message)s",
        datefmt="%H:%M:%S",
        stream=sys.stderr,
    )


def build_parser() -> argparse.ArgumentParser:
    """Command-line interface: solve, eval-map, anchors, gen."""
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument(
        "--iou-threshold", type=float, default=DEFAULT_IOU_THRESHOLD,
        help=f"IoU above which a detection matches (default: {DEFAULT_IOU_THRESHOLD})",
    )
    shared.add_argument(
        "--conf-threshold", type=float, default=DEFAULT_CONF_THRESHOLD,
        help=f"Minimum class-specific confidence (default: {DEFAULT_CONF_THRESHOLD})",
    )
    shared.add_argument(
        "--nms-threshold", type=float, default=DEFAULT_NMS_THRESHOLD,
        help=f"IoU above which NMS suppresses (default: {DEFAULT_NMS_THRESHOLD})",
    )
    shared.add_argument("--class-map", help="Class-map file overriding the default ids")
    shared.add_argument("--seed", type=int, default=0, help="Seed for all randomness (default: 0)")
    shared.add_argument("--jobs", type=int, default=4, help="Parallel workers (default: 4)")
    shared.add_argument("--out", "-o", help="Output file (gen: output directory)")
    shared.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    parser = _ArgumentParser(
        prog="bengali-math",
        description="Solve handwritten Bengali math from symbol detections and evaluate detectors",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_ArgumentParser)

    solve = sub.add_parser("solve", parents=[shared], help="Evaluate the expressions of each image")
    solve.add_argument("detections", help="Directory (or file) of detections")
    solve.add_argument(
        "--input-kind", choices=INPUT_KINDS, default="detections",
        help="detections: .txt detection files; cells: .jsonl raw cell predictions",
    )
    solve.add_argument("--grid-size", type=int, default=19, help="Grid size S for cell input")
    solve.add_argument(
        "--expected", metavar="META",
        help="images.meta of generated scenes: add per-category accuracy to the report",
    )

    eval_map = sub.add_parser("eval-map", parents=[shared], help="Compute per-class AP and mAP")
    eval_map.add_argument("detections", help="Directory of detection files")
    eval_map.add_argument("annotations", help="Directory of annotation files")

    anchors = sub.add_parser("anchors", parents=[shared], help="k-means anchor boxes")
    anchors.add_argument("annotations", help="Directory of annotation files")
    anchors.add_argument("--k", type=int, default=DEFAULT_K, help=f"Anchor count (default: {DEFAULT_K})")
    anchors.add_argument(
        "--max-iters", type=int, default=DEFAULT_MAX_ITERS,
        help=f"Maximum k-means iterations (default: {DEFAULT_MAX_ITERS})",
    )
    anchors.add_argument(
        "--unit", choices=(UNIT_NORMALIZED, UNIT_PIXELS), default=UNIT_NORMALIZED,
        help="Report anchors normalized or in pixels of --reference-size",
    )
    anchors.add_argument(
        "--reference-size", type=int, nargs=2, metavar=("W", "H"),
        default=list(REFERENCE_RESOLUTION),
        help="Pixel resolution for --unit pixels (default: 608 608)",
    )

    gen = sub.add_parser("gen", parents=[shared], help="Generate synthetic scenes")
    gen.add_argument("--config", "-c", help="YAML generator spec")
    gen.add_argument("--scenes", type=int, help="Number of scenes")
    gen.add_argument("--depth", type=int, help="Maximum random expression depth")
    gen.add_argument(
        "--expressions-per-scene", type=int, nargs=2, metavar=("MIN", "MAX"),
        help="Range of expression lines per scene",
    )
    gen.add_argument(
        "--expression", action="append", dest="expressions",
        help="Fixed expression to draw from (can specify multiple)",
    )
    gen.add_argument(
        "--reference-corpus", action="store_true",
        help="Draw expressions from the built-in reference examples",
    )
    gen.add_argument("--noise-drop", type=float, help="Probability a true object is omitted")
    gen.add_argument("--noise-spurious", type=float, help="Expected false boxes per image")
    gen.add_argument("--noise-flip", type=float, help="Probability a class is replaced")
    gen.add_argument("--noise-box", type=float, help="Localization noise sigma (relative)")
    gen.add_argument("--position-jitter", type=float, help="Glyph position sigma")
    gen.add_argument("--size-jitter", type=float, help="Glyph size sigma (relative)")
    gen.add_argument("--scale-jitter", type=float, help="Scene x/y scale range (relative)")
    gen.add_argument("--shear", type=float, help="Maximum per-line baseline slope")
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    inputs = [
        getattr(args, name)
        for name in ("detections", "annotations")
        if getattr(args, name, None) is not None
    ]
    return RunConfig(
        subcommand=args.subcommand,
        inputs=inputs,
        out=args.out,
        iou_threshold=args.iou_threshold,
        conf_threshold=args.conf_threshold,
        nms_threshold=args.nms_threshold,
        class_map=args.class_map,
        seed=args.seed,
        jobs=args.jobs,
        input_kind=getattr(args, "input_kind", "detections"),
        grid_size=getattr(args, "grid_size", 19),
        k=getattr(args, "k", DEFAULT_K),
        max_iters=getattr(args, "max_iters", DEFAULT_MAX_ITERS),
        expected=getattr(args, "expected", None),
    )


def _gen_spec(args: argparse.Namespace) -> GenSpec:
    spec = load_gen_spec(args.config)
    expressions = args.expressions
    if args.reference_corpus:
        expressions = [e for group in REFERENCE_EXPRESSIONS.values() for e in group]
    return spec.with_overrides(
        scenes=args.scenes,
        depth=args.depth,
        expressions_per_scene=tuple(args.expressions_per_scene) if args.expressions_per_scene else None,
        expressions=tuple(expressions) if expressions else None,
        drop_prob=args.noise_drop,
        spurious_rate=args.noise_spurious,
        class_flip_prob=args.noise_flip,
        box_noise=args.noise_box,
        position_jitter=args.position_jitter,
        size_jitter=args.size_jitter,
        scale_jitter=args.scale_jitter,
        shear=args.shear,
    )


def _dispatch(
    args: argparse.Namespace,
    config: RunConfig,
    class_map: ClassMap,
    spec: GenSpec | None = None,
) -> int:
    if config.subcommand == "solve":
        report, status = cmd_solve(config, class_map)
        emit_json(report, config.out)
        if "accuracy" in report:
            print(format_accuracy(report["accuracy"]), file=sys.stderr)
        return status

    if config.subcommand == "eval-map":
        report = cmd_eval_map(config)
        emit_json(report.to_dict(), config.out)
        print(format_summary(report, class_map), file=sys.stderr)
        return EXIT_OK

    if config.subcommand == "anchors":
        anchors = cmd_anchors(config, args.unit, tuple(args.reference_size))
        print(anchors.darknet_line(), file=sys.stderr)
        emit_json(anchors.to_dict(), config.out)
        return EXIT_OK

    count = cmd_gen(config, spec or GenSpec(), class_map)
    print(f"Generated {count} scenes in {config.out}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.verbose)

    # Load configuration
    try:
        config = _run_config(args)
        config.validate_paths()
        if config.subcommand == "gen" and not config.out:
            raise ValueError("gen requires --out <directory>")
        class_map = read_class_map(config.class_map) if config.class_map else ClassMap.default()
        spec = _gen_spec(args) if config.subcommand == "gen" else None
    except ValueError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_USAGE

    try:
        return _dispatch(args, config, class_map, spec)
    except (FormatError, MissingAnnotation) as e:
        logger.error("Input error: %s", e)
        return EXIT_IO
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_IO
    except MathSolverError as e:
        logger.error("%s", e)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
