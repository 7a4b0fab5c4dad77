"""Command-line entry point.

Usage:
    python -m src.tasdiff.main [GLOBAL OPTIONS] <command> [OPTIONS]

Examples:
    # Generate the synthetic dataset
    python -m src.tasdiff.main --config config/tasdiff.example.yaml --out runs/data gen-data

    # Train, then sample the eval split with the adaptive schedule
    python -m src.tasdiff.main --out runs/model train --data runs/data
    python -m src.tasdiff.main --out runs/infer infer --checkpoint runs/model/checkpoint.npz --data runs/data --sampler adaptive --svg

    # Score predictions and compare fixed against adaptive sampling
    python -m src.tasdiff.main --out runs/eval eval --pred runs/infer --data runs/data
    python -m src.tasdiff.main --out runs/bench bench --checkpoint runs/model/checkpoint.npz --data runs/data
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .autodiff import AutodiffError
from .config.loader import ConfigLoader, ConfigurationError, load_config
from .core.checkpoint import CheckpointError
from .core.pipeline import SegmentationPipeline
from .data.models import DatasetError
from .diffusion.schedule import DiffusionError
from .evaluation.metrics import MetricsError
from .utils.logging import get_logger, setup_logging


EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID = 2

DOMAIN_ERRORS = (
    ConfigurationError,
    DatasetError,
    DiffusionError,
    CheckpointError,
    MetricsError,
    AutodiffError,
)

SPLIT_CHOICES = ["train", "eval", "all"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tasdiff",
        description="Diffusion-based temporal action segmentation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--config", type=Path, help="YAML or JSON run configuration")
    parser.add_argument("--seed", type=int, help="Seed for model, sampling and synthetic data")
    parser.add_argument("--out", type=Path, default=Path("runs"), help="Output directory (default: runs)")
    parser.add_argument("--log-level", help="Override logging.level (DEBUG, INFO, ...)")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override one configuration value; may be repeated",
    )

    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("gen-data", help="Write the synthetic dataset to --out")

    train = commands.add_parser("train", help="Train a segmenter on the train split")
    train.add_argument("--data", type=Path, required=True, help="Dataset directory")
    train.add_argument("--resume", type=Path, help="Checkpoint to continue from")
    train.add_argument("--steps", type=int, help="Optimizer steps (default: training.steps)")
    train.add_argument("--progress", action="store_true", help="Show a progress bar")

    infer = commands.add_parser("infer", help="Predict frame labels with a trained checkpoint")
    infer.add_argument("--checkpoint", type=Path, required=True)
    infer.add_argument("--data", type=Path, required=True)
    infer.add_argument("--sampler", choices=["fixed", "adaptive"], default="fixed")
    infer.add_argument("--augment", choices=["on", "off"], help="Default: augmentation.inference")
    infer.add_argument("--svg", action="store_true", help="Write a timeline SVG per video")
    infer.add_argument("--split", choices=SPLIT_CHOICES, help="Default: eval, or every video when empty")

    evaluate = commands.add_parser("eval", help="Score predictions against ground truth")
    evaluate.add_argument("--pred", type=Path, required=True, help="Directory written by infer")
    evaluate.add_argument("--data", type=Path, required=True)
    evaluate.add_argument("--split", choices=SPLIT_CHOICES)

    bench = commands.add_parser("bench", help="Compare fixed and adaptive sampling")
    bench.add_argument("--checkpoint", type=Path, required=True)
    bench.add_argument("--data", type=Path, required=True)
    bench.add_argument("--split", choices=SPLIT_CHOICES)
    bench.add_argument("--augment", choices=["on", "off"], default="off",
                       help="Sample sub-sequences; calls are then reported per sampling run")

    return parser


def _overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides += [f"seed={args.seed}", f"dataset.seed={args.seed}"]
    if args.log_level:
        overrides.append(f"logging.level={args.log_level}")
    return overrides


def run_command(pipeline: SegmentationPipeline, args: argparse.Namespace) -> None:
    if args.command == "gen-data":
        result = pipeline.gen_data(args.out)
        print(f"✅ Wrote {result.videos} videos ({len(result.files)} files) to {result.out_dir}")

    elif args.command == "train":
        result = pipeline.train(args.data, args.out, resume=args.resume, steps=args.steps, progress=args.progress)
        print(f"✅ Trained steps {result.start_step}..{result.end_step}: "
              f"loss {result.initial_loss:.4f} -> {result.final_loss:.4f}")
        print(f"📄 Checkpoint: {result.checkpoint_path}")
        print(f"📄 Loss log: {result.loss_log_path} ({result.logged_rows} rows)")

    elif args.command == "infer":
        augment = None if args.augment is None else args.augment == "on"
        result = pipeline.infer(
            args.checkpoint,
            args.data,
            args.out,
            strategy=args.sampler,
            augment=augment,
            svg=args.svg,
            split=args.split,
        )
        print(f"✅ Predicted {len(result.predictions)} videos with {result.denoiser_calls} denoiser calls")
        print(f"📄 Predictions: {result.predictions_dir}")

    elif args.command == "eval":
        result = pipeline.evaluate(args.pred, args.data, args.out, split=args.split)
        if result.mean is not None:
            print(f"✅ Mean over {len(result.bundles)} videos: " + ", ".join(
                f"{key}={value:.2f}" for key, value in result.mean.as_dict().items()
            ))
        for video_id, error in result.errors.items():
            print(f"❌ {video_id}: {error}")
        print(f"📄 Metrics: {result.metrics_path}")

    elif args.command == "bench":
        result = pipeline.bench(args.checkpoint, args.data, args.out, split=args.split, augment=args.augment == "on")
        report = result.report
        print(f"✅ Denoiser calls: fixed {report.mean_calls('fixed'):.1f}, adaptive {report.mean_calls('adaptive'):.1f} "
              f"({report.call_reduction_pct:.1f}% fewer)")
        print(f"📄 Comparison: {result.comparison_path}")
        print(f"📄 Summary: {result.summary_path}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config = load_config(args.config, _overrides(args))
    except ConfigurationError as e:
        print(f"❌ Invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID

    setup_logging(config.logging.level, config.logging.format, config.logging.file)
    logger = get_logger("main")
    for warning in ConfigLoader().validate_config(config):
        logger.warning("Configuration warning", warning=warning)
    logger.info("Command started", command=args.command, seed=config.seed, out=str(args.out))

    try:
        run_command(SegmentationPipeline(config), args)
    except DOMAIN_ERRORS as e:
        logger.error("Command rejected", command=args.command, error=str(e), error_type=type(e).__name__)
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        logger.exception("Command crashed", command=args.command)
        print(f"Application failed with error: {e}", file=sys.stderr)
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
