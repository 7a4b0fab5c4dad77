#!/usr/bin/env python3
"""
Demo Run Script for tasdiff

Runs every command once on a small synthetic dataset: gen-data, train,
infer (fixed and adaptive), eval and bench. Useful for checking an install
or a configuration change end to end before launching a long run.

Usage:
    python scripts/demo_run.py [OPTIONS]

Examples:
    # Quick run with the built-in small settings
    python scripts/demo_run.py

    # Use a config file and keep the outputs somewhere specific
    python scripts/demo_run.py --config config/tasdiff.example.yaml --out runs/demo

    # Longer training, verbose logging
    python scripts/demo_run.py --steps 500 --verbose
"""

import argparse
import json
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, Optional

# Add the src directory to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from tasdiff.config.loader import ConfigLoader, load_config
from tasdiff.config.schema import RunConfig
from tasdiff.core.pipeline import SegmentationPipeline
from tasdiff.utils.logging import get_logger, setup_logging


DEMO_SETTINGS: Dict[str, Any] = {
    "encoder": {"input_dim": 8, "hidden": 16, "num_layers": 4},
    "decoder": {"num_blocks": 2},
    "diffusion": {"steps": 200},
    "sampler": {"total_steps": 200, "delta_init": 10},
    "dataset": {
        "num_videos": 4,
        "eval_videos": 1,
        "length_min": 64,
        "length_max": 96,
        "num_classes": 4,
        "feature_dim": 8,
        "min_segment": 6,
        "max_segment": 20,
    },
    "augmentation": {"rate": 2, "median_window": 5},
    "training": {"steps": 150, "log_every": 25, "checkpoint_every": 50, "lr": 2e-3},
    "bench": {"repetitions": 1, "step_budgets": [5, 10], "rank_length": 32, "rank_hidden": 16, "rank_layers": 4},
}


class DemoRunner:
    """Run each pipeline command in order and collect a short report."""

    def __init__(self, config: RunConfig, out_dir: Path, verbose: bool = False):
        self.config = config
        self.out_dir = out_dir
        self.verbose = verbose
        self.pipeline = SegmentationPipeline(config)
        self.logger = get_logger("DemoRunner")
        self.results: Dict[str, Any] = {
            "started_at": datetime.now().isoformat(),
            "out_dir": str(out_dir),
            "stages": [],
        }

    def _print_header(self):
        print("\n🧪 tasdiff demo run")
        print("=" * 50)
        print(f"Output: {self.out_dir}")
        print(f"Seed: {self.config.seed}, diffusion steps: {self.config.diffusion.steps}")

    def _stage(self, name: str, action: Callable[[], str]) -> bool:
        print(f"\n▶️  {name}")
        started = time.perf_counter()
        try:
            detail = action()
        except Exception as e:
            elapsed = time.perf_counter() - started
            print(f"   ❌ {type(e).__name__}: {e}")
            self.logger.error("Demo stage failed", stage=name, error=str(e))
            self.results["stages"].append({"stage": name, "ok": False, "seconds": elapsed, "error": str(e)})
            return False
        elapsed = time.perf_counter() - started
        print(f"   ✅ {detail} ({elapsed:.1f}s)")
        self.results["stages"].append({"stage": name, "ok": True, "seconds": elapsed, "detail": detail})
        return True

    def run(self) -> bool:
        self._print_header()
        data = self.out_dir / "data"
        model = self.out_dir / "model"
        checkpoint = model / "checkpoint.npz"

        def gen_data() -> str:
            result = self.pipeline.gen_data(data)
            return f"{result.videos} videos written"

        def train() -> str:
            result = self.pipeline.train(data, model, progress=self.verbose)
            return f"loss {result.initial_loss:.4f} -> {result.final_loss:.4f} over {result.end_step} steps"

        def infer(strategy: str) -> Callable[[], str]:
            def action() -> str:
                result = self.pipeline.infer(checkpoint, data, self.out_dir / f"infer_{strategy}", strategy=strategy)
                return f"{len(result.predictions)} videos, {result.denoiser_calls} denoiser calls"
            return action

        def evaluate(strategy: str) -> Callable[[], str]:
            def action() -> str:
                pred = self.out_dir / f"infer_{strategy}"
                result = self.pipeline.evaluate(pred, data, pred / "scores")
                if result.mean is None:
                    return f"no videos scored, {len(result.errors)} errors"
                return f"acc {result.mean.acc:.1f}, edit {result.mean.edit:.1f}, F1@50 {result.mean.f1_50:.1f}"
            return action

        def bench() -> str:
            report = self.pipeline.bench(checkpoint, data, self.out_dir / "bench").report
            return (f"calls fixed {report.mean_calls('fixed'):.1f} / adaptive {report.mean_calls('adaptive'):.1f}, "
                    f"max metric gap {report.max_metric_gap:.2f}")

        stages = [
            ("Generate synthetic data", gen_data),
            ("Train", train),
            ("Infer (fixed)", infer("fixed")),
            ("Evaluate (fixed)", evaluate("fixed")),
            ("Infer (adaptive)", infer("adaptive")),
            ("Evaluate (adaptive)", evaluate("adaptive")),
            ("Bench", bench),
        ]
        for name, action in stages:
            if not self._stage(name, action):
                break

        passed = sum(1 for stage in self.results["stages"] if stage["ok"])
        self.results["summary"] = {"total": len(stages), "passed": passed}
        print("\n" + "=" * 50)
        print(f"📊 {passed}/{len(stages)} stages completed")
        return passed == len(stages)

    def save_report(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.results, indent=2))
        print(f"📄 Report: {path}")


def build_config(config_path: Optional[Path], steps: Optional[int]) -> RunConfig:
    overrides = [f"training.steps={steps}"] if steps is not None else []
    if config_path is not None:
        return load_config(config_path, overrides)
    config = ConfigLoader().load_from_dict(DEMO_SETTINGS)
    if overrides:
        config = ConfigLoader().apply_overrides(config, overrides)
    return config


def main():
    parser = argparse.ArgumentParser(description="Run every tasdiff command on a small synthetic dataset")
    parser.add_argument("--config", type=Path, help="YAML or JSON run configuration (default: built-in demo settings)")
    parser.add_argument("--out", type=Path, default=Path("runs/demo"), help="Output directory")
    parser.add_argument("--steps", type=int, help="Override training.steps")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging and a training progress bar")
    args = parser.parse_args()

    setup_logging(log_level="DEBUG" if args.verbose else "WARNING")

    try:
        config = build_config(args.config, args.steps)
    except Exception as e:
        print(f"❌ Invalid configuration: {e}")
        sys.exit(2)

    runner = DemoRunner(config, args.out, verbose=args.verbose)
    ok = runner.run()
    runner.save_report(args.out / "demo_report.json")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
