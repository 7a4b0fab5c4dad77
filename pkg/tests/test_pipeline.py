"""End-to-end tests for the pipeline commands and the CLI entry point."""

import sys
import os
import json
import math
import shutil
import xml.etree.ElementTree as ET
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from tasdiff import main as cli
from tasdiff.autodiff import Adam
from tasdiff.config import ConfigLoader, ConfigurationError
from tasdiff.core import (
    BENCH_COLUMNS,
    METRICS_CSV_COLUMNS,
    TRAJECTORY_CSV_COLUMNS,
    CheckpointError,
    SegmentationPipeline,
    load_checkpoint,
)
from tasdiff.core.pipeline import INFERENCE_SUMMARY_COLUMNS, MEAN_ROW_ID
from tasdiff.data import DatasetError, load_dataset, read_labels, write_labels
from tasdiff.diffusion import LOSS_LOG_COLUMNS, Trainer, TrainingError
from tasdiff.utils.logging import setup_logging, get_logger


pytestmark = pytest.mark.integration


@pytest.fixture(scope="module")
def run(config_factory, tmp_path_factory):
    """Synthetic data and a briefly trained checkpoint shared by the command tests."""
    root = tmp_path_factory.mktemp("run")
    config = config_factory(augmentation={"rate": 2, "median_window": 3, "inference": False})
    pipeline = SegmentationPipeline(config)
    generated = pipeline.gen_data(root / "data")
    trained = pipeline.train(root / "data", root / "model")
    return SimpleNamespace(root=root, config=config, pipeline=pipeline, generated=generated, trained=trained)


def test_gen_data(run):
    setup_logging(log_level="INFO")
    logger = get_logger("test_gen_data")

    assert run.generated.videos == 3
    assert len(run.generated.files) == 8
    videos, mapping = load_dataset(run.root / "data")
    assert [v.split for v in videos] == ["train", "train", "eval"]
    assert len(mapping) == 3

    logger.info("✅ Dataset generation test passed")


def test_train_outputs(run):
    assert run.trained.checkpoint_path.exists()
    assert (run.trained.start_step, run.trained.end_step) == (0, 4)
    log = pd.read_csv(run.trained.loss_log_path)
    assert list(log.columns) == LOSS_LOG_COLUMNS
    assert list(log["step"]) == [2, 4]
    assert run.trained.logged_rows == 2


def test_resume_continues_step_count(run, tmp_path):
    resumed = run.pipeline.train(run.root / "data", tmp_path, resume=run.trained.checkpoint_path, steps=2)
    assert (resumed.start_step, resumed.end_step) == (4, 6)
    assert list(pd.read_csv(resumed.loss_log_path)["step"]) == [6]


def test_training_abort_keeps_checkpoint_and_log(run, tmp_path, mocker):
    mocker.patch.object(Trainer, "_batch_step", side_effect=TrainingError("Non-finite loss at step 0"))
    with pytest.raises(TrainingError):
        run.pipeline.train(run.root / "data", tmp_path)
    assert (tmp_path / "checkpoint.npz").exists()
    assert list(pd.read_csv(tmp_path / "loss_log.csv").columns) == LOSS_LOG_COLUMNS


def test_training_divergence_keeps_last_good_checkpoint(run, tmp_path, mocker):
    original = Adam.step

    def step_then_poison(optimizer):
        original(optimizer)
        if optimizer.step_count == 5:
            optimizer.params["encoder.input_proj.weight"].data[0, 0] = np.nan

    mocker.patch.object(Adam, "step", autospec=True, side_effect=step_then_poison)
    with pytest.raises(TrainingError):
        run.pipeline.train(run.root / "data", tmp_path, steps=6)

    checkpoint = load_checkpoint(tmp_path / "checkpoint.npz")
    assert checkpoint.step == 4
    for name, value in checkpoint.params.items():
        assert np.isfinite(value).all(), name
    assert list(pd.read_csv(tmp_path / "loss_log.csv")["step"]) == [2, 4]


def test_resume_saves_the_active_config(run, config_factory, tmp_path):
    training = {"steps": 4, "log_every": 2, "checkpoint_every": 2, "lr": 1e-3}
    pipeline = SegmentationPipeline(config_factory(training=training, seed=11))
    pipeline.train(run.root / "data", tmp_path, resume=run.trained.checkpoint_path, steps=2)

    checkpoint = load_checkpoint(tmp_path / "checkpoint.npz")
    assert checkpoint.step == 6
    assert checkpoint.config.training.lr == 1e-3
    assert checkpoint.config.seed == 11
    assert checkpoint.config.encoder == run.config.encoder


def test_infer_fixed_with_timeline(run, tmp_path):
    result = run.pipeline.infer(run.trained.checkpoint_path, run.root / "data", tmp_path, svg=True)

    assert list(result.predictions) == ["video_002"]
    videos, mapping = load_dataset(run.root / "data", split="eval")
    labels = read_labels(result.predictions_dir / "video_002.txt", expected_length=videos[0].length)
    assert set(labels) <= set(mapping.names)

    trajectory = pd.read_csv(result.trajectory_path)
    assert list(trajectory.columns) == TRAJECTORY_CSV_COLUMNS
    assert len(trajectory) == math.ceil(100 / 10)
    assert list(trajectory["s"])[-1] == 0

    summary = pd.read_csv(result.summary_path)
    assert list(summary.columns) == INFERENCE_SUMMARY_COLUMNS
    assert summary.loc[0, "denoiser_calls"] == 10
    assert summary.loc[0, "frames"] == videos[0].length

    svg = ET.parse(result.svg_paths[0]).getroot()
    ids = {element.get("id") for element in svg.iter() if element.get("id", "").startswith("segment-")}
    assert {"segment-gt-0", "segment-pred-0"} <= ids


def test_infer_adaptive_with_augmentation(run, tmp_path):
    result = run.pipeline.infer(
        run.trained.checkpoint_path, run.root / "data", tmp_path, strategy="adaptive", augment=True, split="all"
    )
    assert len(result.predictions) == 3
    for prediction in result.predictions.values():
        assert len(prediction.results) == 2
        assert prediction.denoiser_calls == sum(r.denoiser_calls for r in prediction.results)
    trajectory = pd.read_csv(result.trajectory_path)
    assert set(trajectory["part"]) == {0, 1}


def test_infer_is_reproducible(run, tmp_path):
    first = run.pipeline.infer(run.trained.checkpoint_path, run.root / "data", tmp_path / "a", split="all")
    second = run.pipeline.infer(run.trained.checkpoint_path, run.root / "data", tmp_path / "b", split="all")
    for video_id, prediction in first.predictions.items():
        np.testing.assert_array_equal(prediction.labels, second.predictions[video_id].labels)


def test_infer_rejects_mismatched_steps(run, config_factory, tmp_path):
    pipeline = SegmentationPipeline(config_factory(
        diffusion={"steps": 200},
        sampler={"total_steps": 200, "delta_init": 10},
    ))
    with pytest.raises(ConfigurationError):
        pipeline.infer(run.trained.checkpoint_path, run.root / "data", tmp_path)
    with pytest.raises(CheckpointError):
        run.pipeline.infer(tmp_path / "missing.npz", run.root / "data", tmp_path)


def test_eval_perfect_and_missing_predictions(run, tmp_path):
    videos, _ = load_dataset(run.root / "data")
    for video in videos[:2]:
        write_labels(tmp_path / "predictions" / f"{video.video_id}.txt", video.labels)

    result = run.pipeline.evaluate(tmp_path, run.root / "data", split="all")

    assert set(result.bundles) == {"video_000", "video_001"}
    assert "video_002" in result.errors
    assert result.mean.acc == 100.0
    assert result.mean.avg == 100.0

    metrics = pd.read_csv(result.metrics_path)
    assert list(metrics.columns) == METRICS_CSV_COLUMNS
    assert list(metrics["video_id"]) == ["video_000", "video_001", "video_002", MEAN_ROW_ID]
    assert math.isnan(metrics.loc[2, "acc"])
    assert metrics.loc[3, "avg"] == 100.0


def test_eval_reads_inference_costs(run, tmp_path):
    inferred = run.pipeline.infer(run.trained.checkpoint_path, run.root / "data", tmp_path)
    result = run.pipeline.evaluate(tmp_path, run.root / "data", tmp_path / "scores")
    metrics = pd.read_csv(result.metrics_path)
    assert metrics.loc[0, "denoiser_calls"] == inferred.denoiser_calls
    assert metrics.loc[1, "video_id"] == MEAN_ROW_ID


def test_video_ids_cannot_leave_the_output_directory(run, tmp_path):
    data = tmp_path / "data"
    shutil.copytree(run.root / "data", data)
    manifest = json.loads((data / "manifest.json").read_text())
    manifest[2]["id"] = "../../escaped"
    (data / "manifest.json").write_text(json.dumps(manifest))

    out = tmp_path / "nested" / "infer"
    result = run.pipeline.infer(run.trained.checkpoint_path, data, out, svg=True)

    assert list(result.predictions) == ["../../escaped"]
    assert (out / "predictions" / "escaped.txt").exists()
    assert (out / "timelines" / "escaped.svg").exists()
    assert not (tmp_path / "nested" / "escaped.txt").exists()
    assert not run.pipeline.evaluate(out, data).errors


def test_select_videos_split_rules(run, tmp_path, config_factory):
    with pytest.raises(DatasetError):
        run.pipeline.evaluate(tmp_path, run.root / "data", split="nosuch")

    dataset = {**run.config.dataset.model_dump(), "eval_videos": 0}
    pipeline = SegmentationPipeline(config_factory(dataset=dataset))
    pipeline.gen_data(tmp_path / "data")
    result = pipeline.evaluate(tmp_path / "empty", tmp_path / "data")
    assert len(result.errors) == 3
    assert result.mean is None


def test_bench(run, tmp_path):
    result = run.pipeline.bench(run.trained.checkpoint_path, run.root / "data", tmp_path)

    rows = pd.read_csv(result.comparison_path)
    assert list(rows.columns) == BENCH_COLUMNS
    assert list(rows["strategy"]) == ["fixed", "adaptive", "sweep", "sweep"]
    assert rows.loc[0, "steps_budget"] == 10
    assert rows.loc[0, "denoiser_calls"] == 10
    assert list(rows.loc[2:, "denoiser_calls"]) == [4, 8]

    summary = dict(pd.read_csv(result.summary_path).values)
    assert summary["fixed_calls_mean"] == 10.0
    assert summary["sweep_4_calls"] == 4.0
    assert summary["parameter_count"] == result.report.parameter_count
    assert summary["storage_bytes"] == 8 * result.report.parameter_count
    assert summary["checkpoint_bytes"] == run.trained.checkpoint_path.stat().st_size
    assert summary["input_rank"] == 8
    expected_reduction = 100.0 * (10 - result.report.mean_calls("adaptive")) / 10
    assert summary["call_reduction_pct"] == pytest.approx(expected_reduction)


def test_bench_counts_calls_per_sampling_run(run, config_factory, tmp_path):
    pipeline = SegmentationPipeline(config_factory())
    assert pipeline.config.augmentation.inference

    whole = pipeline.bench(run.trained.checkpoint_path, run.root / "data", tmp_path / "whole")
    rows = pd.read_csv(whole.comparison_path)
    assert rows.loc[0, "steps_budget"] == 10
    assert list(rows["denoiser_calls"][[0, 2, 3]]) == [10, 4, 8]
    assert set(rows["sampling_runs"]) == {1}
    assert whole.report.mean_calls("fixed") == 10.0

    parts = pipeline.bench(run.trained.checkpoint_path, run.root / "data", tmp_path / "parts", augment=True)
    rows = pd.read_csv(parts.comparison_path)
    assert set(rows["sampling_runs"]) == {2}
    assert list(rows["denoiser_calls"][[0, 2, 3]]) == [10, 4, 8]
    assert parts.report.mean_calls("fixed") == 10.0


def write_config(config, path):
    ConfigLoader().save_to_file(config, path, format="yaml")
    return str(path)


def test_cli_end_to_end(config_factory, tmp_path, capsys):
    config_path = write_config(config_factory(), tmp_path / "run.yaml")
    data, model, infer, scores = (str(tmp_path / name) for name in ("data", "model", "infer", "scores"))

    assert cli.main(["--config", config_path, "--out", data, "gen-data"]) == cli.EXIT_OK
    assert "✅ Wrote 3 videos" in capsys.readouterr().out

    assert cli.main(["--config", config_path, "--out", model, "train", "--data", data, "--steps", "2"]) == cli.EXIT_OK
    assert "📄 Checkpoint" in capsys.readouterr().out

    checkpoint = os.path.join(model, "checkpoint.npz")
    assert cli.main([
        "--config", config_path, "--out", infer,
        "infer", "--checkpoint", checkpoint, "--data", data, "--sampler", "adaptive", "--augment", "off", "--svg",
    ]) == cli.EXIT_OK
    assert os.path.exists(os.path.join(infer, "timelines", "video_002.svg"))

    assert cli.main(["--config", config_path, "--out", scores, "eval", "--pred", infer, "--data", data]) == cli.EXIT_OK
    assert "✅ Mean over 1 videos" in capsys.readouterr().out
    assert os.path.exists(os.path.join(scores, "metrics.csv"))


def test_cli_exit_codes(config_factory, tmp_path, capsys, mocker):
    config_path = write_config(config_factory(), tmp_path / "run.yaml")

    assert cli.main(["--config", config_path, "--set", "sampler.eta=5", "gen-data"]) == cli.EXIT_INVALID
    assert "Invalid configuration" in capsys.readouterr().err

    assert cli.main(["--config", str(tmp_path / "missing.yaml"), "gen-data"]) == cli.EXIT_INVALID

    missing = str(tmp_path / "none.npz")
    assert cli.main([
        "--config", config_path, "--out", str(tmp_path / "out"),
        "infer", "--checkpoint", missing, "--data", str(tmp_path),
    ]) == cli.EXIT_INVALID
    assert "❌" in capsys.readouterr().err

    pipeline_cls = mocker.patch.object(cli, "SegmentationPipeline")
    pipeline_cls.return_value.gen_data.side_effect = RuntimeError("disk on fire")
    assert cli.main(["--config", config_path, "--out", str(tmp_path / "x"), "gen-data"]) == cli.EXIT_UNEXPECTED
    assert "disk on fire" in capsys.readouterr().err


def test_cli_seed_and_overrides():
    args = cli.build_parser().parse_args(["--seed", "9", "--log-level", "DEBUG", "--set", "sampler.eta=0.5", "gen-data"])
    assert cli._overrides(args) == ["sampler.eta=0.5", "seed=9", "dataset.seed=9", "logging.level=DEBUG"]
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["infer", "--data", "d"])


def test_cli_bench_samples_whole_videos_by_default():
    args = cli.build_parser().parse_args(["bench", "--checkpoint", "c.npz", "--data", "d"])
    assert args.augment == "off"
    args = cli.build_parser().parse_args(["bench", "--checkpoint", "c.npz", "--data", "d", "--augment", "on"])
    assert args.augment == "on"
