"""Shared fixtures: a small run configuration that keeps model tests fast."""

import sys
import os

import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from tasdiff.config import ConfigLoader, RunConfig


def create_small_config(**sections) -> RunConfig:
    """Tiny model and dataset; ``sections`` replaces whole sections or top-level keys."""
    data = {
        "seed": 5,
        "encoder": {"input_dim": 4, "hidden": 8, "num_layers": 2},
        "decoder": {"num_blocks": 2},
        "diffusion": {"steps": 100},
        "sampler": {"total_steps": 100, "delta_init": 10},
        "dataset": {
            "num_videos": 3,
            "eval_videos": 1,
            "length_min": 24,
            "length_max": 32,
            "num_classes": 3,
            "feature_dim": 4,
            "min_segment": 4,
            "max_segment": 8,
            "blur_radius": 1,
            "seed": 5,
        },
        "augmentation": {"rate": 2, "median_window": 3},
        "training": {"steps": 4, "log_every": 2, "checkpoint_every": 2, "lr": 2e-3},
        "bench": {"repetitions": 1, "step_budgets": [4, 8], "rank_length": 16, "rank_hidden": 8, "rank_layers": 2},
    }
    data.update(sections)
    return ConfigLoader().load_from_dict(data)


@pytest.fixture
def small_config() -> RunConfig:
    return create_small_config()


@pytest.fixture(scope="session")
def config_factory():
    return create_small_config
