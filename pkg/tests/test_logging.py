"""Tests for logging setup and the command timing decorator."""

import sys
import os
import json
import logging

import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from tasdiff.utils.logging import get_logger, log_execution_time, setup_logging


def flush_root_handlers():
    for handler in logging.getLogger().handlers:
        handler.flush()


def test_file_logging_writes_json_lines(tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    setup_logging(log_level="INFO", log_format="json", log_file=str(log_file))
    logger = get_logger("test_file_logging_writes_json_lines")

    logger.info("Training step completed", step=3, loss=0.25, note='quoted "value"')
    logger.debug("Not written at INFO")
    flush_root_handlers()

    lines = log_file.read_text().splitlines()
    events = [json.loads(line) for line in lines]
    assert len(events) == 1
    assert events[0]["event"] == "Training step completed"
    assert events[0]["step"] == 3
    assert events[0]["note"] == 'quoted "value"'
    assert events[0]["level"] == "info"
    assert events[0]["logger"] == "test_file_logging_writes_json_lines"

    setup_logging(log_level="INFO")
    logger.info("✅ File logging test passed")


def test_setup_logging_replaces_its_handlers(tmp_path):
    setup_logging(log_level="DEBUG", log_file=str(tmp_path / "a.log"))
    setup_logging(log_level="WARNING")

    owned = [h for h in logging.getLogger().handlers if getattr(h, "_tasdiff_handler", False)]
    assert len(owned) == 1
    assert logging.getLogger().level == logging.WARNING

    setup_logging(log_level="INFO")


def test_log_execution_time(tmp_path):
    log_file = tmp_path / "timing.log"
    setup_logging(log_level="INFO", log_file=str(log_file))

    @log_execution_time
    def gen_data(count):
        return count * 2

    @log_execution_time
    def train():
        raise RuntimeError("boom")

    assert gen_data(4) == 8
    assert gen_data.__name__ == "gen_data"
    with pytest.raises(RuntimeError):
        train()
    flush_root_handlers()

    events = [json.loads(line) for line in log_file.read_text().splitlines()]
    assert [(e["event"], e["command"]) for e in events] == [
        ("Command finished", "gen_data"),
        ("Command failed", "train"),
    ]
    assert events[1]["error"] == "boom"
    assert events[0]["seconds"] >= 0

    setup_logging(log_level="INFO")
