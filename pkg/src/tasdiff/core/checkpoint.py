"""Checkpoints: one ``.npz`` archive with a JSON header, parameters and Adam moments."""

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from ..autodiff import Adam
from ..config.schema import RunConfig, TrainingConfig
from ..data.models import ClassMapping
from ..models.segmenter import Segmenter
from ..utils.logging import get_logger


logger = get_logger(__name__)

CHECKPOINT_FORMAT = 1
META_KEY = "meta"
PARAM_PREFIX = "param/"
ADAM_M_PREFIX = "adam_m/"
ADAM_V_PREFIX = "adam_v/"


class CheckpointError(Exception):
    """Raised for unreadable, incomplete or incompatible checkpoints."""
    pass


@dataclass
class Checkpoint:
    config: RunConfig
    class_names: Tuple[str, ...]
    step: int
    params: Dict[str, np.ndarray]
    adam_m: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def mapping(self) -> ClassMapping:
        return ClassMapping(self.class_names)

    def build_model(self) -> Segmenter:
        model = Segmenter(self.config, num_classes=len(self.class_names))
        try:
            model.load_state_dict(self.params)
        except (KeyError, ValueError) as e:
            raise CheckpointError(f"Checkpoint parameters do not fit the configured model: {e}")
        return model

    def build_optimizer(self, model: Segmenter, training: Optional[TrainingConfig] = None) -> Adam:
        cfg = training or self.config.training
        optimizer = Adam(model.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), eps=cfg.eps)
        if self.adam_m:
            try:
                optimizer.load_state_dict({"step": self.step, "m": self.adam_m, "v": self.adam_v})
            except ValueError as e:
                raise CheckpointError(f"Optimizer state does not fit the model: {e}")
        return optimizer


def save_checkpoint(
    path: Union[str, Path],
    model: Segmenter,
    mapping: ClassMapping,
    optimizer: Optional[Adam] = None,
    config: Optional[RunConfig] = None,
) -> Path:
    """Write ``model`` and optionally its optimizer; ``config`` defaults to the model's own."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    params = model.state_dict()
    step = optimizer.step_count if optimizer is not None else 0

    meta = {
        "format": CHECKPOINT_FORMAT,
        "config": (config or model.config).model_dump(mode="json"),
        "class_names": list(mapping.names),
        "step": step,
        "shapes": {name: list(value.shape) for name, value in params.items()},
    }
    arrays = {META_KEY: np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    arrays.update({PARAM_PREFIX + name: value for name, value in params.items()})
    if optimizer is not None:
        state = optimizer.state_dict()
        arrays.update({ADAM_M_PREFIX + name: value for name, value in state["m"].items()})
        arrays.update({ADAM_V_PREFIX + name: value for name, value in state["v"].items()})

    buffer = io.BytesIO()
    np.savez(buffer, **arrays)
    path.write_bytes(buffer.getvalue())
    logger.info("Checkpoint saved", path=str(path), step=step, parameters=model.count_parameters())
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {key: archive[key] for key in archive.files}
    except (OSError, ValueError, EOFError, zipfile.BadZipFile) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}")

    if META_KEY not in arrays:
        raise CheckpointError(f"Checkpoint {path} has no header")
    try:
        meta = json.loads(arrays.pop(META_KEY).tobytes().decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Corrupt checkpoint header in {path}: {e}")
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"Unsupported checkpoint format {meta.get('format')!r} in {path}")

    try:
        config = RunConfig.model_validate(meta["config"])
    except (KeyError, ValidationError) as e:
        raise CheckpointError(f"Checkpoint {path} carries an invalid configuration: {e}")

    def section(prefix: str) -> Dict[str, np.ndarray]:
        return {key[len(prefix):]: value for key, value in arrays.items() if key.startswith(prefix)}

    params = section(PARAM_PREFIX)
    for name, shape in meta.get("shapes", {}).items():
        if name not in params:
            raise CheckpointError(f"Checkpoint {path} is missing parameter {name}")
        if list(params[name].shape) != shape:
            raise CheckpointError(f"Parameter {name} has shape {params[name].shape}, header says {shape}")

    checkpoint = Checkpoint(
        config=config,
        class_names=tuple(meta.get("class_names", [])),
        step=int(meta.get("step", 0)),
        params=params,
        adam_m=section(ADAM_M_PREFIX),
        adam_v=section(ADAM_V_PREFIX),
    )
    logger.info("Checkpoint loaded", path=str(path), step=checkpoint.step, parameters=len(params))
    return checkpoint
