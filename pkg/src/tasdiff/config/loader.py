"""Configuration loader for JSON/YAML run documents."""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import yaml
from pydantic import ValidationError

from .schema import RunConfig
from ..utils.logging import get_logger


class ConfigurationError(Exception):
    """Raised when configuration loading or validation fails."""

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        super().__init__(message)
        self.fields = fields or []


def _validation_error(error: ValidationError, source: str) -> ConfigurationError:
    fields = [".".join(str(part) for part in item["loc"]) or "<root>" for item in error.errors()]
    details = "; ".join(
        f"{field}: {item['msg']}" for field, item in zip(fields, error.errors())
    )
    return ConfigurationError(f"Invalid configuration from {source}: {details}", fields=fields)


class ConfigLoader:
    """Loads, validates, overrides and saves run configurations."""

    def __init__(self):
        self.logger = get_logger(self.__class__.__name__)

    def load_from_file(self, file_path: Union[str, Path]) -> RunConfig:
        """Load configuration from a JSON or YAML file.

        Raises:
            ConfigurationError: If the file cannot be read, parsed or validated
        """
        file_path = Path(file_path)

        if not file_path.exists():
            raise ConfigurationError(f"Configuration file not found: {file_path}")

        self.logger.info("Loading configuration from file", file_path=str(file_path))

        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                if file_path.suffix.lower() in ['.yaml', '.yml']:
                    data = yaml.safe_load(f)
                elif file_path.suffix.lower() == '.json':
                    data = json.load(f)
                else:
                    raise ConfigurationError(f"Unsupported file format: {file_path.suffix}")
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML format: {e}")
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Invalid JSON format: {e}")
        except OSError as e:
            raise ConfigurationError(f"Failed to read configuration: {e}")

        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"Configuration root must be a mapping, got {type(data).__name__}")

        return self._validate(data, source=str(file_path))

    def load_from_dict(self, data: Dict[str, Any]) -> RunConfig:
        """Load configuration from a dictionary."""
        return self._validate(data, source="dict")

    def apply_overrides(self, config: RunConfig, overrides: Iterable[str]) -> RunConfig:
        """Return a new config with ``section.key=value`` overrides applied.

        Values are parsed as YAML scalars, so ``sampler.eta=0.5`` becomes a float and
        ``augmentation.inference=false`` a bool.
        """
        data = config.model_dump(mode="json")
        applied = []
        for item in overrides:
            if "=" not in item:
                raise ConfigurationError(f"Override must look like section.key=value: {item!r}", fields=[item])
            path, raw = item.split("=", 1)
            keys = path.strip().split(".")
            target = data
            for key in keys[:-1]:
                if not isinstance(target.get(key), dict):
                    raise ConfigurationError(f"Unknown configuration section in override: {path}", fields=[path])
                target = target[key]
            try:
                target[keys[-1]] = yaml.safe_load(raw)
            except yaml.YAMLError as e:
                raise ConfigurationError(f"Cannot parse override value for {path}: {e}", fields=[path])
            applied.append(path)

        if applied:
            self.logger.info("Applied configuration overrides", overrides=applied)
        # Derived defaults are recomputed from the overridden inputs.
        _clear_derived(data, applied)
        return self._validate(data, source="overrides")

    def save_to_file(self, config: RunConfig, file_path: Union[str, Path], format: str = 'yaml') -> None:
        """Save configuration to a YAML or JSON file."""
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)

        data = config.model_dump(mode="json")

        try:
            with open(file_path, 'w', encoding='utf-8') as f:
                if format.lower() == 'yaml':
                    yaml.safe_dump(data, f, default_flow_style=False, indent=2, sort_keys=False)
                elif format.lower() == 'json':
                    json.dump(data, f, indent=2)
                else:
                    raise ConfigurationError(f"Unsupported format: {format}")
        except OSError as e:
            raise ConfigurationError(f"Failed to save configuration: {e}")

        self.logger.info("Configuration saved successfully", file_path=str(file_path))

    def create_default_config(self) -> RunConfig:
        config = RunConfig()
        self.logger.info("Created default configuration")
        return config

    def validate_config(self, config: RunConfig) -> List[str]:
        """Return warnings for settings that are legal but probably unintended."""
        warnings = []

        longest = config.dataset.length_max
        if config.augmentation.inference and config.augmentation.rate > longest:
            warnings.append(
                f"augmentation.rate ({config.augmentation.rate}) exceeds the longest video ({longest}); "
                "some sub-sequences will be empty"
            )

        receptive = max(config.encoder.dilations) * (config.encoder.window - 1)
        if receptive < config.dataset.min_segment:
            warnings.append(f"Largest dilated window ({receptive} frames) is shorter than min_segment")

        if config.sampler.delta_init > config.sampler.total_steps // 2:
            warnings.append("sampler.delta_init covers more than half the diffusion chain")
        if config.sampler.total_steps % config.sampler.delta_init:
            warnings.append(
                f"sampler.delta_init ({config.sampler.delta_init}) does not divide "
                f"total_steps ({config.sampler.total_steps}); the last fixed step is shorter"
            )

        if config.dataset.eval_videos == 0:
            warnings.append("No eval split configured; evaluation will use the training videos")

        if config.training.batch_size > config.dataset.num_videos:
            warnings.append("training.batch_size exceeds the number of videos")

        if warnings:
            self.logger.warning("Configuration validation warnings", warnings=warnings)
        else:
            self.logger.info("Configuration validation passed")

        return warnings

    def _validate(self, data: Dict[str, Any], source: str) -> RunConfig:
        try:
            config = RunConfig.model_validate(data)
        except ValidationError as e:
            raise _validation_error(e, source)

        self.logger.info(
            "Configuration loaded",
            source=source,
            steps=config.diffusion.steps,
            hidden=config.encoder.hidden,
            layers=config.encoder.num_layers,
        )
        return config


def _clear_derived(data: Dict[str, Any], applied: List[str]) -> None:
    """Drop dumped defaults that depend on fields an override touched."""
    touched = set(applied)
    if "encoder.num_layers" in touched and "encoder.dilations" not in touched:
        data["encoder"]["dilations"] = None
    if "decoder.num_blocks" in touched and "decoder.dilations" not in touched:
        data["decoder"]["dilations"] = None
    if "encoder.hidden" in touched and "decoder.hidden" not in touched:
        data["decoder"]["hidden"] = None
    if touched & {"sampler.total_steps", "diffusion.steps"} and "sampler.delta_max" not in touched:
        data["sampler"]["delta_max"] = None


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Load ``path`` (or defaults when None) and apply overrides."""
    loader = ConfigLoader()
    config = loader.load_from_file(path) if path else loader.create_default_config()
    overrides = list(overrides)
    if overrides:
        config = loader.apply_overrides(config, overrides)
    return config
