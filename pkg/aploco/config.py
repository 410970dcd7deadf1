"""Configuration loading and validation for aploco."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from aploco.errors import ConfigError


@dataclass(frozen=True)
class TrainingConfig:
    hidden_units: int = 5
    epochs: int = 500
    learning_rate: float = 0.01
    seed: int = 0
    init_scale: float = 0.5
    train_fraction: float = 0.71

    def validate(self) -> TrainingConfig:
        if self.hidden_units < 1:
            raise ConfigError(f"hidden_units must be positive, got {self.hidden_units!r}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must not be negative, got {self.epochs!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if not self.init_scale > 0:
            raise ConfigError(f"init_scale must be positive, got {self.init_scale!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction!r}")
        return self

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class DisplayConfig:
    precision: int = 2
    score_precision: int = 3


@dataclass(frozen=True)
class AplocoConfig:
    training: TrainingConfig = field(default_factory=TrainingConfig)
    display: DisplayConfig = field(default_factory=DisplayConfig)
    out_dir: str | None = None


def _section(cls: type, raw: Any, name: str) -> Any:
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"'{name}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {', '.join(unknown)}")
    defaults = cls()
    values: dict[str, Any] = {}
    for key, value in raw.items():
        expected = type(getattr(defaults, key))
        if expected is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, expected) or isinstance(value, bool):
            raise ConfigError(f"'{name}.{key}' must be {expected.__name__}, got {value!r}")
        values[key] = value
    return cls(**values)


def load_config(path: str | Path) -> AplocoConfig:
    """Load and validate an aploco.json configuration file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    try:
        raw: dict[str, Any] = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("Config must be a JSON object")

    unknown = sorted(set(raw) - {"training", "display", "out_dir"})
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    training = _section(TrainingConfig, raw.get("training"), "training").validate()
    display = _section(DisplayConfig, raw.get("display"), "display")
    if display.precision < 0 or display.score_precision < 0:
        raise ConfigError("display precisions must not be negative")
    out_dir = raw.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("'out_dir' must be a string")

    return AplocoConfig(training=training, display=display, out_dir=out_dir)
