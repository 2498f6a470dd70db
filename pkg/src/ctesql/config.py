"""Pipeline configuration: defaults, file loading, validation."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError


@dataclass
class PipelineConfig:
    knowledge_dir: str = "knowledge"
    database: str = ":memory:"  # sqlite path
    model: dict = field(default_factory=dict)  # provider settings
    k_examples: int = 3
    k_instructions: int = 10
    lam: float = 0.5  # query/example blend for instruction scoring
    tau_intent: float = 0.35
    max_rounds: int = 2
    exec_timeout_s: float = 15.0
    request_timeout_s: float = 60.0

    def validate(self) -> None:
        if self.k_examples < 1 or self.k_instructions < 1:
            raise ConfigError("k_examples and k_instructions must be >= 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lam must lie in [0, 1]")
        if not 0.0 <= self.tau_intent <= 1.0:
            raise ConfigError("tau_intent must lie in [0, 1]")
        if self.max_rounds < 0:
            raise ConfigError("max_rounds must be >= 0")
        if self.exec_timeout_s <= 0 or self.request_timeout_s <= 0:
            raise ConfigError("timeouts must be positive")
        if not isinstance(self.model, dict):
            raise ConfigError("model settings must be a mapping")


def load_config(path: str | Path | None) -> PipelineConfig:
    """Read a YAML or JSON config file; absent path gives pure defaults."""
    if path is None:
        config = PipelineConfig()
        config.validate()
        return config
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file unreadable: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    config = PipelineConfig(**doc)
    for name, caster in (
        ("k_examples", int),
        ("k_instructions", int),
        ("max_rounds", int),
        ("lam", float),
        ("tau_intent", float),
        ("exec_timeout_s", float),
        ("request_timeout_s", float),
    ):
        try:
            setattr(config, name, caster(getattr(config, name)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {name} has a non-numeric value") from exc
    config.validate()
    return config
