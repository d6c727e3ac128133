"""Completion backends: scripted, co-occurrence oracle and HTTP."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

from ..errors import ConfigError
from .base import DEFAULT_PARAMS, CompletionModel, CompletionParams, RecordingModel
from .http import API_KEY_ENV, HttpCompletionModel
from .oracle import AffinityTable, OracleModel, load_affinity
from .scripted import ScriptedModel

BACKENDS = ("scripted", "oracle", "http")


@dataclass(frozen=True)
class ModelConfig:
    backend: str = "oracle"
    endpoint: str = ""
    model_name: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_tokens: int = 512
    affinity_table_path: str | None = None
    script_path: str | None = None
    max_in_flight: int = 4

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; choose from {', '.join(BACKENDS)}")

    @property
    def params(self) -> CompletionParams:
        return CompletionParams(self.temperature, self.max_tokens)

    def to_dict(self) -> dict:
        return asdict(self)


def build_model(cfg: ModelConfig, base_dir: Path | None = None) -> CompletionModel:
    def resolve(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() or base_dir is None else base_dir / path

    if cfg.backend == "oracle":
        table = load_affinity(resolve(cfg.affinity_table_path) if cfg.affinity_table_path else None)
        return OracleModel(table)
    if cfg.backend == "scripted":
        if not cfg.script_path:
            raise ConfigError("scripted backend needs script_path")
        return ScriptedModel.from_file(resolve(cfg.script_path))
    return HttpCompletionModel(cfg.endpoint, cfg.model_name, max_in_flight=cfg.max_in_flight)


__all__ = [
    "API_KEY_ENV", "AffinityTable", "BACKENDS", "CompletionModel", "CompletionParams", "DEFAULT_PARAMS",
    "HttpCompletionModel", "ModelConfig", "OracleModel", "RecordingModel", "ScriptedModel", "build_model",
    "load_affinity",
]
