"""Run configuration files: one JSON object with optional sections.

``agent``, ``tot`` and ``llm`` map onto their dataclasses; ``frontier``
and ``noise`` are shorthands for agent fields; ``decorators`` is either a
path to a decorator file or an inline object overriding individual texts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .agent import AgentConfig
from .errors import ConfigError
from .llm import ModelConfig
from .reasoning import PromptDecorators, ToTConfig

SECTIONS = ("agent", "tot", "llm", "decorators", "frontier", "noise")
_FRONTIER_KEYS = ("min_cluster_size", "radius_m", "max_candidates", "replan_interval")
_NOISE_KEYS = ("miss_prob", "false_pos_prob")


@dataclass(frozen=True)
class RunConfig:
    agent: AgentConfig = field(default_factory=AgentConfig)
    tot: ToTConfig = field(default_factory=ToTConfig)
    llm: ModelConfig = field(default_factory=ModelConfig)
    decorators: PromptDecorators = field(default_factory=PromptDecorators.default)
    base_dir: Path | None = None


def _build(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {section!r} section: {exc}") from exc


def parse_config(data: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    agent_fields = dict(data.get("agent", {}))
    for section, keys in (("frontier", _FRONTIER_KEYS), ("noise", _NOISE_KEYS)):
        extra = data.get(section, {})
        bad = set(extra) - set(keys)
        if bad:
            raise ConfigError(f"unknown keys in {section!r}: {', '.join(sorted(bad))}")
        agent_fields.update(extra)
    decorators = PromptDecorators.default()
    raw = data.get("decorators")
    if isinstance(raw, str):
        path = Path(raw)
        decorators = PromptDecorators.from_file(path if path.is_absolute() or base_dir is None else base_dir / path)
    elif isinstance(raw, dict):
        decorators = _build(PromptDecorators, {**vars(decorators), **raw}, "decorators")
    elif raw is not None:
        raise ConfigError("decorators must be a path or an object")
    return RunConfig(_build(AgentConfig, agent_fields, "agent"), _build(ToTConfig, data.get("tot", {}), "tot"),
                     _build(ModelConfig, data.get("llm", {}), "llm"), decorators, base_dir)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(data, p.parent)


def with_overrides(cfg: RunConfig, *, policy: str | None = None, backend: str | None = None) -> RunConfig:
    agent, llm = cfg.agent, cfg.llm
    if policy is not None:
        agent = _build(AgentConfig, {**agent.to_dict(), "policy": policy}, "agent")
    if backend is not None:
        llm = _build(ModelConfig, {**llm.to_dict(), "backend": backend}, "llm")
    return replace(cfg, agent=agent, llm=llm)
