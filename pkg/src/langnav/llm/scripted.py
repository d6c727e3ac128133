"""Rule-driven backend for tests and scripted runs."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Callable, Union

from ..errors import ConfigError, ScriptError
from .base import DEFAULT_PARAMS, CompletionParams

Response = Union[str, Callable[[str], str]]


class ScriptedModel:
    """Returns the response of the first rule whose matcher fits the prompt.

    A matcher is a plain substring or a compiled regex. For regex rules a
    string response is expanded with the match, so ``\\1`` refers to the
    first group.
    """

    deterministic = True

    def __init__(self, rules: list[tuple[str | re.Pattern, Response]] | None = None,
                 default: str | None = None):
        self.rules = list(rules or [])
        self.default = default

    def complete(self, prompt: str, params: CompletionParams = DEFAULT_PARAMS) -> str:
        for matcher, response in self.rules:
            if isinstance(matcher, re.Pattern):
                m = matcher.search(prompt)
                if m is None:
                    continue
                if callable(response):
                    return response(prompt)
                return m.expand(response)
            if matcher in prompt:
                return response(prompt) if callable(response) else response
        if self.default is not None:
            return self.default
        raise ScriptError(f"no rule matches prompt starting {prompt[:60]!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedModel":
        """Load ``{"rules": [{"match"|"pattern": ..., "response": ...}], "default": ...}``."""
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load script {path}: {exc}") from exc
        rules = []
        for i, rule in enumerate(data.get("rules", [])):
            if "pattern" in rule:
                matcher = re.compile(rule["pattern"])
            elif "match" in rule:
                matcher = rule["match"]
            else:
                raise ConfigError(f"script rule #{i} needs 'match' or 'pattern'")
            if "response" not in rule:
                raise ConfigError(f"script rule #{i} needs 'response'")
            rules.append((matcher, rule["response"]))
        return cls(rules, data.get("default"))
