"""Completion-model protocol shared by every backend."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Protocol, runtime_checkable


@dataclass(frozen=True)
class CompletionParams:
    temperature: float = 0.0
    max_tokens: int = 512
    stop: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


DEFAULT_PARAMS = CompletionParams()


@runtime_checkable
class CompletionModel(Protocol):
    deterministic: bool

    def complete(self, prompt: str, params: CompletionParams = DEFAULT_PARAMS) -> str: ...


class RecordingModel:
    """Wraps a model and reports every request/response pair to ``sink``.

    Errors are reported as well (with ``response=None``) and then re-raised.
    """

    def __init__(self, model: CompletionModel, sink: Callable[[dict], None]):
        self.model = model
        self.sink = sink
        self.deterministic = getattr(model, "deterministic", False)
        self._lock = threading.Lock()

    def complete(self, prompt: str, params: CompletionParams = DEFAULT_PARAMS) -> str:
        try:
            response = self.model.complete(prompt, params)
        except Exception as exc:
            with self._lock:
                self.sink({"event": "llm", "prompt": prompt, "response": None, "error": str(exc)})
            raise
        record = {"event": "llm", "prompt": prompt, "response": response}
        body = getattr(self.model, "last_request_body", None)
        if body is not None:
            record["request_body"] = body.decode()
        with self._lock:
            self.sink(record)
        return response
