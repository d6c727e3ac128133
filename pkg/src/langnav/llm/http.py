"""Chat-completions HTTP backend."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import uuid
from typing import Callable, Sequence

import httpx

from ..errors import ApiError, ConfigError, TransportError
from .base import DEFAULT_PARAMS, CompletionParams

log = logging.getLogger(__name__)

API_KEY_ENV = "NAV_LLM_API_KEY"
DEFAULT_BACKOFF = (1.0, 2.0, 4.0)


def request_body(model_name: str, prompt: str, params: CompletionParams) -> bytes:
    body: dict = {
        "model": model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
    }
    if params.stop:
        body["stop"] = list(params.stop)
    return json.dumps(body, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


class HttpCompletionModel:
    """Sends one user message per call and returns the assistant text.

    ``attempts`` counts the total number of tries; the wait before retry *i*
    is ``backoff[i - 1]``. 429 and 5xx responses, timeouts and connection
    failures are retried; any other 4xx raises :class:`ApiError` at once.
    """

    deterministic = False

    def __init__(self, endpoint: str, model_name: str, api_key: str | None = None, *,
                 timeout: float = 60.0, attempts: int = 3, backoff: Sequence[float] = DEFAULT_BACKOFF,
                 max_in_flight: int = 4, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        if not endpoint:
            raise ConfigError("http backend needs an endpoint URL")
        api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigError(f"http backend needs the {API_KEY_ENV} environment variable")
        self.endpoint = endpoint
        self.model_name = model_name
        self.attempts = attempts
        self.backoff = tuple(backoff)
        self.sleep = sleep
        self._headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._local = threading.local()

    @property
    def last_request_body(self) -> bytes | None:
        return getattr(self._local, "body", None)

    def close(self) -> None:
        self._client.close()

    def complete(self, prompt: str, params: CompletionParams = DEFAULT_PARAMS) -> str:
        body = request_body(self.model_name, prompt, params)
        self._local.body = body
        request_id = uuid.uuid4().hex
        headers = {**self._headers, "X-Request-Id": request_id}
        last_problem = "no attempt made"
        with self._slots:
            for attempt in range(1, self.attempts + 1):
                try:
                    resp = self._client.post(self.endpoint, content=body, headers=headers)
                except httpx.TimeoutException:
                    last_problem = "request timed out"
                except httpx.TransportError as exc:
                    last_problem = f"transport failure: {exc}"
                else:
                    request_id = resp.headers.get("x-request-id", request_id)
                    if resp.status_code == 200:
                        return self._content(resp, request_id)
                    if 400 <= resp.status_code < 500 and resp.status_code != 429:
                        raise ApiError(resp.text[:200] or "client error", resp.status_code, request_id)
                    last_problem = f"HTTP {resp.status_code}"
                if attempt < self.attempts:
                    delay = self.backoff[min(attempt - 1, len(self.backoff) - 1)]
                    log.warning("attempt %d/%d failed (%s); retrying in %.1fs", attempt, self.attempts,
                                last_problem, delay)
                    self.sleep(delay)
        raise TransportError(f"gave up after {self.attempts} attempts: {last_problem}", request_id)

    @staticmethod
    def _content(resp: httpx.Response, request_id: str) -> str:
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ApiError(f"malformed completion payload: {exc}", resp.status_code, request_id) from exc
