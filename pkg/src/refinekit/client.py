"""Chat-completions client for expert refinement and program generation.

Speaks the OpenAI-compatible JSON schema, which covers vLLM and most hosted
endpoints.  The transport is injectable so tests (and mock experts) never
need a network.
"""
from __future__ import annotations

import importlib.resources
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import requests

logger = logging.getLogger(__name__)

REFINED_LABEL = "refined_text:"
REASON_LABEL = "modification_reason:"
DOC_OPEN = "[doc]"
DOC_CLOSE = "[/doc]"


class ClientError(Exception):
    pass


class TransportError(ClientError):
    """Request failed after all retries."""


class MalformedResponse(ClientError):
    """Response body is missing the expected labels or delimiters."""


class TruncatedOutput(ClientError):
    """The model hit its token limit before finishing."""


@dataclass
class EndpointConfig:
    base_url: str
    model_name: str
    api_key_env: str = "REFINE_API_KEY"
    top_p: float = 0.8
    top_k: int = 20
    max_tokens: int | None = None
    max_retries: int = 3
    backoff_base: float = 0.5
    timeout: float = 120.0
    max_in_flight: int = 8

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass(frozen=True)
class E2EResponse:
    modification_reason: str
    refined_text: str
    raw: str


def load_prompt(name: str) -> str:
    return importlib.resources.files("refinekit.assets").joinpath(name).read_text(
        encoding="utf-8")


def fill_prompt(template: str, chunk_text: str) -> str:
    return template.replace("{input_text_task}", chunk_text)


def parse_e2e_response(raw: str) -> E2EResponse:
    """Extract the two labeled [doc] blocks from a model response.

    The LAST refined_text block wins, so a model echoing the prompt's
    examples still parses correctly.
    """
    idx = raw.rfind(REFINED_LABEL)
    if idx < 0:
        raise MalformedResponse("missing refined_text label")
    rest = raw[idx + len(REFINED_LABEL):]
    i = rest.find(DOC_OPEN)
    j = rest.rfind(DOC_CLOSE)
    if i < 0 or j < 0 or j < i:
        raise MalformedResponse("refined_text block missing [doc] delimiters")
    refined = rest[i + len(DOC_OPEN):j]

    reason = ""
    ridx = raw.rfind(REASON_LABEL, 0, idx)
    if ridx >= 0:
        rrest = raw[ridx + len(REASON_LABEL):idx]
        a = rrest.find(DOC_OPEN)
        b = rrest.find(DOC_CLOSE)
        if 0 <= a < b:
            reason = rrest[a + len(DOC_OPEN):b]
    return E2EResponse(modification_reason=reason, refined_text=refined, raw=raw)


def _requests_transport(url: str, headers: dict, payload: dict,
                        timeout: float) -> tuple[int, dict]:
    resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    try:
        body = resp.json()
    except ValueError:
        body = {}
    return resp.status_code, body


class ChatClient:
    """Bounded-concurrency chat client with retry/backoff.

    Shareable across workers: the only mutable state is a semaphore and a
    telemetry counter guarded by a lock.
    """

    def __init__(self, config: EndpointConfig,
                 transport: Callable[..., tuple[int, dict]] | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self._transport = transport or _requests_transport
        self._sleep = sleep
        self._semaphore = threading.Semaphore(config.max_in_flight)
        self._lock = threading.Lock()
        self.retry_count = 0
        self._e2e_template = load_prompt("e2e_prompt.txt")
        self._program_template = load_prompt("program_prompt.txt")

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def chat(self, prompt: str) -> str:
        cfg = self.config
        url = cfg.base_url.rstrip("/") + "/chat/completions"
        payload = {
            "model": cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "top_p": cfg.top_p,
            "top_k": cfg.top_k,
        }
        if cfg.max_tokens is not None:
            payload["max_tokens"] = cfg.max_tokens

        last_error = "no attempts made"
        with self._semaphore:
            for attempt in range(cfg.max_retries + 1):
                if attempt:
                    with self._lock:
                        self.retry_count += 1
                    self._sleep(cfg.backoff_base * (2 ** (attempt - 1)))
                try:
                    status, body = self._transport(url, self._headers(), payload,
                                                   cfg.timeout)
                except (requests.RequestException, OSError) as exc:
                    last_error = f"connection error: {exc}"
                    logger.warning("request failed (attempt %d): %s", attempt, exc)
                    continue
                if status >= 500 or status == 429:
                    last_error = f"server returned {status}"
                    logger.warning("retryable status %d (attempt %d)", status, attempt)
                    continue
                if status != 200:
                    raise TransportError(f"server returned {status}: {body}")
                try:
                    choice = body["choices"][0]
                    content = choice["message"]["content"]
                except (KeyError, IndexError, TypeError):
                    raise MalformedResponse(f"unexpected response shape: {body!r}")
                if choice.get("finish_reason") == "length":
                    raise TruncatedOutput("model output was cut off at max_tokens")
                return content
        raise TransportError(f"gave up after {cfg.max_retries + 1} attempts: {last_error}")

    def request_e2e_refinement(self, chunk_text: str) -> E2EResponse:
        raw = self.chat(fill_prompt(self._e2e_template, chunk_text))
        return parse_e2e_response(raw)

    def request_program(self, chunk_text: str) -> str:
        """Raw program text, verbatim; parsing/repair happens downstream."""
        return self.chat(fill_prompt(self._program_template, chunk_text))
