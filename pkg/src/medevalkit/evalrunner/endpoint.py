"""Model endpoints: an HTTP chat-completion client and scripted mocks."""
from __future__ import annotations

import base64
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass
from typing import Callable, Protocol

import httpx

from ..errors import EndpointError, TransportError, ValidationError
from ..promptforge.templates import ModelKind
from ..promptforge.types import PartKind, RenderedPrompt
from .manifest import ManifestRecord, TaskKind, parse_temporal_label

logger = logging.getLogger(__name__)

API_KEY_ENV = "MEDEVALKIT_API_KEY"
MOCK_PREFIX = "mock:"


@dataclass(frozen=True)
class EndpointConfig:
    """Connection and decoding settings. ``base_url`` is an HTTP URL or ``mock:NAME``."""

    base_url: str = "mock:gold-echo"
    model: str = "medgemma"
    model_kind: str = ModelKind.MEDGEMMA.value
    temperature: float = 0.0
    max_output_tokens: int = 1024
    max_in_flight: int = 8
    retries: int = 3
    backoff_s: float = 0.5
    timeout_s: float = 120.0
    seed: int = 0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise ValidationError("max_in_flight must be >= 1")
        if self.retries < 0 or self.max_output_tokens < 1:
            raise ValidationError("retries must be >= 0 and max_output_tokens >= 1")
        ModelKind(self.model_kind)

    @property
    def is_mock(self) -> bool:
        return self.base_url.startswith(MOCK_PREFIX)

    def as_metadata(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CallContext:
    """What a mock may look at: the record and, for classification, the queried condition."""

    record: ManifestRecord
    condition: str | None = None


class Endpoint(Protocol):
    def generate(self, prompt: RenderedPrompt, context: CallContext) -> str: ...


def request_body(prompt: RenderedPrompt, config: EndpointConfig) -> dict:
    """Chat-completion request: optional system message, then one user message with
    text and inline PNG parts in prompt order."""
    content = []
    for part in prompt.parts:
        if part.kind is PartKind.TEXT:
            content.append({"type": "text", "text": part.text})
        else:
            b64 = base64.b64encode(part.image.png_bytes()).decode("ascii")
            content.append({"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}})
    messages = []
    if prompt.system_text:
        messages.append({"role": "system", "content": prompt.system_text})
    messages.append({"role": "user", "content": content})
    return {
        "model": config.model,
        "messages": messages,
        "temperature": prompt.temperature,
        "max_tokens": config.max_output_tokens,
        "seed": config.seed,
    }


def reply_text(payload: dict) -> str:
    content = payload["choices"][0]["message"]["content"]
    if isinstance(content, list):
        return "".join(p.get("text", "") for p in content if isinstance(p, dict))
    if not isinstance(content, str):
        raise TypeError("message content is not text")
    return content


class HttpEndpoint:
    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        url = config.base_url.rstrip("/")
        self.url = url if url.endswith("/chat/completions") else url + "/chat/completions"
        self.config = config
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(timeout=config.timeout_s, headers=headers, transport=transport)

    def close(self) -> None:
        self._client.close()

    def generate(self, prompt: RenderedPrompt, context: CallContext | None = None) -> str:
        body = request_body(prompt, self.config)
        last_exc: Exception | None = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = self._client.post(self.url, json=body)
            except httpx.TransportError as exc:
                last_exc = exc
                if attempt < self.config.retries:
                    delay = self.config.backoff_s * 2 ** attempt
                    logger.warning("transport error (%s); retry %d in %.2fs", exc, attempt + 1, delay)
                    self._sleep(delay)
                continue
            if not 200 <= resp.status_code < 300:
                raise EndpointError(resp.status_code, resp.text)
            try:
                return reply_text(resp.json())
            except (ValueError, KeyError, IndexError, TypeError):
                raise EndpointError(resp.status_code, "malformed response: " + resp.text) from None
        raise TransportError(f"{self.url} unreachable after {self.config.retries} retries: {last_exc}")


Responder = Callable[[RenderedPrompt, CallContext], str]


def _answer(text: str) -> str:
    return f"Final Answer: {text}"


def _other_letter(letter: str) -> str:
    return "B" if letter.upper() == "A" else "A"


def _disjoint_text(reference: str) -> str:
    from ..medmetrics.text import normalize_tokens

    used = set(normalize_tokens(reference))
    word = "zq"
    while word in used:
        word += "q"
    return word


def gold_reply(ctx: CallContext) -> str:
    rec = ctx.record
    k = rec.task_kind
    if k.is_classification:
        return _answer("yes" if rec.gold["labels"][ctx.condition] else "no")
    if k is TaskKind.BBOX_LOC:
        return json.dumps([{"label": rec.inputs["object"], "box_2d": rec.gold["box"]}])
    if k is TaskKind.TEMPORAL:
        return _answer(parse_temporal_label(rec.gold["class"]).letter)
    if k is TaskKind.WSI_REPORT:
        return rec.gold["reference"]
    if k is TaskKind.LAB_EXTRACT:
        return json.dumps(rec.gold["entries"])
    return _answer(rec.gold["choice"])


def wrong_reply(ctx: CallContext) -> str:
    rec = ctx.record
    k = rec.task_kind
    if k.is_classification:
        return _answer("no" if rec.gold["labels"][ctx.condition] else "yes")
    if k is TaskKind.BBOX_LOC:
        return json.dumps([{"label": rec.inputs["object"], "box_2d": [0, 0, 0, 0]}])
    if k is TaskKind.TEMPORAL:
        letter = parse_temporal_label(rec.gold["class"]).letter
        return _answer("ABC"[("ABC".index(letter) + 1) % 3])
    if k is TaskKind.WSI_REPORT:
        return _disjoint_text(rec.gold["reference"])
    if k is TaskKind.LAB_EXTRACT:
        return "[]"
    return _answer(_other_letter(rec.gold["choice"]))


def shifted_box_reply(ctx: CallContext) -> str:
    if ctx.record.task_kind is not TaskKind.BBOX_LOC:
        return gold_reply(ctx)
    y0, x0, y1, x1 = ctx.record.gold["box"]
    box = [y0, min(x0 + 0.1, 1.0), y1, min(x1 + 0.1, 1.0)]
    return json.dumps([{"label": ctx.record.inputs["object"], "box_2d": box}])


MOCK_RESPONDERS: dict[str, Responder] = {
    "gold-echo": lambda prompt, ctx: gold_reply(ctx),
    "constant-wrong": lambda prompt, ctx: wrong_reply(ctx),
    "no-answer": lambda prompt, ctx: "I am unable to determine this from the information given.",
    "echo": lambda prompt, ctx: prompt.text,
    "shift-box": lambda prompt, ctx: shifted_box_reply(ctx),
}


class MockEndpoint:
    """Scripted endpoint. Counts calls and tracks the peak number of concurrent calls."""

    def __init__(self, responder: Responder | str = "gold-echo"):
        if isinstance(responder, str):
            if responder not in MOCK_RESPONDERS:
                raise ValidationError(
                    f"unknown mock {responder!r}; known: {', '.join(sorted(MOCK_RESPONDERS))}")
            responder = MOCK_RESPONDERS[responder]
        self._responder = responder
        self._lock = threading.Lock()
        self.calls = 0
        self.in_flight = 0
        self.peak_in_flight = 0
        self.image_counts: list[int] = []

    def generate(self, prompt: RenderedPrompt, context: CallContext) -> str:
        with self._lock:
            self.calls += 1
            self.in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
            self.image_counts.append(prompt.image_count)
        try:
            return self._responder(prompt, context)
        finally:
            with self._lock:
                self.in_flight -= 1

    def close(self) -> None:
        pass


def make_endpoint(config: EndpointConfig, transport: httpx.BaseTransport | None = None):
    if config.is_mock:
        return MockEndpoint(config.base_url[len(MOCK_PREFIX):])
    if not config.base_url.startswith(("http://", "https://")):
        raise ValidationError(f"endpoint must be an http(s) URL or mock:NAME, got {config.base_url!r}")
    return HttpEndpoint(config, transport=transport)
