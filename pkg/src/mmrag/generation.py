"""Chat-completion clients and MCQ answer extraction.

One wire protocol (chat-completions with base64 image parts) serves both
proprietary and locally served models. Stub generators implement the same
Generator protocol for offline runs and tests: an oracle that reads the
displayed options, a seeded uniform guesser, and a fixed-position stub.
"""

from __future__ import annotations

import base64
import json
import logging
import random
import re
import time
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

import httpx

from .augmentation import PromptPayload
from .errors import ConfigurationError, TransportError
from .tokens import Tokenizer, count_tokens

logger = logging.getLogger(__name__)


class AnswerLetter(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


@dataclass(frozen=True)
class ParseFailure:
    """Unextractable answer; scored incorrect and counted separately."""

    note: str = ""


Answer = AnswerLetter | ParseFailure


@dataclass(frozen=True)
class GeneratorConfig:
    endpoint: str
    model_id: str
    api_key: str = ""
    temperature: float | None = None
    seed: int | None = None
    max_images: int = 8
    timeout_s: float = 120.0
    retries: int = 0
    streaming: bool = False

    def __post_init__(self):
        if self.temperature is not None and self.temperature < 0:
            raise ConfigurationError("temperature must be non-negative when present")
        if not 0 <= self.retries <= 5:
            raise ConfigurationError("retries must be between 0 and 5")
        if self.max_images < 1:
            raise ConfigurationError("max_images must be positive")
        if self.timeout_s <= 0:
            raise ConfigurationError("timeout_s must be positive")


@dataclass(frozen=True)
class GenerationRecord:
    prompt_tokens: int
    completion_tokens: int
    latency_s: float
    ttft_ms: float | None = None
    raw_text: str = ""
    usage_estimated: bool = False
    retries: int = 0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")
        if self.latency_s < 0:
            raise ValueError("latency must be non-negative")
        if self.ttft_ms is not None and self.latency_s < self.ttft_ms / 1000.0:
            raise ValueError("latency_s must be >= ttft_ms/1000")


class Generator(Protocol):
    def generate(self, payload: PromptPayload) -> tuple[str, GenerationRecord]: ...


# ---------------------------------------------------------------------------
# Answer extraction: strict JSON -> pattern scan -> lone letter -> ParseFailure
# ---------------------------------------------------------------------------

_SCAN_PATTERN = re.compile(r"query_answer\W*([A-Da-d])\b")


def extract_answer(raw: str) -> Answer:
    """Total function: every string yields a letter or a ParseFailure."""
    if not isinstance(raw, str):
        return ParseFailure("response is not text")
    try:
        parsed = json.loads(raw.strip())
        if isinstance(parsed, dict) and "query_answer" in parsed:
            value = str(parsed["query_answer"]).strip().upper()
            if value in AnswerLetter.__members__:
                return AnswerLetter(value)
    except (json.JSONDecodeError, TypeError, ValueError):
        pass
    match = _SCAN_PATTERN.search(raw)
    if match:
        return AnswerLetter(match.group(1).upper())
    lone = raw.strip()
    if lone in AnswerLetter.__members__:
        return AnswerLetter(lone)
    return ParseFailure("no answer letter found")


# ---------------------------------------------------------------------------
# HTTP chat-completions client
# ---------------------------------------------------------------------------


def _image_part(image) -> dict:
    b64 = base64.b64encode(image.data).decode("ascii")
    return {
        "type": "image_url",
        "image_url": {"url": f"data:image/{image.encoding.value};base64,{b64}"},
    }


class HttpChatGenerator:
    """Chat-completions client capturing usage, latency, and TTFT (streaming)."""

    def __init__(
        self,
        cfg: GeneratorConfig,
        tokenizer: Tokenizer | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.cfg = cfg
        self.tokenizer = tokenizer
        headers = {"Authorization": f"Bearer {cfg.api_key}"} if cfg.api_key else {}
        self._client = httpx.Client(
            base_url=cfg.endpoint.rstrip("/"),
            headers=headers,
            timeout=cfg.timeout_s,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _body(self, payload: PromptPayload) -> dict:
        parts: list[dict] = [{"type": "text", "text": payload.text}]
        parts.extend(_image_part(image) for image in payload.images)
        body: dict = {
            "model": self.cfg.model_id,
            "messages": [{"role": "user", "content": parts}],
        }
        if self.cfg.temperature is not None:
            body["temperature"] = self.cfg.temperature
        if self.cfg.seed is not None:
            body["seed"] = self.cfg.seed
        return body

    def _one_attempt(self, body: dict) -> tuple[str, dict | None, float, float | None]:
        start = time.perf_counter()
        if not self.cfg.streaming:
            response = self._client.post("/chat/completions", json=body)
            latency = time.perf_counter() - start
            if response.status_code != 200:
                raise TransportError(
                    f"generator returned {response.status_code}: {response.text[:200]}",
                    status=response.status_code,
                )
            data = response.json()
            text = data["choices"][0]["message"]["content"] or ""
            return text, data.get("usage"), latency, None
        ttft_ms: float | None = None
        pieces: list[str] = []
        usage: dict | None = None
        with self._client.stream(
            "POST", "/chat/completions", json={**body, "stream": True}
        ) as response:
            if response.status_code != 200:
                response.read()
                raise TransportError(
                    f"generator returned {response.status_code}: {response.text[:200]}",
                    status=response.status_code,
                )
            for line in response.iter_lines():
                if not line.startswith("data: "):
                    continue
                chunk = line[len("data: "):]
                if chunk.strip() == "[DONE]":
                    break
                event = json.loads(chunk)
                if event.get("usage"):
                    usage = event["usage"]
                for choice in event.get("choices", []):
                    delta = choice.get("delta", {}).get("content")
                    if delta:
                        if ttft_ms is None:
                            ttft_ms = (time.perf_counter() - start) * 1000.0
                        pieces.append(delta)
        latency = time.perf_counter() - start
        return "".join(pieces), usage, latency, ttft_ms

    def generate(self, payload: PromptPayload) -> tuple[str, GenerationRecord]:
        if len(payload.images) > self.cfg.max_images:
            raise ValueError(
                f"payload carries {len(payload.images)} images, limit is {self.cfg.max_images}"
            )
        body = self._body(payload)
        attempts = self.cfg.retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                text, usage, latency, ttft_ms = self._one_attempt(body)
            except (httpx.HTTPError, TransportError) as exc:
                last_error = exc
                logger.warning("generation attempt %d/%d failed: %s", attempt + 1, attempts, exc)
                continue
            if usage and "prompt_tokens" in usage:
                prompt_tokens = int(usage["prompt_tokens"])
                completion_tokens = int(usage.get("completion_tokens", 0))
                estimated = False
            else:
                prompt_tokens = count_tokens(payload.text, self.tokenizer)
                completion_tokens = count_tokens(text, self.tokenizer)
                estimated = True
            record = GenerationRecord(
                prompt_tokens=prompt_tokens,
                completion_tokens=completion_tokens,
                latency_s=latency,
                ttft_ms=ttft_ms,
                raw_text=text,
                usage_estimated=estimated,
                retries=attempt,
            )
            return text, record
        raise TransportError(
            f"generation failed after {attempts} attempts: {last_error}",
            status=getattr(last_error, "status", None),
        )


def complete(
    payload: PromptPayload,
    cfg: GeneratorConfig,
    *,
    tokenizer: Tokenizer | None = None,
    transport: httpx.BaseTransport | None = None,
) -> tuple[str, GenerationRecord]:
    client = HttpChatGenerator(cfg, tokenizer=tokenizer, transport=transport)
    try:
        return client.generate(payload)
    finally:
        client.close()


# ---------------------------------------------------------------------------
# Stub generators (offline runs, calibration, tests)
# ---------------------------------------------------------------------------

_QUESTION_RE = re.compile(r"Here is the query: (.*?)\. \nHere are the choices:", re.DOTALL)
_CHOICES_RE = re.compile(r"Here are the choices: (.*?) \n    Context:", re.DOTALL)
_OPTION_LINE_RE = re.compile(r"^([A-D]): (.*)$")


def parse_payload_choices(payload_text: str) -> tuple[str, dict[str, str]]:
    """Recover (question, letter -> option text) from an assembled prompt."""
    question_match = _QUESTION_RE.search(payload_text)
    choices_match = _CHOICES_RE.search(payload_text)
    if not question_match or not choices_match:
        raise ValueError("payload text does not look like an assembled MCQ prompt")
    options: dict[str, str] = {}
    for line in choices_match.group(1).split("\n"):
        match = _OPTION_LINE_RE.match(line.strip())
        if match:
            options[match.group(1)] = match.group(2)
    return question_match.group(1), options


def _stub_record(payload: PromptPayload, text: str, tokenizer: Tokenizer | None = None) -> GenerationRecord:
    return GenerationRecord(
        prompt_tokens=count_tokens(payload.text, tokenizer),
        completion_tokens=count_tokens(text, tokenizer),
        latency_s=0.0,
        raw_text=text,
        usage_estimated=True,
    )


class OracleGenerator:
    """Always answers correctly by matching the gold option text in the prompt."""

    def __init__(self, answer_key: dict[str, str]):
        # question text -> gold option text
        self.answer_key = answer_key

    def generate(self, payload: PromptPayload) -> tuple[str, GenerationRecord]:
        question, options = parse_payload_choices(payload.text)
        gold_text = self.answer_key.get(question)
        letter = next(
            (name for name, text in options.items() if text == gold_text), "A"
        )
        raw = json.dumps({"query_answer": letter})
        return raw, _stub_record(payload, raw)


class RandomGenerator:
    """Uniform guesser over {A,B,C,D}, deterministic for a fixed seed."""

    def __init__(self, seed: int = 0):
        self._rng = random.Random(seed)

    def generate(self, payload: PromptPayload) -> tuple[str, GenerationRecord]:
        raw = json.dumps({"query_answer": self._rng.choice("ABCD")})
        return raw, _stub_record(payload, raw)


class FixedLetterGenerator:
    """Always answers the same displayed position (a contamination probe)."""

    def __init__(self, letter: str = "A"):
        if letter not in AnswerLetter.__members__:
            raise ConfigurationError(f"fixed letter must be one of A-D, got {letter!r}")
        self.letter = letter

    def generate(self, payload: PromptPayload) -> tuple[str, GenerationRecord]:
        raw = json.dumps({"query_answer": self.letter})
        return raw, _stub_record(payload, raw)


class ImageDigestGenerator:
    """Offline summarizer stand-in: derives a short text from the attached images."""

    def generate(self, payload: PromptPayload) -> tuple[str, GenerationRecord]:
        import hashlib

        digest = hashlib.sha256(
            b"".join(image.data for image in payload.images)
        ).hexdigest()[:12]
        text = (
            f"Synthetic summary {digest}: tabulated glycan measurements and their "
            "visual trends, generated offline for indexing."
        )
        return text, _stub_record(payload, text)


class ScriptedGenerator:
    """Replays a fixed list of raw responses (cycling when exhausted)."""

    def __init__(self, responses: list[str]):
        if not responses:
            raise ConfigurationError("scripted generator needs at least one response")
        self.responses = responses
        self._calls = 0

    def generate(self, payload: PromptPayload) -> tuple[str, GenerationRecord]:
        raw = self.responses[self._calls % len(self.responses)]
        self._calls += 1
        return raw, _stub_record(payload, raw)
