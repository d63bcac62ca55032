"""Vision-language backend clients: a live HTTP backend and an offline mock.

Both speak the same narrow interface -- `send(BackendRequest) ->
BackendResponse` -- so the pipeline never knows which one it is talking to.
The mock replays canned response text keyed by (stage, image id) from a
JSONL fixture file and is bit-deterministic, which is what makes end-to-end
runs reproducible and testable offline. The live backend posts a minimal
chat-completion-shaped JSON body and retries transport and 5xx failures
with exponential backoff.

`call_and_parse` layers the parse-or-degrade policy on top: invalid JSON
triggers a bounded number of corrective re-sends, and persistent failure
yields the stage's all-absent record instead of an exception. A stage can
therefore fail, but a run cannot crash because of one.
"""

from __future__ import annotations

import base64
import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Protocol

import requests

from .schema import (
    NoJsonFound,
    SchemaMismatch,
    degraded_record,
    extract_json_payload,
    validate_payload,
)

STAGES = (
    "scene_graph",
    "abstract",
    "prompts",
    "event_direct",
    "temporal_direct",
    "geo_direct",
    "event_cross",
    "temporal_cross",
    "geo_cross",
    "zeroshot_cot",
    "detective",
)

CORRECTIVE_INSTRUCTION = (
    "Your previous reply was not valid JSON matching the required format. "
    "Return ONLY the JSON object."
)

API_KEY_ENV = "EVENTLENS_API_KEY"


class FixtureMissing(Exception):
    """The mock backend has no canned response for (stage, image_id)."""


class BackendExhausted(Exception):
    """The live backend failed every retry attempt."""


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    data: bytes
    media_type: str = "image/png"


@dataclass(frozen=True)
class BackendRequest:
    stage: str
    system_prompt: str
    user_parts: tuple[TextPart | ImagePart, ...]
    schema: str
    image_id: str

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if not self.user_parts:
            raise ValueError("user_parts must not be empty")
        if sum(isinstance(p, ImagePart) for p in self.user_parts) > 1:
            raise ValueError("at most one image part per request")

    def to_json(self) -> dict:
        parts: list[dict] = []
        for part in self.user_parts:
            if isinstance(part, TextPart):
                parts.append({"type": "text", "text": part.text})
            else:
                parts.append({
                    "type": "image",
                    "media_type": part.media_type,
                    "data": base64.b64encode(part.data).decode("ascii"),
                })
        return {
            "stage": self.stage,
            "image_id": self.image_id,
            "schema": self.schema,
            "system": self.system_prompt,
            "user": parts,
        }


@dataclass(frozen=True)
class BackendResponse:
    raw_text: str
    latency_ms: int = 0
    attempt: int = 1


class Backend(Protocol):
    name: str

    def send(self, req: BackendRequest) -> BackendResponse: ...


class MockBackend:
    """Replays fixture text by (stage, image_id).

    Multiple fixture rows under the same key form a queue consumed one per
    send; once drained, the last row repeats. That keeps ordinary lookups
    deterministic while letting tests script retry sequences such as
    garbage, garbage, valid.
    """

    name = "mock"

    def __init__(self, fixtures: dict[tuple[str, str], list[str]]):
        self._queues = {key: list(texts) for key, texts in fixtures.items()}
        self._lock = threading.Lock()

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "MockBackend":
        fixtures: dict[tuple[str, str], list[str]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                key = (str(row["stage"]), str(row["image_id"]))
                fixtures.setdefault(key, []).append(str(row["response_text"]))
        return cls(fixtures)

    def send(self, req: BackendRequest) -> BackendResponse:
        key = (req.stage, req.image_id)
        with self._lock:
            queue = self._queues.get(key)
            if not queue:
                raise FixtureMissing(f"no fixture for stage={req.stage} image_id={req.image_id}")
            text = queue.pop(0) if len(queue) > 1 else queue[0]
        return BackendResponse(raw_text=text, latency_ms=0, attempt=1)


class HttpBackend:
    """Live backend speaking one chat-completion-style endpoint.

    Request body: {"model", "system", "user": [parts], "temperature"} with
    images sent base64-inline. Response body: {"text": "..."}. Credentials
    come from the environment only and are never written to run artifacts.
    """

    name = "http"

    def __init__(
        self,
        url: str,
        model: str = "",
        temperature: float = 0.0,
        timeout_s: float = 120.0,
        max_retries: int = 3,
        backoff_s: float = 1.0,
    ):
        self.url = url
        self.model = model
        self.temperature = temperature
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.backoff_s = backoff_s

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def send(self, req: BackendRequest) -> BackendResponse:
        body = req.to_json()
        payload = {
            "model": self.model,
            "system": body["system"],
            "user": body["user"],
            "temperature": self.temperature,
        }
        last_error: Exception | None = None
        started = time.monotonic()
        for attempt in range(1, self.max_retries + 2):
            try:
                response = requests.post(
                    self.url, json=payload, headers=self._headers(), timeout=self.timeout_s
                )
                if response.status_code >= 500:
                    raise requests.HTTPError(f"server error {response.status_code}")
                response.raise_for_status()
                text = response.json()["text"]
                latency_ms = int((time.monotonic() - started) * 1000)
                return BackendResponse(raw_text=str(text), latency_ms=latency_ms, attempt=attempt)
            except (requests.RequestException, ValueError, KeyError) as exc:
                last_error = exc
                if attempt <= self.max_retries:
                    time.sleep(self.backoff_s * (2 ** (attempt - 1)))
        raise BackendExhausted(
            f"{req.stage} for image {req.image_id}: {last_error}"
        ) from last_error


class CaptureLog:
    """Append-only JSONL record of every request/response pair, written
    before parsing so a failed run can still be replayed."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def record(self, req: BackendRequest, resp: BackendResponse) -> None:
        entry = {
            "ts": time.time(),
            "request": req.to_json(),
            "response": {
                "raw_text": resp.raw_text,
                "latency_ms": resp.latency_ms,
                "attempt": resp.attempt,
            },
        }
        line = json.dumps(entry, ensure_ascii=False)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


class RateLimitedBackend:
    """Caps concurrent in-flight sends with a semaphore; used by the runner."""

    def __init__(self, inner: Backend, max_in_flight: int = 8):
        self._inner = inner
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self.name = inner.name

    def send(self, req: BackendRequest) -> BackendResponse:
        with self._semaphore:
            return self._inner.send(req)


@dataclass
class StageOutcome:
    """What one agent stage produced: a typed record, or its degraded stand-in."""

    stage: str
    record: Any
    warnings: list[str] = field(default_factory=list)
    degraded: bool = False
    exhausted: bool = False
    attempts: int = 0


def call_and_parse(
    req: BackendRequest,
    backend: Backend,
    max_parse_retries: int = 2,
    capture: CaptureLog | None = None,
) -> StageOutcome:
    """Send a request and coerce the reply into a typed record.

    On unparseable or schema-less output the request is re-sent with a
    fixed corrective instruction appended, up to `max_parse_retries` extra
    attempts. Missing fixtures, exhausted live retries, and persistent
    parse failure all degrade to the stage's all-absent record; this
    function never raises for them.
    """
    outcome = StageOutcome(stage=req.stage, record=None)
    current = req
    for attempt in range(1, max_parse_retries + 2):
        outcome.attempts = attempt
        try:
            response = backend.send(current)
        except FixtureMissing as exc:
            outcome.warnings.append(f"degraded:{req.stage}:{exc}")
            break
        except BackendExhausted as exc:
            outcome.warnings.append(f"degraded:{req.stage}:{exc}")
            outcome.exhausted = True
            break
        if capture is not None:
            capture.record(current, response)
        try:
            payload = extract_json_payload(response.raw_text)
            record, warnings = validate_payload(payload, req.schema)
        except (NoJsonFound, SchemaMismatch) as exc:
            if attempt == max_parse_retries + 1:
                outcome.warnings.append(f"degraded:{req.stage}:{exc}")
                break
            current = replace(
                req, user_parts=req.user_parts + (TextPart(CORRECTIVE_INSTRUCTION),)
            )
            continue
        outcome.record = record
        outcome.warnings.extend(warnings)
        return outcome
    outcome.record = degraded_record(req.schema)
    outcome.degraded = True
    return outcome
