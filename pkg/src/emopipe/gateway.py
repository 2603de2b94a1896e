"""Gateway to any OpenAI-compatible chat-completion endpoint.

Handles multimodal message assembly (attachments ride as base64 data
parts), retry with exponential backoff for transient failures, optional
rate limiting, and bounded-parallelism batching with deterministic result
ordering. The HTTP layer is a swappable transport so offline runs and
tests can script responses deterministically.

The API key is resolved through an environment variable named in the
configuration; it is never embedded in payload fingerprints or artifacts.
"""

from __future__ import annotations

import base64
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import requests

from .hashing import stable_hash

log = logging.getLogger(__name__)

# Statuses worth retrying: rate limiting and server-side failures.
_RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})

_AUDIO_FORMATS = {".wav": "wav", ".mp3": "mp3", ".flac": "flac", ".ogg": "ogg"}
_VIDEO_MIMES = {".mp4": "video/mp4", ".webm": "video/webm", ".avi": "video/x-msvideo"}


@dataclass(frozen=True)
class GenOptions:
    """Generation options; defaults favor reproducible supervision runs."""

    model_id: str = "omni-chat"
    temperature: float = 0.2
    max_tokens: int = 512
    seed: int | None = None
    timeout_s: float = 120.0

    def to_record(self) -> dict:
        return {
            "model_id": self.model_id,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class RawCompletion:
    text: str
    model_id: str
    latency_ms: int
    request_fingerprint: str
    attempts: int = 1


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    """Connection-level failure (DNS, refused, timeout); retryable."""


class HTTPStatusError(GatewayError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"endpoint returned HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class MediaNotSupportedError(GatewayError):
    """The endpoint rejected an attachment kind; text-only fallback possible."""

    def __init__(self, kind: str, status: int, body: str = ""):
        super().__init__(f"endpoint rejected {kind} attachment (HTTP {status})")
        self.kind = kind
        self.status = status


class AttachmentError(GatewayError):
    pass


class AttemptsExhaustedError(GatewayError):
    def __init__(self, attempts: int, last: Exception):
        super().__init__(f"gave up after {attempts} attempts: {last}")
        self.attempts = attempts
        self.last = last


@dataclass(frozen=True)
class TransportReply:
    status: int
    body: str


def _encode_attachment(kind: str, path: str) -> dict:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise AttachmentError(f"cannot read {kind} attachment {path}: {exc}") from exc
    b64 = base64.b64encode(data).decode("ascii")
    suffix = Path(path).suffix.lower()
    if kind == "audio":
        return {
            "type": "input_audio",
            "input_audio": {"data": b64, "format": _AUDIO_FORMATS.get(suffix, "wav")},
        }
    mime = _VIDEO_MIMES.get(suffix, "video/mp4")
    return {"type": "video_url", "video_url": {"url": f"data:{mime};base64,{b64}"}}


def build_payload(bundle, options: GenOptions) -> dict:
    """Assemble the chat-completions request body for one prompt bundle.

    Text-only bundles send a plain string content for wide compatibility;
    bundles with attachments use the multimodal parts array. A metadata
    block carries tracing keys (sample id, schema, constrained flag).
    """
    if bundle.attachments:
        content = [{"type": "text", "text": bundle.instruction_text}]
        for kind, path in bundle.attachments:
            content.append(_encode_attachment(kind, path))
    else:
        content = bundle.instruction_text
    payload = {
        "model": options.model_id,
        "messages": [{"role": "user", "content": content}],
        "temperature": options.temperature,
        "max_tokens": options.max_tokens,
        "metadata": {
            "sample_id": bundle.sample_id,
            "schema": bundle.expected_schema,
            "constrained": bundle.constraint is not None,
        },
    }
    if options.seed is not None:
        payload["seed"] = options.seed
    return payload


def request_fingerprint(bundle, options: GenOptions) -> str:
    """Stable across retries: hashes only the bundle and the options."""
    return stable_hash({"bundle": bundle.to_record(), "options": options.to_record()})


def _classify_status(status: int, body: str, attachments) -> GatewayError:
    if status in (400, 415) and attachments:
        lowered = body.lower()
        for kind, _ in attachments:
            if kind in lowered or "media" in lowered or "modality" in lowered:
                return MediaNotSupportedError(kind, status, body)
    return HTTPStatusError(status, body)


def _is_retryable(error: GatewayError) -> bool:
    if isinstance(error, MediaNotSupportedError):
        return False
    if isinstance(error, HTTPStatusError):
        return error.status in _RETRYABLE_STATUSES
    return isinstance(error, TransportError)


def _extract_text(body: str) -> str:
    try:
        data = json.loads(body)
        content = data["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise GatewayError(f"malformed endpoint response: {exc}") from exc
    if isinstance(content, list):
        return "".join(
            part.get("text", "") for part in content if isinstance(part, dict)
        )
    return content if isinstance(content, str) else str(content)


class HttpTransport:
    """requests-backed transport posting to {base_url}/chat/completions."""

    def __init__(self, base_url: str, api_key: str | None = None, session=None):
        self.base_url = base_url.rstrip("/")
        self._headers = {"Content-Type": "application/json"}
        if api_key:
            self._headers["Authorization"] = f"Bearer {api_key}"
        self._session = session or requests.Session()

    def __call__(self, payload: dict, timeout_s: float) -> TransportReply:
        try:
            response = self._session.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=self._headers,
                timeout=timeout_s,
            )
        except requests.exceptions.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return TransportReply(status=response.status_code, body=response.text)


class MockTransport:
    """Deterministic scripted stand-in for an endpoint; no network.

    ``script`` maps keys to a response or list of responses consumed in
    order (the last one repeats). Keys are tried most-specific first:

        "<sample_id>|<schema>|constrained"
        "<sample_id>|<schema>"
        "<schema>"
        "default"

    A response is a message string (HTTP 200) or {"status": int, "text": str}.
    """

    def __init__(self, script: dict):
        self._script = {
            key: list(value) if isinstance(value, list) else [value]
            for key, value in script.items()
        }
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_file(cls, path) -> "MockTransport":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def _next_response(self, payload: dict):
        meta = payload.get("metadata", {})
        sample_id = meta.get("sample_id", "")
        schema = meta.get("schema", "")
        keys = []
        if meta.get("constrained"):
            keys.append(f"{sample_id}|{schema}|constrained")
        keys.extend([f"{sample_id}|{schema}", schema, "default"])
        for key in keys:
            queue = self._script.get(key)
            if queue:
                return queue.pop(0) if len(queue) > 1 else queue[0]
        raise TransportError(f"mock script has no entry for {keys[0]!r}")

    def __call__(self, payload: dict, timeout_s: float) -> TransportReply:
        with self._lock:
            self.calls += 1
            response = self._next_response(payload)
        if isinstance(response, dict):
            return TransportReply(
                status=int(response.get("status", 200)),
                body=response.get("text", ""),
            )
        body = json.dumps({"choices": [{"message": {"content": response}}]})
        return TransportReply(status=200, body=body)


class Gateway:
    """Thread-safe completion driver with retry, throttle, and batching."""

    def __init__(self, transport, max_attempts: int = 4, backoff_s: float = 0.5,
                 backoff_factor: float = 2.0, rate_limit_rps: float | None = None,
                 sleep=time.sleep):
        self._transport = transport
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.backoff_factor = backoff_factor
        self._sleep = sleep
        self._min_interval = 1.0 / rate_limit_rps if rate_limit_rps else 0.0
        self._throttle_lock = threading.Lock()
        self._next_slot = 0.0

    def _throttle(self):
        if not self._min_interval:
            return
        with self._throttle_lock:
            now = time.monotonic()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + self._min_interval
        if wait > 0:
            self._sleep(wait)

    def complete(self, bundle, options: GenOptions) -> RawCompletion:
        """Run one request, retrying transient failures with backoff.

        4xx schema/auth errors and media-capability rejections are never
        retried; timeouts, 429 and 5xx are, up to ``max_attempts``.
        """
        payload = build_payload(bundle, options)
        fingerprint = request_fingerprint(bundle, options)
        start = time.monotonic()
        attempt = 0
        while True:
            attempt += 1
            self._throttle()
            error: GatewayError
            try:
                reply = self._transport(payload, options.timeout_s)
            except GatewayError as exc:
                error = exc
            except Exception as exc:  # unexpected transport bug
                error = TransportError(str(exc))
            else:
                if reply.status == 200:
                    return RawCompletion(
                        text=_extract_text(reply.body),
                        model_id=options.model_id,
                        latency_ms=int((time.monotonic() - start) * 1000),
                        request_fingerprint=fingerprint,
                        attempts=attempt,
                    )
                error = _classify_status(reply.status, reply.body, bundle.attachments)

            if not _is_retryable(error):
                raise error
            if attempt >= self.max_attempts:
                raise AttemptsExhaustedError(attempt, error)
            delay = self.backoff_s * (self.backoff_factor ** (attempt - 1))
            log.debug("retrying %s after %s (attempt %d): %s",
                      bundle.sample_id, delay, attempt, error)
            self._sleep(delay)

    def complete_batch(self, bundles, options: GenOptions, parallelism: int = 1):
        """Run many requests with at most ``parallelism`` in flight.

        Results align with the input order; a failed item holds its
        GatewayError instance instead of aborting the batch.
        """
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        bundles = list(bundles)

        def run(bundle):
            try:
                return self.complete(bundle, options)
            except GatewayError as exc:
                return exc

        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(run, bundles))
