"""Unified chat-completion client over heterogeneous endpoints.

Two wire dialects sit behind one contract: OpenAI-compatible servers and
native-JSON-mode providers. Everything downstream is dialect-blind. A
deterministic mock transport with scriptable faults backs the offline test
suite. API keys are resolved from environment variables named by the model
spec and never stored or logged.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import httpx


class ProviderKind(str, Enum):
    OPENAI_COMPATIBLE = "openai_compatible"
    NATIVE_JSON = "native_json"
    MOCK = "mock"


class FinishReason(str, Enum):
    STOP = "Stop"
    LENGTH = "Length"
    OTHER = "Other"


class ErrorClass(str, Enum):
    QUOTA_EXCEEDED = "QuotaExceeded"
    TRUNCATED = "Truncated"
    NETWORK_ERROR = "NetworkError"
    AUTH_ERROR = "AuthError"
    MALFORMED_RESPONSE = "MalformedResponse"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class ModelSpec:
    provider_kind: ProviderKind
    model_id: str
    base_url: str = ""
    api_key_ref: str = ""
    temperature: float = 0.0
    max_output_tokens: int = 2048
    timeout_ms: int = 60_000
    json_mode: bool = True
    max_concurrency: int = 4

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be nonempty")
        if self.provider_kind != ProviderKind.MOCK and not self.base_url.startswith(
            ("http://", "https://")
        ):
            raise ValueError(f"base_url {self.base_url!r} is not a valid http(s) URL")
        if self.temperature < 0 or self.max_output_tokens <= 0 or self.timeout_ms <= 0:
            raise ValueError("temperature/max_output_tokens/timeout_ms out of range")


@dataclass(frozen=True)
class ChatRequest:
    system: str
    user: str
    json_mode: bool = True

    def __post_init__(self):
        if not self.user:
            raise ValueError("user message must be nonempty")


@dataclass(frozen=True)
class RawResponse:
    body_text: str
    finish_reason: FinishReason
    http_status: int
    prompt_tokens: Optional[int] = None
    output_tokens: Optional[int] = None


class ProviderError(Exception):
    def __init__(self, error_class: ErrorClass, detail: str, retryable: bool):
        super().__init__(f"{error_class.value}: {detail}")
        self.error_class = error_class
        self.detail = detail
        self.retryable = retryable


class MissingFixtureError(KeyError):
    """Mock transport has no fixture for a request and no default left."""


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 4
    base_delay_ms: int = 500
    backoff_factor: float = 2.0
    jitter_fraction: float = 0.2

    def __post_init__(self):
        if self.max_attempts < 1 or self.base_delay_ms < 1:
            raise ValueError("max_attempts and base_delay_ms must be positive")
        if self.backoff_factor <= 1.0 or not (0.0 <= self.jitter_fraction <= 1.0):
            raise ValueError("backoff_factor must exceed 1, jitter_fraction in [0,1]")


@dataclass(frozen=True)
class AttemptRecord:
    """One raw exchange, successful or not; the unit of the interaction log."""

    attempt: int
    request: ChatRequest
    response: Optional[RawResponse]
    error: Optional[ProviderError]


def classify_failure(resp_or_err) -> Optional[ProviderError]:
    """Map a completed exchange or transport failure to an error class.

    Returns None for a usable response. Truncated output and empty bodies are
    retried (another sample may come back whole); auth and other client-side
    rejections are not.
    """
    if isinstance(resp_or_err, ProviderError):
        return resp_or_err
    if isinstance(resp_or_err, httpx.TimeoutException):
        return ProviderError(ErrorClass.TIMEOUT, str(resp_or_err), retryable=True)
    if isinstance(resp_or_err, Exception):
        return ProviderError(ErrorClass.NETWORK_ERROR, str(resp_or_err), retryable=True)

    resp: RawResponse = resp_or_err
    status = resp.http_status
    if status == 429:
        return ProviderError(ErrorClass.QUOTA_EXCEEDED, "http 429", retryable=True)
    if status in (401, 403):
        return ProviderError(ErrorClass.AUTH_ERROR, f"http {status}", retryable=False)
    if status >= 500:
        return ProviderError(ErrorClass.NETWORK_ERROR, f"http {status}", retryable=True)
    if not (200 <= status < 300):
        return ProviderError(
            ErrorClass.MALFORMED_RESPONSE, f"http {status}", retryable=False
        )
    if resp.finish_reason == FinishReason.LENGTH:
        return ProviderError(
            ErrorClass.TRUNCATED, "output hit the token limit", retryable=True
        )
    if not resp.body_text.strip():
        return ProviderError(ErrorClass.MALFORMED_RESPONSE, "empty body", retryable=True)
    return None


def _resolve_key(spec: ModelSpec) -> str:
    if not spec.api_key_ref:
        return ""
    key = os.environ.get(spec.api_key_ref, "")
    if not key:
        raise ProviderError(
            ErrorClass.AUTH_ERROR,
            f"environment variable {spec.api_key_ref} is not set",
            retryable=False,
        )
    return key


class HttpTransport:
    """Issues one HTTP chat-completion call in the model spec's wire dialect."""

    def __init__(self):
        self._client = httpx.Client()

    def send(self, spec: ModelSpec, req: ChatRequest) -> RawResponse:
        key = _resolve_key(spec)
        timeout = spec.timeout_ms / 1000
        if spec.provider_kind == ProviderKind.OPENAI_COMPATIBLE:
            url, headers, payload = self._openai_call(spec, req, key)
        else:
            url, headers, payload = self._native_call(spec, req, key)
        try:
            resp = self._client.post(url, headers=headers, json=payload, timeout=timeout)
        except httpx.TimeoutException as exc:
            raise ProviderError(ErrorClass.TIMEOUT, str(exc), retryable=True) from exc
        except httpx.HTTPError as exc:
            raise ProviderError(ErrorClass.NETWORK_ERROR, str(exc), retryable=True) from exc
        if not (200 <= resp.status_code < 300):
            return RawResponse(resp.text, FinishReason.OTHER, resp.status_code)
        try:
            data = resp.json()
            if spec.provider_kind == ProviderKind.OPENAI_COMPATIBLE:
                return self._parse_openai(data, resp.status_code)
            return self._parse_native(data, resp.status_code)
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(
                ErrorClass.MALFORMED_RESPONSE,
                f"unrecognized response envelope: {exc}",
                retryable=True,
            ) from exc

    @staticmethod
    def _openai_call(spec, req, key):
        url = spec.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        messages = []
        if req.system:
            messages.append({"role": "system", "content": req.system})
        messages.append({"role": "user", "content": req.user})
        payload = {
            "model": spec.model_id,
            "messages": messages,
            "temperature": spec.temperature,
            "max_tokens": spec.max_output_tokens,
        }
        if req.json_mode:
            payload["response_format"] = {"type": "json_object"}
        return url, headers, payload

    @staticmethod
    def _parse_openai(data, status) -> RawResponse:
        choice = data["choices"][0]
        finish = {"stop": FinishReason.STOP, "length": FinishReason.LENGTH}.get(
            choice.get("finish_reason"), FinishReason.OTHER
        )
        usage = data.get("usage") or {}
        return RawResponse(
            body_text=choice["message"].get("content") or "",
            finish_reason=finish,
            http_status=status,
            prompt_tokens=usage.get("prompt_tokens"),
            output_tokens=usage.get("completion_tokens"),
        )

    @staticmethod
    def _native_call(spec, req, key):
        url = spec.base_url.rstrip("/") + f"/models/{spec.model_id}:generateContent"
        headers = {"x-goog-api-key": key} if key else {}
        generation = {
            "temperature": spec.temperature,
            "maxOutputTokens": spec.max_output_tokens,
        }
        if req.json_mode:
            generation["responseMimeType"] = "application/json"
        payload = {
            "contents": [{"role": "user", "parts": [{"text": req.user}]}],
            "generationConfig": generation,
        }
        if req.system:
            payload["system_instruction"] = {"parts": [{"text": req.system}]}
        return url, headers, payload

    @staticmethod
    def _parse_native(data, status) -> RawResponse:
        candidate = data["candidates"][0]
        parts = candidate.get("content", {}).get("parts", [])
        body = "".join(p.get("text", "") for p in parts)
        finish = {"STOP": FinishReason.STOP, "MAX_TOKENS": FinishReason.LENGTH}.get(
            candidate.get("finishReason"), FinishReason.OTHER
        )
        usage = data.get("usageMetadata") or {}
        return RawResponse(
            body_text=body,
            finish_reason=finish,
            http_status=status,
            prompt_tokens=usage.get("promptTokenCount"),
            output_tokens=usage.get("candidatesTokenCount"),
        )


@dataclass
class FaultScript:
    """Deterministic fault injection for the mock transport.

    Faults apply to requests whose user message contains ``match_substring``
    (all requests when unset). ``status_code`` is returned for the first
    ``status_times`` matching calls (forever when ``status_times`` is None).
    """

    truncate_after: Optional[int] = None
    status_code: Optional[int] = None
    status_times: Optional[int] = None
    delay_ms: Optional[int] = None
    match_substring: Optional[str] = None


class MockTransport:
    """Fixture-driven transport: exact user-message keys, then ordered defaults."""

    def __init__(
        self,
        fixtures: Optional[dict[str, str]] = None,
        defaults: Optional[list[str]] = None,
        fault: Optional[FaultScript] = None,
    ):
        self.fixtures = dict(fixtures or {})
        self.defaults = list(defaults or [])
        self.fault = fault
        self.call_count = 0
        self._default_idx = 0
        self._status_served = 0
        self._lock = threading.Lock()

    def send(self, spec: ModelSpec, req: ChatRequest) -> RawResponse:
        fault = self.fault
        with self._lock:
            self.call_count += 1
            applies = fault is not None and (
                fault.match_substring is None or fault.match_substring in req.user
            )
            if applies and fault.status_code is not None:
                if fault.status_times is None or self._status_served < fault.status_times:
                    self._status_served += 1
                    return RawResponse("", FinishReason.OTHER, fault.status_code)
            if req.user in self.fixtures:
                body = self.fixtures[req.user]
            elif self._default_idx < len(self.defaults):
                body = self.defaults[self._default_idx]
                self._default_idx += 1
            else:
                raise MissingFixtureError(
                    f"no fixture for user message {req.user[:80]!r} and no default left"
                )
        if applies and fault.delay_ms is not None and fault.delay_ms > spec.timeout_ms:
            raise ProviderError(
                ErrorClass.TIMEOUT,
                f"scripted delay {fault.delay_ms}ms exceeded {spec.timeout_ms}ms",
                retryable=True,
            )
        if applies and fault.truncate_after is not None and len(body) > fault.truncate_after:
            return RawResponse(body[: fault.truncate_after], FinishReason.LENGTH, 200)
        return RawResponse(body, FinishReason.STOP, 200)


def _load_fixture_file(path: str) -> MockTransport:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    fault = FaultScript(**data["fault"]) if data.get("fault") else None
    return MockTransport(
        fixtures=data.get("fixtures"), defaults=data.get("defaults"), fault=fault
    )


def build_transport(spec: ModelSpec):
    if spec.provider_kind == ProviderKind.MOCK:
        if spec.base_url:
            return _load_fixture_file(spec.base_url)
        return MockTransport()
    return HttpTransport()


def complete(
    spec: ModelSpec,
    req: ChatRequest,
    policy: RetryPolicy,
    *,
    transport=None,
    on_attempt: Optional[Callable[[AttemptRecord], None]] = None,
    sleep: Callable[[float], None] = time.sleep,
    rng: Optional[random.Random] = None,
) -> RawResponse:
    """Issue a chat completion, retrying retryable failures with jittered backoff.

    Every attempt, terminal or not, is reported through ``on_attempt``. Raises
    the final ProviderError once attempts are exhausted or a non-retryable
    failure occurs.
    """
    transport = transport if transport is not None else build_transport(spec)
    rng = rng if rng is not None else random
    for attempt in range(1, policy.max_attempts + 1):
        response: Optional[RawResponse] = None
        try:
            response = transport.send(spec, req)
            error = classify_failure(response)
        except ProviderError as exc:
            error = exc
        if on_attempt is not None:
            on_attempt(AttemptRecord(attempt, req, response, error))
        if error is None:
            return response
        if not error.retryable or attempt == policy.max_attempts:
            raise error
        delay_ms = policy.base_delay_ms * policy.backoff_factor ** (attempt - 1)
        delay_ms *= 1.0 + rng.uniform(-policy.jitter_fraction, policy.jitter_fraction)
        sleep(delay_ms / 1000)
    raise AssertionError("unreachable: retry loop always returns or raises")


class ChatClient:
    """A model spec bound to a transport, with a per-spec concurrency cap."""

    def __init__(
        self,
        spec: ModelSpec,
        transport=None,
        *,
        sleep: Callable[[float], None] = time.sleep,
        rng: Optional[random.Random] = None,
    ):
        self.spec = spec
        self.transport = transport if transport is not None else build_transport(spec)
        self._sleep = sleep
        self._rng = rng
        self._slots = threading.Semaphore(spec.max_concurrency)

    def complete(
        self,
        req: ChatRequest,
        policy: RetryPolicy,
        on_attempt: Optional[Callable[[AttemptRecord], None]] = None,
    ) -> RawResponse:
        bounded = _BoundedTransport(self.transport, self._slots)
        return complete(
            self.spec,
            req,
            policy,
            transport=bounded,
            on_attempt=on_attempt,
            sleep=self._sleep,
            rng=self._rng,
        )


class _BoundedTransport:
    """Holds the concurrency slot only while a request is in flight, not during backoff."""

    def __init__(self, inner, slots: threading.Semaphore):
        self._inner = inner
        self._slots = slots

    def send(self, spec, req):
        with self._slots:
            return self._inner.send(spec, req)


def mock_provider(
    fixtures: Optional[dict[str, str]] = None,
    fault: Optional[FaultScript] = None,
    defaults: Optional[list[str]] = None,
    *,
    model_id: str = "mock-model",
    sleep: Callable[[float], None] = lambda s: None,
    rng: Optional[random.Random] = None,
) -> ChatClient:
    """Offline client over the mock transport; backoff sleeps are no-ops by default."""
    spec = ModelSpec(provider_kind=ProviderKind.MOCK, model_id=model_id)
    transport = MockTransport(fixtures=fixtures, defaults=defaults, fault=fault)
    return ChatClient(spec, transport, sleep=sleep, rng=rng)
