"""Uniform chat-completion access with live and record/replay backends.

A :class:`Gateway` wraps one backend behind a retry policy. The live
backend speaks the OpenAI-compatible chat-completions protocol over
HTTPS; the replay backend answers from a cassette of recorded exchanges
keyed by request fingerprint and performs no network operations at all.
Recording wraps any backend and appends each exchange to a cassette file,
so deterministic fixtures can be captured once and replayed forever.

Environment variables (live backend defaults): ``ARCHLOOP_API_KEY``
(falls back to ``OPENAI_API_KEY``), ``ARCHLOOP_BASE_URL``, and
``ARCHLOOP_MODEL``.

Cassette file format: a JSON list of ``{"fingerprint", "response_text"}``
objects; fingerprints must be unique within a file.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

__all__ = [
    "DEFAULT_BASE_URL",
    "DEFAULT_MODEL",
    "DEFAULT_TEMPERATURE",
    "CompletionRequest",
    "CompletionUsage",
    "CompletionResult",
    "GatewayError",
    "ProviderError",
    "CassetteMiss",
    "CassetteError",
    "ReplayCassette",
    "fingerprint",
    "LiveBackend",
    "ReplayBackend",
    "RecordBackend",
    "ScriptedBackend",
    "Gateway",
    "gateway_from_env",
]

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4o-2024-08-06"
DEFAULT_TEMPERATURE = 0.2
DEFAULT_MAX_OUTPUT_TOKENS = 4096

_TRANSIENT_STATUSES = frozenset({408, 409, 429, 500, 502, 503, 504})


class GatewayError(Exception):
    """Base class for gateway errors."""

    code = "GatewayError"


class ProviderError(GatewayError):
    """HTTP, auth, or rate-limit failure from the live provider.

    ``transient`` marks errors worth retrying; ``retry_after`` carries the
    provider's requested delay in seconds when it sent one.
    """

    code = "ProviderError"

    def __init__(
        self,
        message: str,
        *,
        transient: bool = False,
        retry_after: float | None = None,
    ):
        super().__init__(message)
        self.transient = transient
        self.retry_after = retry_after


class CassetteMiss(GatewayError):
    """Replay mode had no recorded entry for the request.

    Never falls through to the live provider.
    """

    code = "CassetteMiss"


class CassetteError(GatewayError):
    """A cassette file violated its format (bad JSON, duplicate keys)."""

    code = "CassetteError"


@dataclass(frozen=True)
class CompletionRequest:
    """A single-shot prompt: system text, user text, and model params."""

    system_text: str
    user_text: str
    model: str
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self) -> None:
        if not self.system_text or not self.user_text:
            raise ValueError("system_text and user_text must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        # Normalize so int/float literals fingerprint identically.
        object.__setattr__(self, "temperature", float(self.temperature))


@dataclass(frozen=True)
class CompletionUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class CompletionResult:
    text: str
    usage: CompletionUsage = field(default_factory=CompletionUsage)
    backend: str = "live"  # "live" or "replay"


def fingerprint(req: CompletionRequest) -> str:
    """Deterministic hash of a request's identity.

    Covers (system_text, user_text, model, temperature) and deliberately
    excludes max_output_tokens. Stable across processes and platforms:
    canonical ASCII JSON hashed with SHA-256.
    """
    payload = json.dumps(
        {
            "model": req.model,
            "system_text": req.system_text,
            "temperature": req.temperature,
            "user_text": req.user_text,
        },
        sort_keys=True,
        ensure_ascii=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("ascii")).hexdigest()


class Backend(Protocol):
    def complete(self, req: CompletionRequest) -> CompletionResult: ...


@dataclass
class ReplayCassette:
    """An ordered set of recorded exchanges, keyed by request fingerprint."""

    entries: dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "ReplayCassette":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CassetteError(f"cannot load cassette {path}: {exc}") from exc
        if not isinstance(raw, list):
            raise CassetteError(f"cassette {path}: expected a JSON list")
        entries: dict[str, str] = {}
        for i, item in enumerate(raw):
            if (
                not isinstance(item, dict)
                or not isinstance(item.get("fingerprint"), str)
                or not isinstance(item.get("response_text"), str)
            ):
                raise CassetteError(
                    f"cassette {path}: entry {i} must be "
                    '{"fingerprint", "response_text"}'
                )
            fp = item["fingerprint"]
            if fp in entries:
                raise CassetteError(
                    f"cassette {path}: duplicate fingerprint {fp} at entry {i}"
                )
            entries[fp] = item["response_text"]
        return cls(entries=entries)

    def save(self, path: str | Path) -> None:
        payload = [
            {"fingerprint": fp, "response_text": text}
            for fp, text in self.entries.items()
        ]
        Path(path).write_text(
            json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    def response_for(self, fp: str) -> str | None:
        return self.entries.get(fp)


class LiveBackend:
    """OpenAI-compatible chat completions over HTTPS."""

    def __init__(
        self,
        *,
        api_key: str,
        base_url: str = DEFAULT_BASE_URL,
        client: httpx.Client | None = None,
        timeout: float = 120.0,
    ):
        self._api_key = api_key
        self._base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, req: CompletionRequest) -> CompletionResult:
        try:
            response = self._client.post(
                f"{self._base_url}/chat/completions",
                headers={"Authorization": f"Bearer {self._api_key}"},
                json={
                    "model": req.model,
                    "temperature": req.temperature,
                    "max_tokens": req.max_output_tokens,
                    "messages": [
                        {"role": "system", "content": req.system_text},
                        {"role": "user", "content": req.user_text},
                    ],
                },
            )
        except httpx.HTTPError as exc:
            raise ProviderError(f"transport failure: {exc}", transient=True) from exc

        if response.status_code != 200:
            retry_after = None
            header = response.headers.get("retry-after")
            if header is not None:
                try:
                    retry_after = float(header)
                except ValueError:
                    retry_after = None
            raise ProviderError(
                f"provider returned HTTP {response.status_code}: "
                f"{response.text[:500]}",
                transient=response.status_code in _TRANSIENT_STATUSES,
                retry_after=retry_after,
            )

        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc
        if not text:
            raise ProviderError("provider returned an empty completion", transient=True)

        usage = body.get("usage") or {}
        return CompletionResult(
            text=text,
            usage=CompletionUsage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            ),
            backend="live",
        )


class ReplayBackend:
    """Deterministic playback from a cassette. No network, ever."""

    def __init__(self, cassette: ReplayCassette | str | Path):
        if not isinstance(cassette, ReplayCassette):
            cassette = ReplayCassette.load(cassette)
        self._cassette = cassette

    def complete(self, req: CompletionRequest) -> CompletionResult:
        fp = fingerprint(req)
        text = self._cassette.response_for(fp)
        if text is None:
            raise CassetteMiss(f"no cassette entry for fingerprint {fp}")
        return CompletionResult(text=text, backend="replay")


class RecordBackend:
    """Pass-through wrapper that appends each exchange to a cassette file.

    Identical repeat requests are recorded once; a repeat with a different
    response is an error (a cassette cannot represent it).
    """

    def __init__(self, inner: Backend, cassette_path: str | Path):
        self._inner = inner
        self._path = Path(cassette_path)
        self._lock = threading.Lock()
        if self._path.exists():
            self._cassette = ReplayCassette.load(self._path)
        else:
            self._cassette = ReplayCassette()

    def complete(self, req: CompletionRequest) -> CompletionResult:
        result = self._inner.complete(req)
        fp = fingerprint(req)
        with self._lock:
            existing = self._cassette.response_for(fp)
            if existing is None:
                self._cassette.entries[fp] = result.text
                self._cassette.save(self._path)
            elif existing != result.text:
                raise CassetteError(
                    f"conflicting responses for fingerprint {fp}"
                )
        return result


class ScriptedBackend:
    """Test double that returns queued responses in order.

    ``responses`` entries may be strings or callables taking the request
    (for content-dependent scripting). Exhausting the script is an error.
    """

    def __init__(
        self,
        responses: Iterable[str | Callable[[CompletionRequest], str]] = (),
    ):
        self._responses = list(responses)
        self.requests: list[CompletionRequest] = []

    def push(self, *responses: str | Callable[[CompletionRequest], str]) -> None:
        self._responses.extend(responses)

    def complete(self, req: CompletionRequest) -> CompletionResult:
        self.requests.append(req)
        if not self._responses:
            raise ProviderError("scripted backend exhausted", transient=False)
        entry = self._responses.pop(0)
        text = entry(req) if callable(entry) else entry
        return CompletionResult(text=text, backend="replay")


class Gateway:
    """Backend access with bounded retries and shared request defaults.

    Transient :class:`ProviderError` failures are retried with exponential
    backoff, at most ``max_attempts`` total attempts; non-transient errors
    and cassette misses are never retried. Stateless across calls, so one
    gateway may serve concurrent sessions.
    """

    def __init__(
        self,
        backend: Backend,
        *,
        model: str = DEFAULT_MODEL,
        temperature: float = DEFAULT_TEMPERATURE,
        max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._backend = backend
        self.model = model
        self.temperature = temperature
        self.max_output_tokens = max_output_tokens
        self._max_attempts = max_attempts
        self._backoff_base = backoff_base
        self._sleep = sleep

    def request(
        self,
        system_text: str,
        user_text: str,
        *,
        model: str | None = None,
        temperature: float | None = None,
        max_output_tokens: int | None = None,
    ) -> CompletionRequest:
        """Build a request from gateway defaults plus overrides."""
        return CompletionRequest(
            system_text=system_text,
            user_text=user_text,
            model=model or self.model,
            temperature=self.temperature if temperature is None else temperature,
            max_output_tokens=max_output_tokens or self.max_output_tokens,
        )

    def complete(self, req: CompletionRequest) -> CompletionResult:
        attempt = 0
        while True:
            attempt += 1
            try:
                return self._backend.complete(req)
            except ProviderError as exc:
                if not exc.transient or attempt >= self._max_attempts:
                    raise
                delay = self._backoff_base * (2 ** (attempt - 1))
                if exc.retry_after is not None:
                    delay = max(delay, exc.retry_after)
                self._sleep(delay)


def gateway_from_env(
    *,
    replay: str | Path | None = None,
    record: str | Path | None = None,
    model: str | None = None,
) -> Gateway:
    """Build a gateway from the environment.

    ``replay`` selects cassette playback (zero network); ``record`` wraps
    the live backend and captures a cassette while passing traffic
    through.
    """
    model = model or os.environ.get("ARCHLOOP_MODEL", DEFAULT_MODEL)
    if replay is not None:
        return Gateway(ReplayBackend(replay), model=model)

    api_key = os.environ.get("ARCHLOOP_API_KEY") or os.environ.get("OPENAI_API_KEY")
    if not api_key:
        raise ProviderError(
            "no API key configured; set ARCHLOOP_API_KEY or OPENAI_API_KEY, "
            "or run with a replay cassette"
        )
    backend: Backend = LiveBackend(
        api_key=api_key,
        base_url=os.environ.get("ARCHLOOP_BASE_URL", DEFAULT_BASE_URL),
    )
    if record is not None:
        backend = RecordBackend(backend, record)
    return Gateway(backend, model=model)
