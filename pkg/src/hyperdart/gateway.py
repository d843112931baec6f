"""Uniform client for embedding and generation backends.

Two backend families share one interface: deterministic offline mocks (used by
every test and by default throughout the pipeline) and OpenAI-compatible HTTP
endpoints (``/v1/embeddings``, ``/v1/chat/completions``).  Nothing outside this
module performs network I/O.

Mock embedder formula (dimension 64): for token w with multiplicity c and
component j, the contribution is c * g(w, j) where

    g(w, j) = fnv1a64(fnv1a64(utf8(w) + b"|" + ascii(j))) / 2**63 - 1.0

and the inner hash's 16-char lowercase hex digest is what the outer hash
consumes.  The second pass is needed for avalanche: raw FNV-1a of inputs that
differ only in the last byte produces nearly identical values.  The result is
a pseudo-random value in [-1, 1); texts sharing more tokens get higher cosine
similarity, with no environment dependence.
"""

from __future__ import annotations

import enum
import os
import time
from dataclasses import dataclass, field
from typing import Callable

from .dart import fnv1a64

__all__ = [
    "ModelKind",
    "ModelProfile",
    "GatewayError",
    "GatewayTimeout",
    "HttpStatusError",
    "MalformedResponse",
    "ContentFiltered",
    "AttemptRecord",
    "CallRecord",
    "GatewayClient",
    "mock_embed_profile",
    "mock_generate_profile",
    "profile_from_env",
    "MOCK_EMBED_DIM",
]

MOCK_EMBED_DIM = 64

ENV_BASE_URL = "HYPERDART_BASE_URL"
ENV_API_KEY = "HYPERDART_API_KEY"
ENV_MODEL = "HYPERDART_MODEL"


class ModelKind(enum.Enum):
    EMBED = "EMBED"
    GENERATE = "GENERATE"


class GatewayError(RuntimeError):
    retryable = False


class GatewayTimeout(GatewayError):
    retryable = True


class HttpStatusError(GatewayError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        # 429 and server errors are worth retrying; other 4xx are permanent.
        self.retryable = status == 429 or status >= 500


class MalformedResponse(GatewayError):
    retryable = False


class ContentFiltered(GatewayError):
    retryable = False


@dataclass(frozen=True)
class ModelProfile:
    """Configuration for one backend; mock profiles never touch the network."""

    id: str
    kind: ModelKind
    backend: str = "mock"  # "mock" or "http"
    base_url: str = ""
    api_key_env: str = ENV_API_KEY
    model: str = ""
    envelope: str = "<<{id}>> {prompt}"
    embed_dim: int = MOCK_EMBED_DIM
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_s: float = 0.5


def mock_embed_profile(profile_id: str = "mock-embed-64") -> ModelProfile:
    return ModelProfile(id=profile_id, kind=ModelKind.EMBED)


def mock_generate_profile(profile_id: str = "mock-echo", envelope: str = "<<{id}>> {prompt}") -> ModelProfile:
    return ModelProfile(id=profile_id, kind=ModelKind.GENERATE, envelope=envelope)


def profile_from_env(kind: ModelKind, profile_id: str = "env-http") -> ModelProfile:
    """HTTP profile configured by HYPERDART_BASE_URL / _API_KEY / _MODEL."""
    base = os.environ.get(ENV_BASE_URL, "")
    model = os.environ.get(ENV_MODEL, "")
    return ModelProfile(id=profile_id, kind=kind, backend="http", base_url=base, model=model)


@dataclass
class AttemptRecord:
    attempt: int
    ok: bool
    error: str = ""


@dataclass
class CallRecord:
    profile_id: str
    operation: str
    attempts: list[AttemptRecord] = field(default_factory=list)
    ok: bool = False


_token_component_cache: dict[str, list[float]] = {}


def _token_components(token: str, dim: int) -> list[float]:
    key = f"{dim}:{token}"
    vec = _token_component_cache.get(key)
    if vec is None:
        raw = token.encode("utf-8")
        vec = [
            int(fnv1a64(fnv1a64(raw + b"|" + str(j).encode("ascii"))), 16) / 2**63 - 1.0
            for j in range(dim)
        ]
        _token_component_cache[key] = vec
    return vec


def mock_embedding(text: str, dim: int = MOCK_EMBED_DIM) -> list[float]:
    """The documented token-multiset hash embedding."""
    out = [0.0] * dim
    for token in text.split():
        comp = _token_components(token, dim)
        for j in range(dim):
            out[j] += comp[j]
    return out


class GatewayClient:
    """Thread-compatible client with bounded retries and a per-call trace log.

    ``transport`` is injectable for tests: it receives (method, url, payload,
    headers, timeout) and must return the decoded JSON body or raise one of the
    gateway errors.
    """

    def __init__(
        self,
        transport: Callable[..., dict] | None = None,
        sleep: Callable[[float], None] = time.sleep,
        max_total_wait_s: float = 30.0,
    ):
        self._transport = transport
        self._sleep = sleep
        self._max_total_wait_s = max_total_wait_s
        self.call_log: list[CallRecord] = []

    # -- public operations --------------------------------------------------

    def embed(self, texts: list[str], profile: ModelProfile) -> list[list[float]]:
        if profile.kind is not ModelKind.EMBED:
            raise ValueError(f"profile {profile.id!r} is not an EMBED profile")
        if not texts:
            return []
        if profile.backend == "mock":
            return [mock_embedding(t, profile.embed_dim) for t in texts]
        payload = {"model": profile.model, "input": list(texts)}
        body = self._request(profile, "embed", "/v1/embeddings", payload)
        try:
            data = body["data"]
            vectors = [list(map(float, item["embedding"])) for item in data]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"bad embeddings response: {exc}") from exc
        if len(vectors) != len(texts):
            raise MalformedResponse(f"expected {len(texts)} vectors, got {len(vectors)}")
        return vectors

    def generate(
        self,
        prompt: str,
        profile: ModelProfile,
        max_tokens: int = 256,
        temperature: float = 0.0,
        seed: int = 0,
    ) -> str:
        if profile.kind is not ModelKind.GENERATE:
            raise ValueError(f"profile {profile.id!r} is not a GENERATE profile")
        if profile.backend == "mock":
            return profile.envelope.format(id=profile.id, prompt=prompt, seed=seed)
        payload = {
            "model": profile.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": max_tokens,
            "temperature": temperature,
            "seed": seed,
        }
        body = self._request(profile, "generate", "/v1/chat/completions", payload)
        try:
            choice = body["choices"][0]
            if choice.get("finish_reason") == "content_filter":
                raise ContentFiltered("generation stopped by content filter")
            return str(choice["message"]["content"])
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"bad completion response: {exc}") from exc

    # -- plumbing -------------------------------------------------------------

    def _request(self, profile: ModelProfile, operation: str, path: str, payload: dict) -> dict:
        record = CallRecord(profile_id=profile.id, operation=operation)
        self.call_log.append(record)
        transport = self._transport or _requests_transport
        url = profile.base_url.rstrip("/") + path
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(profile.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        waited = 0.0
        last_error: GatewayError | None = None
        for attempt in range(1, profile.max_retries + 1):
            try:
                body = transport("POST", url, payload, headers, profile.timeout_s)
                record.attempts.append(AttemptRecord(attempt, ok=True))
                record.ok = True
                return body
            except GatewayError as exc:
                record.attempts.append(AttemptRecord(attempt, ok=False, error=str(exc)))
                last_error = exc
                if not exc.retryable or attempt == profile.max_retries:
                    raise
                delay = profile.backoff_s * (2 ** (attempt - 1))
                if waited + delay > self._max_total_wait_s:
                    raise
                waited += delay
                self._sleep(delay)
        raise last_error if last_error else GatewayError("unreachable")


def _requests_transport(method: str, url: str, payload: dict, headers: dict, timeout: float) -> dict:
    import requests

    try:
        resp = requests.request(method, url, json=payload, headers=headers, timeout=timeout)
    except requests.Timeout as exc:
        raise GatewayTimeout(str(exc)) from exc
    except requests.RequestException as exc:
        raise GatewayError(str(exc)) from exc
    if resp.status_code != 200:
        raise HttpStatusError(resp.status_code, resp.text)
    try:
        return resp.json()
    except ValueError as exc:
        raise MalformedResponse("response body is not JSON") from exc
