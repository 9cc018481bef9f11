"""Model-access backends: chat completion, sentence embedding, and
completion scoring.

Every capability has an HTTP client speaking the common JSON wire format
and a deterministic offline twin, so the whole engine runs and is tested
without network access. Nothing outside this module performs I/O to model
servers.
"""

from __future__ import annotations

import hashlib
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import (
    EmptyText,
    HttpStatusError,
    MalformedResponse,
    RateLimited,
    ScriptExhausted,
    ScriptNoMatch,
    TransportError,
    ZeroVector,
)

VALID_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in VALID_ROLES:
            raise ValueError(f"unknown chat role: {self.role!r}")
        if not self.content:
            raise ValueError("chat message content must be non-empty")


class ChatBackend(Protocol):
    def complete(self, messages: Sequence[ChatMessage], temperature: float = 0.0) -> str: ...


class EmbeddingBackend(Protocol):
    def embed(self, text: str) -> np.ndarray: ...

    def dimension(self) -> int: ...


class ScoringBackend(Protocol):
    def negative_log_likelihood(self, prompt: str, completion: str) -> float: ...


# ---------------------------------------------------------------------------
# HTTP plumbing


def _post_json(
    url: str,
    body: dict,
    *,
    timeout: float,
    max_attempts: int,
    backoff: float,
    headers: dict[str, str] | None = None,
) -> dict:
    """POST a JSON body and return the decoded JSON response.

    Retries with exponential backoff on HTTP 429, up to `max_attempts`
    total attempts; other non-2xx codes fail immediately.
    """
    for attempt in range(max_attempts):
        try:
            resp = requests.post(url, json=body, timeout=timeout, headers=headers)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429:
            if attempt + 1 < max_attempts:
                time.sleep(backoff * (2**attempt))
                continue
            raise RateLimited(f"still throttled after {max_attempts} attempts")
        if not 200 <= resp.status_code < 300:
            raise HttpStatusError(resp.status_code, resp.text)
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedResponse(f"response is not JSON: {exc}") from None
    raise RateLimited(f"still throttled after {max_attempts} attempts")


@dataclass
class HttpChatBackend:
    """Chat client for servers accepting `{model, messages, temperature}`
    and answering with `choices[0].message.content`."""

    endpoint: str
    model: str
    api_key_env: str | None = None
    timeout: float = 30.0
    max_attempts: int = 5
    backoff: float = 0.5

    def _headers(self) -> dict[str, str] | None:
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if key:
                return {"Authorization": f"Bearer {key}"}
        return None

    def complete(self, messages: Sequence[ChatMessage], temperature: float = 0.0) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": temperature,
        }
        data = _post_json(
            self.endpoint,
            body,
            timeout=self.timeout,
            max_attempts=self.max_attempts,
            backoff=self.backoff,
            headers=self._headers(),
        )
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise MalformedResponse("missing choices[0].message.content") from None
        if not isinstance(content, str):
            raise MalformedResponse("message content is not a string")
        return content


@dataclass
class HttpEmbeddingBackend:
    """Embedding client for servers accepting `{model, input}` and
    answering with `data[0].embedding`."""

    endpoint: str
    model: str
    dim: int
    api_key_env: str | None = None
    timeout: float = 30.0
    max_attempts: int = 5
    backoff: float = 0.5

    def dimension(self) -> int:
        return self.dim

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise EmptyText("cannot embed the empty string")
        headers = None
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if key:
                headers = {"Authorization": f"Bearer {key}"}
        data = _post_json(
            self.endpoint,
            {"model": self.model, "input": text},
            timeout=self.timeout,
            max_attempts=self.max_attempts,
            backoff=self.backoff,
            headers=headers,
        )
        try:
            vector = np.asarray(data["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError):
            raise MalformedResponse("missing data[0].embedding") from None
        if vector.ndim != 1 or vector.shape[0] != self.dim:
            raise MalformedResponse(
                f"embedding has shape {vector.shape}, expected ({self.dim},)"
            )
        return vector


@dataclass
class HttpScoringBackend:
    """Scoring client for servers accepting `{prompt, completion}` and
    answering with `{nll}` (total negative log-likelihood)."""

    endpoint: str
    timeout: float = 30.0
    max_attempts: int = 5
    backoff: float = 0.5

    def negative_log_likelihood(self, prompt: str, completion: str) -> float:
        data = _post_json(
            self.endpoint,
            {"prompt": prompt, "completion": completion},
            timeout=self.timeout,
            max_attempts=self.max_attempts,
            backoff=self.backoff,
        )
        nll = data.get("nll")
        if not isinstance(nll, (int, float)) or nll < 0:
            raise MalformedResponse(f"bad nll field: {nll!r}")
        return float(nll)


# ---------------------------------------------------------------------------
# Deterministic offline twins


class ScriptedChatBackend:
    """Chat backend that replays a fixed script.

    Each entry is `(matcher, reply)`: a call consumes and returns the
    first unconsumed entry whose matcher is `"*"` or a substring of the
    latest user message. Calls are serialized internally so script order
    is preserved under concurrency. All calls are recorded in `.calls`
    for inspection by tests.
    """

    def __init__(self, script: Sequence[tuple[str, str]]):
        self._script = [(matcher, reply) for matcher, reply in script]
        self._consumed = [False] * len(self._script)
        self._lock = threading.Lock()
        self.calls: list[tuple[tuple[ChatMessage, ...], str]] = []

    def complete(self, messages: Sequence[ChatMessage], temperature: float = 0.0) -> str:
        latest_user = ""
        for message in reversed(messages):
            if message.role == "user":
                latest_user = message.content
                break
        with self._lock:
            for i, (matcher, reply) in enumerate(self._script):
                if self._consumed[i]:
                    continue
                if matcher == "*" or matcher in latest_user:
                    self._consumed[i] = True
                    self.calls.append((tuple(messages), reply))
                    return reply
            if all(self._consumed):
                raise ScriptExhausted(f"no replies left after {len(self._script)} calls")
            digest = hashlib.sha256(latest_user.encode("utf-8")).hexdigest()[:12]
            raise ScriptNoMatch(f"no scripted reply matches message sha256:{digest}")


def scripted_chat(script: Sequence[tuple[str, str]]) -> ScriptedChatBackend:
    """Build a scripted chat backend from ordered (matcher, reply) pairs."""
    return ScriptedChatBackend(script)


class HashEmbedder:
    """Deterministic sentence embedder: signed character-trigram hashing.

    Each trigram is hashed to a bucket and a sign; counts are accumulated
    and L2-normalized. Identical strings always map to identical vectors.
    Signed hashing spreads cosine distances over (0, 2) rather than
    capping them at 1, which keeps radius schedules above 1 meaningful.
    """

    def __init__(self, dim: int):
        if dim < 8:
            raise ValueError(f"dimension must be >= 8, got {dim}")
        self._dim = dim

    def dimension(self) -> int:
        return self._dim

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise EmptyText("cannot embed the empty string")
        grams = [text[i : i + 3] for i in range(len(text) - 2)] if len(text) >= 3 else [text]
        vector = np.zeros(self._dim, dtype=np.float64)
        for gram in grams:
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "big")
            bucket = value % self._dim
            sign = 1.0 if (value >> 63) & 1 == 0 else -1.0
            vector[bucket] += sign
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            raise ZeroVector(f"trigram signs cancelled for {text!r}")
        return vector / norm


def hash_embedder(dimension: int) -> HashEmbedder:
    """Build the deterministic trigram-hash embedder; dimension >= 8."""
    return HashEmbedder(dimension)


@dataclass
class KeyedScorer:
    """Deterministic scorer with controllable, ordered risks.

    The expected answer (key phrase) for a prompt is the first entry in
    `keys` whose matcher is `"*"` or a substring of the prompt. The score
    is a sum of per-token costs over the completion's whitespace tokens:
    `match_cost` where the token equals the key token at the same
    position, `miss_cost` otherwise, times `scale`. Sums over tokens are
    non-negative and grow monotonically when the completion is extended;
    among equal-length completions the key phrase itself scores lowest.
    """

    keys: Sequence[tuple[str, str]] = ()
    match_cost: float = 0.05
    miss_cost: float = 1.0
    scale: float = 1.0

    calls: list[tuple[str, str, float]] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def key_phrase(self, prompt: str) -> str:
        for matcher, key in self.keys:
            if matcher == "*" or matcher in prompt:
                return key
        return ""

    def negative_log_likelihood(self, prompt: str, completion: str) -> float:
        key_tokens = self.key_phrase(prompt).split()
        total = 0.0
        for i, token in enumerate(completion.split()):
            matched = i < len(key_tokens) and token == key_tokens[i]
            total += self.match_cost if matched else self.miss_cost
        nll = total * self.scale
        with self._lock:
            self.calls.append((prompt, completion, nll))
        return nll
