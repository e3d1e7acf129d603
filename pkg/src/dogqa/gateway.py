"""Chat-completion provider abstraction.

Two backends share one call signature: an HTTP client for any
chat-completions-compatible endpoint, and a scripted provider that replays
canned responses for deterministic runs.  ``LlmGateway`` wraps either with a
response cache, a parallelism bound, and an exchange log.

Endpoint and key for the HTTP backend come from ``DOG_LLM_ENDPOINT`` and
``DOG_LLM_API_KEY`` unless passed explicitly.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import requests

from .errors import ConfigError, ProviderError, UnmatchedRequestError

ROLES = ("system", "user", "assistant")
ENV_ENDPOINT = "DOG_LLM_ENDPOINT"
ENV_API_KEY = "DOG_LLM_API_KEY"
ENV_MODEL = "DOG_LLM_MODEL"
RETRIABLE_STATUSES = (429, 500, 502, 503, 504)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        object.__setattr__(self, "messages", tuple(self.messages))

    def rendered(self) -> str:
        """Flat text view used for rule matching and cache keys."""
        return "\n".join(f"{m.role}: {m.content}" for m in self.messages)

    def cache_key(self) -> str:
        return hashlib.sha256(
            f"{self.model}\x00{self.temperature}\x00{self.rendered()}".encode("utf-8")
        ).hexdigest()


def request_from_messages(messages, model: str = "scripted", temperature: float = 0.0,
                          max_tokens: int | None = None) -> CompletionRequest:
    msgs = tuple(
        m if isinstance(m, ChatMessage) else ChatMessage(m["role"], m["content"])
        for m in messages
    )
    return CompletionRequest(model=model, messages=msgs, temperature=temperature,
                             max_tokens=max_tokens)


class HttpChatProvider:
    """POSTs ``{model, messages, temperature, max_tokens}`` and reads
    ``choices[0].message.content``.

    Rate limits and transient server errors are retried with exponential
    backoff up to ``max_attempts``; the request payload is never altered
    between attempts.
    """

    def __init__(self, endpoint: str | None = None, api_key: str | None = None,
                 timeout: float = 60.0, max_attempts: int = 4,
                 backoff_base: float = 0.5, backoff_cap: float = 8.0):
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        if not self.endpoint:
            raise ConfigError(f"no endpoint configured; set {ENV_ENDPOINT} or pass endpoint=")
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self._session = requests.Session()

    def complete(self, request: CompletionRequest) -> str:
        payload = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        }
        if request.max_tokens is not None:
            payload["max_tokens"] = request.max_tokens
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_status = None
        last_error = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(min(self.backoff_cap, self.backoff_base * 2 ** (attempt - 1)))
            try:
                resp = self._session.post(self.endpoint, json=payload, headers=headers,
                                          timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code == 200:
                try:
                    return resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise ProviderError(f"malformed completion response: {exc}") from exc
            last_status = resp.status_code
            if resp.status_code not in RETRIABLE_STATUSES:
                raise ProviderError(f"HTTP {resp.status_code} from {self.endpoint}",
                                    status=resp.status_code)
        if last_status is not None:
            raise ProviderError(
                f"HTTP {last_status} from {self.endpoint} after {self.max_attempts} attempts",
                status=last_status,
            )
        raise ProviderError(f"transport failure talking to {self.endpoint}: {last_error}")


@dataclass
class ScriptedRule:
    """First matching rule wins; ``consume_once`` rules fire a single time.

    ``matcher`` is a substring tested against the rendered request, or a
    callable ``str -> bool``.
    """

    matcher: str | Callable[[str], bool]
    response: str
    consume_once: bool = False
    consumed: bool = field(default=False, compare=False)

    def matches(self, rendered: str) -> bool:
        if self.consumed:
            return False
        if callable(self.matcher):
            return bool(self.matcher(rendered))
        return self.matcher in rendered


class ScriptedProvider:
    """Deterministic provider driven by an ordered rule list.

    A request no rule matches is a hard error: silent mismatches would let a
    broken test pass on garbage.  Rule consumption is atomic under a lock so
    concurrent questions cannot double-fire a consume-once rule.
    """

    def __init__(self, rules: list[ScriptedRule] | None = None):
        self.rules = list(rules or [])
        self.calls = 0
        self.requests: list[CompletionRequest] = []
        self._lock = threading.Lock()

    def add(self, matcher, response, consume_once=False) -> "ScriptedProvider":
        self.rules.append(ScriptedRule(matcher, response, consume_once))
        return self

    def complete(self, request: CompletionRequest) -> str:
        rendered = request.rendered()
        with self._lock:
            self.calls += 1
            self.requests.append(request)
            for rule in self.rules:
                if rule.matches(rendered):
                    if rule.consume_once:
                        rule.consumed = True
                    return rule.response
        raise UnmatchedRequestError(
            f"no scripted rule matches request starting with: {rendered[:80]!r}"
        )


def load_rules_file(path) -> list[ScriptedRule]:
    """Rules file: a JSON array of {match, response, consume_once?} objects."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ConfigError("rules file must contain a JSON array")
    rules = []
    for i, item in enumerate(raw):
        try:
            rules.append(ScriptedRule(item["match"], item["response"],
                                      bool(item.get("consume_once", False))))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad rule at index {i}: {exc}") from exc
    return rules


class LlmGateway:
    """Caching, concurrency-bounding front door for a provider.

    The cache is keyed on (model, rendered messages, temperature) and lives
    in memory for the run; pass ``cache_path`` to additionally persist hits as
    newline-delimited JSON and reload them next run.  ``max_parallel`` bounds
    simultaneous in-flight provider calls.
    """

    def __init__(self, provider, use_cache: bool = True, max_parallel: int = 4,
                 cache_path=None, keep_exchanges: bool = True):
        self.provider = provider
        self.use_cache = use_cache
        self.cache_path = cache_path
        self.keep_exchanges = keep_exchanges
        self.exchanges: list[dict] = []
        self.stats = {"calls": 0, "cache_hits": 0, "prompt_chars": 0, "completion_chars": 0}
        self._cache: dict[str, str] = {}
        self._lock = threading.Lock()
        self._sem = threading.Semaphore(max_parallel)
        if cache_path:
            self._load_cache_file()

    def _load_cache_file(self):
        try:
            fh = open(self.cache_path, encoding="utf-8")
        except FileNotFoundError:
            return
        with fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._cache[record["key_hash"]] = record["response"]

    def _spill(self, key: str, request: CompletionRequest, response: str):
        record = {
            "key_hash": key,
            "request": {
                "model": request.model,
                "temperature": request.temperature,
                "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            },
            "response": response,
        }
        with open(self.cache_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def complete(self, request: CompletionRequest, use_cache: bool | None = None) -> str:
        cacheable = self.use_cache if use_cache is None else use_cache
        key = request.cache_key() if cacheable else None
        if key is not None:
            with self._lock:
                if key in self._cache:
                    self.stats["cache_hits"] += 1
                    return self._cache[key]
        with self._sem:
            response = self.provider.complete(request)
        with self._lock:
            self.stats["calls"] += 1
            self.stats["prompt_chars"] += len(request.rendered())
            self.stats["completion_chars"] += len(response)
            if self.keep_exchanges:
                self.exchanges.append({"request": request.rendered(), "response": response})
            if key is not None and key not in self._cache:
                self._cache[key] = response
                if self.cache_path:
                    self._spill(key, request, response)
        return response

    @property
    def cache_size(self) -> int:
        return len(self._cache)


def complete(provider, request: CompletionRequest) -> str:
    """Single uncached completion against a bare provider."""
    return provider.complete(request)


def cached_complete(gateway: LlmGateway, request: CompletionRequest) -> str:
    return gateway.complete(request, use_cache=True)
