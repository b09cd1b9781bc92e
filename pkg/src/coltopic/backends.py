"""Classification backends, response parsing and the append-only run store.

Three backend kinds share one contract (a single stateless completion call
per run, no conversation carry-over):

* ``openai-chat``: a live chat-completions HTTP API, with bounded retries on
  transport and rate-limit errors only.
* ``replay``: deterministic playback of raw responses from a previously
  recorded store, keyed by (backend, dataset, context, run index).
* ``mock``: seeded synthetic responses derived from the prompt itself, for
  demos and fixtures.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import httpx

from coltopic.promptgen import PromptText
from coltopic.vocab import Vocabulary, normalize_label, parse_vocabulary


class BackendError(Exception):
    """Base class for classification-call failures (no run record is produced)."""


class TransportError(BackendError):
    """Network-level failure talking to a live backend."""


class RateLimitError(TransportError):
    """Provider rate limit still in force after bounded retries."""


class AuthenticationError(BackendError):
    """Missing or rejected credential."""


class OversizePromptError(BackendError):
    """Provider reported the prompt exceeds its size limit."""


class ReplayMissError(BackendError):
    """The replay source has no recorded response for the requested run."""


class ResponseParseError(ValueError):
    """No well-formed JSON object could be located in a raw response."""


class StoreError(ValueError):
    """The run store is malformed or an append would violate key uniqueness."""


# --------------------------------------------------------------------------
# Run records and the append-only store


RunKey = tuple[str, str, bool, int]


@dataclass(frozen=True)
class RunRecord:
    """One execution of the classification task for one dataset by one backend.

    ``assignments`` is parallel to the dataset's headers; an absent entry
    means the header received no classification. A set ``error`` marks the
    whole run failed, in which case every assignment is absent.
    """

    backend: str
    dataset_id: str
    run_index: int
    with_context: bool
    raw_response: str
    assignments: tuple[str | None, ...]
    error: str | None = None
    timestamp: str = ""
    params: Mapping[str, Any] = field(default_factory=dict)
    normalized_matches: int = 0
    extra_keys: int = 0

    def __post_init__(self) -> None:
        if self.run_index < 1:
            raise ValueError(f"run_index must be >= 1, got {self.run_index}")
        if self.error is not None and any(a is not None for a in self.assignments):
            raise ValueError("a failed run may not carry assignments")

    @property
    def key(self) -> RunKey:
        return (self.backend, self.dataset_id, self.with_context, self.run_index)

    def to_json(self) -> str:
        payload = {
            "backend": self.backend,
            "dataset_id": self.dataset_id,
            "run_index": self.run_index,
            "with_context": self.with_context,
            "raw_response": self.raw_response,
            "assignments": list(self.assignments),
            "error": self.error,
            "timestamp": self.timestamp,
            "params": dict(self.params),
            "normalized_matches": self.normalized_matches,
            "extra_keys": self.extra_keys,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        payload = json.loads(line)
        if not isinstance(payload, dict):
            raise ValueError("record line is not a JSON object")
        try:
            return cls(
                backend=payload["backend"],
                dataset_id=payload["dataset_id"],
                run_index=payload["run_index"],
                with_context=payload["with_context"],
                raw_response=payload["raw_response"],
                assignments=tuple(payload["assignments"]),
                error=payload.get("error"),
                timestamp=payload.get("timestamp", ""),
                params=payload.get("params", {}),
                normalized_matches=payload.get("normalized_matches", 0),
                extra_keys=payload.get("extra_keys", 0),
            )
        except KeyError as exc:
            raise ValueError(f"record line is missing field {exc}") from exc


def load_runs(store: str | Path) -> list[RunRecord]:
    """Load all records from a line-delimited store, sorted by run key.

    Raises :class:`StoreError` on a malformed line (with its line number) or
    a duplicate (backend, dataset, context, run index) key.
    """
    records: list[RunRecord] = []
    seen: set[RunKey] = set()
    with open(store, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = RunRecord.from_json(line)
            except (ValueError, TypeError) as exc:
                raise StoreError(f"{store}: malformed record on line {lineno}: {exc}") from exc
            if record.key in seen:
                raise StoreError(f"{store}: duplicate run key {record.key} on line {lineno}")
            seen.add(record.key)
            records.append(record)
    records.sort(key=lambda r: r.key)
    return records


class RunStore:
    """Append-only store handle that enforces run-key uniqueness.

    Appends are serialized by a lock, so classify workers can share one
    store handle.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._keys: set[RunKey] = set()
        if self.path.exists():
            self._keys = {record.key for record in load_runs(self.path)}

    @property
    def keys(self) -> frozenset[RunKey]:
        return frozenset(self._keys)

    def __len__(self) -> int:
        return len(self._keys)

    def append(self, record: RunRecord) -> None:
        with self._lock:
            if record.key in self._keys:
                raise StoreError(f"duplicate run key {record.key}")
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(record.to_json() + "\n")
            self._keys.add(record.key)


def record_run(store: str | Path, record: RunRecord) -> None:
    """Append one record to a store file, creating the file if needed."""
    RunStore(store).append(record)


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# --------------------------------------------------------------------------
# Response parsing


@dataclass(frozen=True)
class ParsedResponse:
    """Per-header assignments plus matching diagnostics for one raw response."""

    assignments: tuple[str | None, ...]
    normalized_matches: int = 0
    extra_keys: int = 0


def _first_json_object(raw: str) -> dict:
    """First well-formed JSON object in the text, ignoring prose and fences."""
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\{", raw):
        try:
            obj, _ = decoder.raw_decode(raw, match.start())
        except ValueError:
            continue
        if isinstance(obj, dict):
            return obj
    raise ResponseParseError("response contains no parseable JSON object")


def _as_topic_text(value: Any) -> str | None:
    if value is None:
        return None
    if isinstance(value, str):
        return value if value.strip() else None
    if isinstance(value, (dict, list)):
        return None
    return str(value)


def parse_response_detail(raw: str, headers: tuple[str, ...] | list[str]) -> ParsedResponse:
    """Pair each header with its topic text from the first JSON object in ``raw``.

    Headers are matched by raw string first, then by normalized string; a
    header with no pair, or paired with null or empty text, yields an absent
    assignment. Response keys matching no header are ignored but counted.
    Raises :class:`ResponseParseError` when no JSON object can be located.
    """
    if not headers:
        raise ValueError("headers must be non-empty")
    obj = _first_json_object(raw)
    consumed: set[str] = set()
    assignments: list[str | None] = [None] * len(headers)
    matched_raw: set[int] = set()
    for i, header in enumerate(headers):
        if header in obj:
            assignments[i] = _as_topic_text(obj[header])
            consumed.add(header)
            matched_raw.add(i)
    by_normalized: dict[str, str] = {}
    for key in obj:
        if key in consumed:
            continue
        by_normalized.setdefault(normalize_label(key), key)
    normalized_matches = 0
    for i, header in enumerate(headers):
        if i in matched_raw:
            continue
        key = by_normalized.pop(normalize_label(header), None)
        if key is None:
            continue
        value = _as_topic_text(obj[key])
        assignments[i] = value
        consumed.add(key)
        if value is not None:
            normalized_matches += 1
    extra_keys = len(obj) - len(consumed)
    return ParsedResponse(
        assignments=tuple(assignments),
        normalized_matches=normalized_matches,
        extra_keys=extra_keys,
    )


def parse_response(raw: str, headers: tuple[str, ...] | list[str]) -> list[str | None]:
    """Ordered per-header topic texts parsed from a raw response."""
    return list(parse_response_detail(raw, headers).assignments)


# --------------------------------------------------------------------------
# Backend configuration


def api_key_env_var(backend_name: str) -> str:
    """Environment variable carrying the credential for a named backend.

    Upper-cased with dashes (and any other non-alphanumeric character, for
    shell compatibility) mapped to underscores, e.g. ``chatgpt-3.5`` reads
    ``CHATGPT_3_5_API_KEY``.
    """
    return re.sub(r"[^A-Z0-9]", "_", backend_name.upper()) + "_API_KEY"


@dataclass(frozen=True)
class BackendConfig:
    """Configuration of one classification backend.

    ``params`` are decoding parameters passed through to live providers
    untouched and recorded verbatim in the store. ``contexts`` restricts
    which context settings the backend participates in. ``source`` points a
    replay backend at its recorded store. ``behavior`` tunes the mock.
    """

    name: str
    kind: str = "openai-chat"
    endpoint: str | None = None
    model: str | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    contexts: tuple[str, ...] = ("none", "with")
    source: str | None = None
    behavior: Mapping[str, Any] = field(default_factory=dict)
    max_parallel: int = 1
    max_retries: int = 3
    retry_base_delay: float = 1.0
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValueError("backend name must be non-empty")
        if self.kind not in ("openai-chat", "replay", "mock"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        bad = [c for c in self.contexts if c not in ("none", "with")]
        if bad:
            raise ValueError(f"backend {self.name!r}: unknown context setting(s) {bad}")

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "BackendConfig":
        known = {
            "name", "kind", "endpoint", "model", "params", "contexts",
            "source", "behavior", "max_parallel", "max_retries",
            "retry_base_delay", "timeout",
        }
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown backend config field(s): {sorted(unknown)}")
        kwargs = dict(payload)
        if "contexts" in kwargs:
            kwargs["contexts"] = tuple(kwargs["contexts"])
        return cls(**kwargs)


# --------------------------------------------------------------------------
# Backends


class HttpChatBackend:
    """Live chat-completions backend over HTTP.

    Every call is a fresh, single-message request: no conversation state is
    ever carried between calls. Retries (bounded, exponential backoff) apply
    to transport and rate-limit failures only, never to response content.
    """

    def __init__(self, config: BackendConfig, client: httpx.Client | None = None, sleep=time.sleep):
        if not config.endpoint:
            raise ValueError(f"backend {config.name!r}: live backend requires an endpoint")
        import os

        env_var = api_key_env_var(config.name)
        api_key = os.environ.get(env_var)
        if not api_key:
            raise AuthenticationError(f"backend {config.name!r}: no credential in ${env_var}")
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout)
        self._headers = {"Authorization": f"Bearer {api_key}"}
        self._sleep = sleep

    def complete(self, prompt: PromptText, dataset_id: str, run_index: int) -> str:
        payload: dict[str, Any] = {
            "model": self.config.model or self.config.name,
            "messages": [{"role": "user", "content": prompt.text}],
        }
        payload.update(self.config.params)
        last_error: BackendError | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(self.config.retry_base_delay * 2 ** (attempt - 1))
            try:
                response = self._client.post(self.config.endpoint, json=payload, headers=self._headers)
            except httpx.TransportError as exc:
                last_error = TransportError(f"backend {self.config.name!r}: {exc}")
                continue
            if response.status_code in (401, 403):
                raise AuthenticationError(f"backend {self.config.name!r}: credential rejected ({response.status_code})")
            if self._is_oversize(response):
                raise OversizePromptError(f"backend {self.config.name!r}: prompt exceeds the provider size limit")
            if response.status_code == 429:
                last_error = RateLimitError(f"backend {self.config.name!r}: rate limited")
                continue
            if response.status_code >= 500:
                last_error = TransportError(f"backend {self.config.name!r}: server error {response.status_code}")
                continue
            if response.status_code != 200:
                raise BackendError(f"backend {self.config.name!r}: unexpected status {response.status_code}")
            return self._extract_text(response)
        assert last_error is not None
        raise last_error

    @staticmethod
    def _is_oversize(response: httpx.Response) -> bool:
        if response.status_code == 413:
            return True
        if response.status_code == 400:
            body = response.text.lower()
            return any(marker in body for marker in ("context_length", "maximum context", "too long", "too large"))
        return False

    def _extract_text(self, response: httpx.Response) -> str:
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise BackendError(f"backend {self.config.name!r}: malformed provider response: {exc}") from exc
        if not isinstance(text, str):
            raise BackendError(f"backend {self.config.name!r}: provider returned non-text content")
        return text


class ReplayBackend:
    """Deterministic playback of raw responses recorded in a store file."""

    def __init__(self, config: BackendConfig, responses: Mapping[tuple[str, bool, int], str]):
        self.config = config
        self._responses = dict(responses)

    @classmethod
    def from_store(cls, config: BackendConfig) -> "ReplayBackend":
        if not config.source:
            raise ValueError(f"backend {config.name!r}: replay backend requires a source store")
        responses: dict[tuple[str, bool, int], str] = {}
        for record in load_runs(config.source):
            if record.backend == config.name:
                responses[(record.dataset_id, record.with_context, record.run_index)] = record.raw_response
        return cls(config, responses)

    def complete(self, prompt: PromptText, dataset_id: str, run_index: int) -> str:
        key = (dataset_id, prompt.with_context, run_index)
        try:
            return self._responses[key]
        except KeyError:
            raise ReplayMissError(
                f"backend {self.config.name!r}: no recorded response for dataset {dataset_id!r}, "
                f"context={'with' if prompt.with_context else 'none'}, run {run_index}"
            ) from None


_HALLUCINATION_POOL = (
    "General Statistics",
    "Data Quality",
    "Administrative Records",
    "Survey Methodology",
    "Regional Indicators",
    "Miscellaneous",
)

_REFUSAL_TEXT = "I'm sorry, but I can't help with classifying these column headers."

_MOCK_DEFAULTS: dict[str, float | bool] = {
    "seed": 0,
    "stability": 0.9,
    "p_specific": 0.45,
    "p_general": 0.3,
    "p_other": 0.1,
    "p_hallucination": 0.1,
    "p_skip": 0.05,
    "p_refusal": 0.0,
    "p_fence": 0.0,
    "p_prose": 0.0,
    "p_recase": 0.0,
    "oversize_with_context": False,
}


class MockBackend:
    """Seeded synthetic backend that reads the task straight off the prompt.

    Responses are a pure function of (backend name, seed, dataset, context,
    run index), which makes recorded fixtures reproducible bit for bit. The
    header list is recovered from the prompt's bracketed line, so headers
    containing ", " are not supported by the mock (live and replay backends
    have no such restriction). The prompt's vocabulary CSV is flat, so the
    specific/general split behind the category knobs comes from the
    vocabulary passed at construction (the campaign supplies its own);
    without one, every non-abstention topic counts as general.
    """

    def __init__(self, config: BackendConfig, vocab: Vocabulary | None = None):
        self.config = config
        behavior = dict(_MOCK_DEFAULTS)
        unknown = set(config.behavior) - set(behavior)
        if unknown:
            raise ValueError(f"backend {config.name!r}: unknown mock behavior key(s) {sorted(unknown)}")
        behavior.update(config.behavior)
        self._behavior = behavior
        self._hierarchy = vocab

    def complete(self, prompt: PromptText, dataset_id: str, run_index: int) -> str:
        if prompt.with_context and self._behavior["oversize_with_context"]:
            raise OversizePromptError(f"backend {self.config.name!r}: prompt exceeds the provider size limit")
        headers, vocab = _prompt_parts(prompt.text)
        context = "with" if prompt.with_context else "none"
        rng = self._rng(dataset_id, context, f"run-{run_index}")
        if rng.random() < self._behavior["p_refusal"]:
            return _REFUSAL_TEXT
        backbone_rng = self._rng(dataset_id, context, "backbone")
        backbone = [self._pick(backbone_rng, vocab) for _ in headers]
        obj: dict[str, str] = {}
        for header, base in zip(headers, backbone):
            choice = base if rng.random() < self._behavior["stability"] else self._pick(rng, vocab)
            if choice is None:
                continue
            key = header.lower() if rng.random() < self._behavior["p_recase"] else header
            obj[key] = choice
        text = json.dumps(obj, ensure_ascii=False, indent=2)
        if rng.random() < self._behavior["p_fence"]:
            text = f"```json\n{text}\n```"
        if rng.random() < self._behavior["p_prose"]:
            text = f"Here is the classification you asked for:\n\n{text}\n\nLet me know if you need anything else."
        return text

    def _rng(self, *parts: str) -> random.Random:
        key = "\x1f".join((self.config.name, str(self._behavior["seed"])) + parts)
        seed = int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")
        return random.Random(seed)

    def _pools(self, vocab: Vocabulary) -> tuple[list[str], list[str]]:
        abstention = normalize_label(vocab.abstention_label)
        labels = [t.label for t in vocab.topics if normalize_label(t.label) != abstention]
        if self._hierarchy is None:
            return [], labels
        specific: list[str] = []
        general: list[str] = []
        for label in labels:
            topic = self._hierarchy.resolve(label)
            (general if topic is None or topic.is_general else specific).append(label)
        return specific, general

    def _pick(self, rng: random.Random, vocab: Vocabulary) -> str | None:
        specific, general = self._pools(vocab)
        specific_weight = self._behavior["p_specific"]
        general_weight = self._behavior["p_general"]
        if not specific:
            general_weight += specific_weight
            specific_weight = 0.0
        weights = [
            ("specific", specific_weight),
            ("general", general_weight if general else 0.0),
            ("other", self._behavior["p_other"]),
            ("hallucination", self._behavior["p_hallucination"]),
            ("skip", self._behavior["p_skip"]),
        ]
        total = sum(w for _, w in weights)
        draw = rng.random() * total
        acc = 0.0
        category = "skip"
        for name, weight in weights:
            acc += weight
            if draw < acc:
                category = name
                break
        if category == "specific":
            return rng.choice(specific)
        if category == "general":
            return rng.choice(general)
        if category == "other":
            return vocab.abstention_label
        if category == "hallucination":
            return rng.choice(_HALLUCINATION_POOL)
        return None


def _prompt_parts(prompt_text: str) -> tuple[list[str], Vocabulary]:
    """Recover the header list and vocabulary from a rendered prompt."""
    lines = prompt_text.split("\n")
    try:
        h_idx = lines.index("*Column Headers (List):")
        v_idx = lines.index("*Controlled Vocabulary (CSV Format):")
    except ValueError as exc:
        raise ValueError("prompt does not follow the classification template") from exc
    headers_line = lines[h_idx + 1]
    inner = headers_line.strip()[1:-1]
    headers = inner.split(", ") if inner else []
    vocab = parse_vocabulary("\n".join(lines[v_idx + 1 :]))
    return headers, vocab


def make_backend(
    config: BackendConfig,
    client: httpx.Client | None = None,
    vocab: Vocabulary | None = None,
):
    """Instantiate the backend implementation for a configuration.

    ``vocab`` supplies the topic hierarchy to the mock backend (the flat
    prompt CSV cannot); live and replay backends ignore it.
    """
    if config.kind == "openai-chat":
        return HttpChatBackend(config, client=client)
    if config.kind == "replay":
        return ReplayBackend.from_store(config)
    return MockBackend(config, vocab=vocab)


def classify(backend, prompt: PromptText, dataset_id: str, run_index: int) -> str:
    """Perform exactly one stateless classification request and return the raw text."""
    return backend.complete(prompt, dataset_id=dataset_id, run_index=run_index)
