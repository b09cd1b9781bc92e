"""Campaign configuration and the resumable classification engine.

A campaign is the cross product of backends, datasets, context settings and
run indices. The run store is the single source of truth: cells already
recorded are skipped on re-invocation, so an interrupted campaign resumes
where it stopped. Each cell performs exactly one fresh classification call.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from coltopic.backends import (
    BackendConfig,
    BackendError,
    ResponseParseError,
    RunRecord,
    RunStore,
    classify,
    make_backend,
    parse_response_detail,
    utc_timestamp,
)
from coltopic.corpus import Corpus, Dataset, load_corpus
from coltopic.metrics import ScoringScheme
from coltopic.promptgen import PromptError, build_prompt
from coltopic.vocab import Vocabulary, load_vocabulary


class ConfigError(ValueError):
    """The campaign configuration is structurally invalid."""


CONTEXT_SETTINGS = ("none", "with", "both")


def context_flags(setting: str) -> tuple[bool, ...]:
    """Expand a context setting into the with_context values it covers."""
    if setting == "none":
        return (False,)
    if setting == "with":
        return (True,)
    if setting == "both":
        return (False, True)
    raise ConfigError(f"context must be one of {CONTEXT_SETTINGS}, got {setting!r}")


@dataclass(frozen=True)
class CampaignConfig:
    """Everything a campaign needs: inputs, backends, volume and analysis knobs."""

    corpus_dir: str
    vocabulary: str
    store: str
    backends: tuple[BackendConfig, ...]
    runs: int = 10
    context: str = "none"
    parallelism: int = 4
    scoring: ScoringScheme = field(default_factory=ScoringScheme)
    alpha: float = 0.05
    human_labels: str | None = None
    abstention_label: str | None = None

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if not self.backends:
            raise ConfigError("at least one backend is required")
        names = [b.name for b in self.backends]
        if len(set(names)) != len(names):
            raise ConfigError(f"backend names must be unique, got {names}")
        if self.context not in CONTEXT_SETTINGS:
            raise ConfigError(f"context must be one of {CONTEXT_SETTINGS}, got {self.context!r}")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")


def load_config(path: str | Path) -> CampaignConfig:
    """Load a campaign configuration from a JSON file.

    Relative paths inside the file are resolved against the file's own
    directory, so a config travels with its data.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    known = {
        "corpus", "vocabulary", "store", "backends", "runs", "context",
        "parallelism", "scoring", "alpha", "human_labels", "abstention_label",
    }
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config field(s): {sorted(unknown)}")
    missing = [key for key in ("corpus", "vocabulary", "store", "backends") if key not in payload]
    if missing:
        raise ConfigError(f"{path}: missing required config field(s): {missing}")
    base = path.parent

    def resolve(value: str | None) -> str | None:
        return None if value is None else str((base / value))

    try:
        backends = tuple(
            _resolve_backend(BackendConfig.from_dict(entry), base) for entry in payload["backends"]
        )
        scoring = ScoringScheme(**payload.get("scoring", {}))
        return CampaignConfig(
            corpus_dir=resolve(payload["corpus"]),
            vocabulary=resolve(payload["vocabulary"]),
            store=resolve(payload["store"]),
            backends=backends,
            runs=payload.get("runs", 10),
            context=payload.get("context", "none"),
            parallelism=payload.get("parallelism", 4),
            scoring=scoring,
            alpha=payload.get("alpha", 0.05),
            human_labels=resolve(payload.get("human_labels")),
            abstention_label=payload.get("abstention_label"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


def _resolve_backend(config: BackendConfig, base: Path) -> BackendConfig:
    if config.source is not None:
        return replace(config, source=str(base / config.source))
    return config


def apply_overrides(
    config: CampaignConfig,
    store: str | None = None,
    context: str | None = None,
    runs: int | None = None,
    backend_names: tuple[str, ...] = (),
    alpha: float | None = None,
    match: float | None = None,
    mismatch: float | None = None,
    gap: float | None = None,
) -> CampaignConfig:
    """Apply command-line overrides on top of a loaded configuration."""
    changes: dict[str, Any] = {}
    if store is not None:
        changes["store"] = store
    if context is not None:
        changes["context"] = context
    if runs is not None:
        changes["runs"] = runs
    if alpha is not None:
        changes["alpha"] = alpha
    if backend_names:
        known = {b.name for b in config.backends}
        unknown = [name for name in backend_names if name not in known]
        if unknown:
            raise ConfigError(f"unknown backend(s) {unknown}; config defines {sorted(known)}")
        changes["backends"] = tuple(b for b in config.backends if b.name in backend_names)
    if match is not None or mismatch is not None or gap is not None:
        scoring = config.scoring
        changes["scoring"] = ScoringScheme(
            match=match if match is not None else scoring.match,
            mismatch=mismatch if mismatch is not None else scoring.mismatch,
            gap=gap if gap is not None else scoring.gap,
        )
    return replace(config, **changes) if changes else config


def load_inputs(config: CampaignConfig) -> tuple[Vocabulary, Corpus]:
    """Load the vocabulary and corpus named by a configuration."""
    if not Path(config.vocabulary).is_file():
        raise ConfigError(f"vocabulary file not found: {config.vocabulary}")
    if not Path(config.corpus_dir).is_dir():
        raise ConfigError(f"corpus directory not found: {config.corpus_dir}")
    vocab = load_vocabulary(
        config.vocabulary,
        abstention_label=config.abstention_label,
    )
    corpus = load_corpus(config.corpus_dir)
    return vocab, corpus


@dataclass(frozen=True)
class CellFailure:
    backend: str
    dataset_id: str
    with_context: bool
    run_index: int
    error: str


@dataclass(frozen=True)
class ClassifyReport:
    """Outcome of one classify invocation over the campaign's cell grid."""

    total_cells: int
    skipped: int
    completed: int
    failures: tuple[CellFailure, ...]

    @property
    def ok(self) -> bool:
        return not self.failures


def run_campaign(config: CampaignConfig) -> ClassifyReport:
    """Fill every missing (backend, dataset, context, run) cell of the store.

    Cells already present are skipped, so re-invocation after an
    interruption is safe and idempotent. Every cell is attempted even when
    others fail; backend-level failures (transport, credentials, oversize
    prompts, replay misses) leave their cells unfilled and are reported,
    while unparseable responses are recorded as failed runs with the raw
    text preserved.
    """
    vocab, corpus = load_inputs(config)
    store = RunStore(config.store)
    existing = store.keys

    cells: list[tuple[BackendConfig, Dataset, bool, int]] = []
    skipped = 0
    campaign_contexts = context_flags(config.context)
    for backend_config in config.backends:
        backend_contexts = [
            with_context
            for with_context in campaign_contexts
            if ("with" if with_context else "none") in backend_config.contexts
        ]
        for dataset in corpus.datasets:
            for with_context in backend_contexts:
                for run_index in range(1, config.runs + 1):
                    key = (backend_config.name, dataset.id, with_context, run_index)
                    if key in existing:
                        skipped += 1
                    else:
                        cells.append((backend_config, dataset, with_context, run_index))

    backends: dict[str, Any] = {}
    broken: dict[str, str] = {}
    for backend_config in config.backends:
        try:
            backends[backend_config.name] = make_backend(backend_config, vocab=vocab)
        except (BackendError, ValueError, OSError) as exc:
            broken[backend_config.name] = str(exc)

    limits = {
        b.name: threading.Semaphore(max(1, b.max_parallel)) for b in config.backends
    }
    failures: list[CellFailure] = []
    failure_lock = threading.Lock()
    completed = 0
    completed_lock = threading.Lock()

    def run_cell(cell: tuple[BackendConfig, Dataset, bool, int]) -> None:
        nonlocal completed
        backend_config, dataset, with_context, run_index = cell
        if backend_config.name in broken:
            with failure_lock:
                failures.append(
                    CellFailure(backend_config.name, dataset.id, with_context, run_index, broken[backend_config.name])
                )
            return
        try:
            prompt = build_prompt(dataset, vocab, with_context=with_context)
        except PromptError as exc:
            with failure_lock:
                failures.append(CellFailure(backend_config.name, dataset.id, with_context, run_index, str(exc)))
            return
        try:
            with limits[backend_config.name]:
                raw = classify(backends[backend_config.name], prompt, dataset.id, run_index)
        except BackendError as exc:
            with failure_lock:
                failures.append(CellFailure(backend_config.name, dataset.id, with_context, run_index, str(exc)))
            return
        try:
            parsed = parse_response_detail(raw, dataset.headers)
            record = RunRecord(
                backend=backend_config.name,
                dataset_id=dataset.id,
                run_index=run_index,
                with_context=with_context,
                raw_response=raw,
                assignments=parsed.assignments,
                timestamp=utc_timestamp(),
                params=dict(backend_config.params),
                normalized_matches=parsed.normalized_matches,
                extra_keys=parsed.extra_keys,
            )
        except ResponseParseError as exc:
            record = RunRecord(
                backend=backend_config.name,
                dataset_id=dataset.id,
                run_index=run_index,
                with_context=with_context,
                raw_response=raw,
                assignments=(None,) * len(dataset.headers),
                error=str(exc),
                timestamp=utc_timestamp(),
                params=dict(backend_config.params),
            )
        store.append(record)
        with completed_lock:
            completed += 1

    if cells:
        workers = min(config.parallelism, len(cells))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_cell, cells))

    failures.sort(key=lambda f: (f.backend, f.dataset_id, f.with_context, f.run_index))
    return ClassifyReport(
        total_cells=len(cells) + skipped,
        skipped=skipped,
        completed=completed,
        failures=tuple(failures),
    )
