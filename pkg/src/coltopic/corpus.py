"""Ingestion of dataset descriptors and human annotation files.

Datasets are JSON descriptor files carrying an id, a title, an optional
free-text description (the classification "context") and the ordered column
headers. Row-level values are never ingested; headers are the only
data-level signal used anywhere in the toolkit.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from coltopic.vocab import Vocabulary


class CorpusError(ValueError):
    """A dataset descriptor or labels file violates its format or invariants."""


@dataclass(frozen=True)
class Dataset:
    """One dataset: identifier, title, optional description and ordered headers."""

    id: str
    title: str = ""
    description: str | None = None
    headers: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise CorpusError("dataset id must be non-empty")
        if not self.headers:
            raise CorpusError(f"dataset {self.id!r} has an empty header list")
        seen: set[str] = set()
        for header in self.headers:
            if not header.strip():
                raise CorpusError(f"dataset {self.id!r} contains an empty column header")
            if header in seen:
                raise CorpusError(f"dataset {self.id!r} contains duplicate column header {header!r}")
            seen.add(header)


@dataclass(frozen=True)
class Corpus:
    """Ordered collection of datasets with unique ids."""

    datasets: tuple[Dataset, ...] = ()

    def __post_init__(self) -> None:
        ids = [dataset.id for dataset in self.datasets]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise CorpusError(f"duplicate dataset id(s): {', '.join(dupes)}")

    def __len__(self) -> int:
        return len(self.datasets)

    def __iter__(self):
        return iter(self.datasets)

    def get(self, dataset_id: str) -> Dataset | None:
        for dataset in self.datasets:
            if dataset.id == dataset_id:
                return dataset
        return None


def load_dataset(document: str) -> Dataset:
    """Parse a JSON dataset descriptor into a validated :class:`Dataset`."""
    try:
        payload = json.loads(document)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"descriptor is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise CorpusError("descriptor must be a JSON object")
    if "id" not in payload or not isinstance(payload["id"], str):
        raise CorpusError("descriptor is missing a text 'id' field")
    headers = payload.get("headers")
    if not isinstance(headers, list) or not all(isinstance(h, str) for h in headers):
        raise CorpusError("descriptor 'headers' must be a list of strings")
    title = payload.get("title", "")
    if not isinstance(title, str):
        raise CorpusError("descriptor 'title' must be text")
    description = payload.get("description")
    if description is not None and not isinstance(description, str):
        raise CorpusError("descriptor 'description' must be text when present")
    return Dataset(id=payload["id"], title=title, description=description, headers=tuple(headers))


def load_corpus(directory: str | Path) -> Corpus:
    """Load every ``*.json`` descriptor under ``directory``, ordered by dataset id.

    The result does not depend on filesystem enumeration order. Invalid files
    are reported together, each with its file name and cause.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise CorpusError(f"corpus directory not found: {directory}")
    datasets: list[Dataset] = []
    problems: list[str] = []
    for path in sorted(directory.glob("*.json")):
        try:
            datasets.append(load_dataset(path.read_text(encoding="utf-8")))
        except CorpusError as exc:
            problems.append(f"{path.name}: {exc}")
    if problems:
        raise CorpusError("invalid dataset descriptor(s):\n  " + "\n  ".join(problems))
    return Corpus(datasets=tuple(sorted(datasets, key=lambda d: d.id)))


LABEL_COLUMNS = ("participant", "dataset", "header", "topic")


@dataclass(frozen=True)
class HumanLabels:
    """Per-participant topic labels, keyed by (participant, dataset id, header).

    ``unresolved`` lists rows whose topic did not resolve against the
    vocabulary, only populated in non-strict mode.
    """

    entries: dict[tuple[str, str, str], str] = field(default_factory=dict)
    unresolved: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def participants(self) -> tuple[str, ...]:
        return tuple(sorted({participant for participant, _, _ in self.entries}))

    def by_header(self) -> dict[tuple[str, str], dict[str, str]]:
        """Regroup entries as (dataset id, header) -> participant -> topic text."""
        grouped: dict[tuple[str, str], dict[str, str]] = {}
        for (participant, dataset_id, header), topic in self.entries.items():
            grouped.setdefault((dataset_id, header), {})[participant] = topic
        return grouped


def load_human_labels(csv_text: str, vocab: Vocabulary, strict: bool = True) -> HumanLabels:
    """Parse a ``participant,dataset,header,topic`` CSV of human annotations.

    Every topic must resolve against ``vocab``; in strict mode an
    unresolvable topic raises, otherwise the offending rows are skipped
    and reported in :attr:`HumanLabels.unresolved`. Duplicate
    (participant, dataset, header) keys always raise.
    """
    rows = list(csv.reader(io.StringIO(csv_text)))
    if not rows:
        return HumanLabels()
    header_cells = [cell.strip() for cell in rows[0]]
    if header_cells != list(LABEL_COLUMNS):
        raise CorpusError(f"labels header must be exactly {','.join(LABEL_COLUMNS)}, got {rows[0]!r}")
    entries: dict[tuple[str, str, str], str] = {}
    unresolved: list[str] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(LABEL_COLUMNS):
            raise CorpusError(f"line {lineno}: expected {len(LABEL_COLUMNS)} fields, got {len(row)}")
        participant, dataset_id, header, topic = row
        key = (participant, dataset_id, header)
        if key in entries:
            raise CorpusError(
                f"line {lineno}: participant {participant!r} labels header {header!r} "
                f"of dataset {dataset_id!r} more than once"
            )
        if vocab.resolve(topic) is None:
            message = f"line {lineno}: topic {topic!r} is not in the vocabulary"
            if strict:
                raise CorpusError(message)
            unresolved.append(message)
            continue
        entries[key] = topic
    return HumanLabels(entries=entries, unresolved=tuple(unresolved))


def load_human_labels_file(path: str | Path, vocab: Vocabulary, strict: bool = True) -> HumanLabels:
    """Read and parse a human labels CSV file (UTF-8)."""
    return load_human_labels(Path(path).read_text(encoding="utf-8"), vocab, strict=strict)
