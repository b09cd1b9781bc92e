"""Controlled vocabulary of topics: parsing, validation, lookup and prompt serialization.

A vocabulary is a flat CSV of topic labels and descriptions, optionally
extended with a third ``Parent Topic`` column carrying a strictly two-level
hierarchy (general topics vs. specific sub-topics). One topic is the
designated abstention topic ("Other" by default), meaning "no listed topic
fits".
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

VOCAB_COLUMNS = ("Topic Label", "Topic Description")
PARENT_COLUMN = "Parent Topic"
DEFAULT_ABSTENTION_LABEL = "Other"


class VocabularyError(ValueError):
    """A vocabulary file or construction violates the format or hierarchy rules."""


def normalize_label(raw: str) -> str:
    """Canonical form of a topic label: trimmed, inner whitespace collapsed, case-folded.

    Pure and idempotent; matching against the vocabulary always goes through
    this normalization and nothing fuzzier.
    """
    return " ".join(raw.split()).casefold()


@dataclass(frozen=True)
class Topic:
    """One vocabulary entry. ``parent_label`` absent means the topic is general."""

    label: str
    description: str = ""
    parent_label: str | None = None

    def __post_init__(self) -> None:
        if not self.label.strip():
            raise VocabularyError("topic label must be non-empty")

    @property
    def is_general(self) -> bool:
        return self.parent_label is None


class Vocabulary:
    """Ordered, validated collection of topics with normalized-label lookup.

    Immutable after construction and safe for shared concurrent reads.
    """

    def __init__(self, topics: list[Topic] | tuple[Topic, ...], abstention_label: str = DEFAULT_ABSTENTION_LABEL):
        if len(topics) < 2:
            raise VocabularyError(f"vocabulary needs at least 2 topics, got {len(topics)}")
        index: dict[str, Topic] = {}
        for topic in topics:
            key = normalize_label(topic.label)
            if key in index:
                raise VocabularyError(f"duplicate topic label (after normalization): {topic.label!r}")
            index[key] = topic
        for topic in topics:
            if topic.parent_label is None:
                continue
            parent = index.get(normalize_label(topic.parent_label))
            if parent is None:
                raise VocabularyError(f"topic {topic.label!r} references unknown parent {topic.parent_label!r}")
            if not parent.is_general:
                raise VocabularyError(
                    f"topic {topic.label!r} nests under {parent.label!r}, which is itself a "
                    "specific topic; only two hierarchy levels are allowed"
                )
        abstention = index.get(normalize_label(abstention_label))
        if abstention is None:
            raise VocabularyError(f"abstention label {abstention_label!r} does not match any topic")
        if not abstention.is_general:
            # generalize() must be a fixed point on the abstention topic
            raise VocabularyError(f"abstention topic {abstention.label!r} may not have a parent")
        self._topics = tuple(topics)
        self._index = index
        self._abstention = abstention

    @property
    def topics(self) -> tuple[Topic, ...]:
        return self._topics

    @property
    def abstention_topic(self) -> Topic:
        return self._abstention

    @property
    def abstention_label(self) -> str:
        return self._abstention.label

    def __len__(self) -> int:
        return len(self._topics)

    def __iter__(self):
        return iter(self._topics)

    def __contains__(self, raw: str) -> bool:
        return normalize_label(raw) in self._index

    def resolve(self, raw: str) -> Topic | None:
        """Topic whose normalized label equals ``normalize_label(raw)``, else None.

        Absence is a value, not an error: callers interpret an unresolvable
        model answer as a hallucination. No fuzzy matching, by design.
        """
        return self._index.get(normalize_label(raw))

    def generalize(self, topic: Topic) -> Topic:
        """Map a topic to its general (parent) topic; general topics map to themselves."""
        found = self._index.get(normalize_label(topic.label))
        if found is None or found != topic:
            raise VocabularyError(f"topic {topic.label!r} is not part of this vocabulary")
        if topic.parent_label is None:
            return topic
        return self._index[normalize_label(topic.parent_label)]

    def serialize_for_prompt(self) -> str:
        """Two-column CSV text of the vocabulary, as embedded in prompts.

        The parent column is never emitted; prompts carry the flat
        label/description table only.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(VOCAB_COLUMNS)
        for topic in self._topics:
            writer.writerow((topic.label, topic.description))
        return buf.getvalue()


def _read_header(row: list[str]) -> bool:
    """Validate the header row; returns True when the parent column is present."""
    cells = [cell.strip() for cell in row]
    if cells == list(VOCAB_COLUMNS):
        return False
    if cells == list(VOCAB_COLUMNS) + [PARENT_COLUMN]:
        return True
    raise VocabularyError(
        "vocabulary header must be exactly "
        f"{','.join(VOCAB_COLUMNS)} or {','.join(VOCAB_COLUMNS + (PARENT_COLUMN,))}, got {row!r}"
    )


def parse_vocabulary(csv_text: str, abstention_label: str | None = None) -> Vocabulary:
    """Parse vocabulary CSV text into a validated :class:`Vocabulary`.

    Topic order follows file order. Raises :class:`VocabularyError` on a
    missing or renamed header column, a duplicate normalized label, a parent
    reference to an unknown or non-general topic, or an unresolvable
    abstention label.
    """
    rows = list(csv.reader(io.StringIO(csv_text)))
    if not rows:
        raise VocabularyError("empty vocabulary file")
    has_parent = _read_header(rows[0])
    width = 3 if has_parent else 2
    topics: list[Topic] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) > width:
            raise VocabularyError(f"line {lineno}: expected {width} fields, got {len(row)}")
        row = row + [""] * (width - len(row))
        label = row[0].strip()
        if not label:
            raise VocabularyError(f"line {lineno}: empty topic label")
        parent = row[2].strip() if has_parent else ""
        topics.append(Topic(label=label, description=row[1], parent_label=parent or None))
    return Vocabulary(topics, abstention_label=abstention_label or DEFAULT_ABSTENTION_LABEL)


def load_vocabulary(path, abstention_label: str | None = None) -> Vocabulary:
    """Read and parse a vocabulary CSV file (UTF-8)."""
    with open(path, encoding="utf-8", newline="") as handle:
        return parse_vocabulary(handle.read(), abstention_label=abstention_label)
