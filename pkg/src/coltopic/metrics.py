"""Sequence alignment metrics and human-computer agreement.

A run's assignments become a classification sequence (one token per
header). Needleman-Wunsch global alignment over token sequences yields raw
scores; normalization by match-score times max-length puts identity at 1.0.
Internal consistency averages all unordered run pairs of one backend;
inter-model alignment averages the full cross product of two backends'
runs. Human-computer agreement is the per-header sum of joint topic
probabilities between the human and machine empirical distributions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from coltopic.backends import RunRecord
from coltopic.corpus import Corpus, HumanLabels
from coltopic.vocab import Vocabulary, normalize_label


class _UnassignedToken:
    """Distinguished sentinel for headers that received no classification."""

    _instance: "_UnassignedToken | None" = None

    def __new__(cls) -> "_UnassignedToken":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNASSIGNED"

    def __copy__(self) -> "_UnassignedToken":
        return self

    def __deepcopy__(self, memo) -> "_UnassignedToken":
        return self


UNASSIGNED = _UnassignedToken()

Token = "str | _UnassignedToken"
ClassificationSequence = tuple


@dataclass(frozen=True)
class ScoringScheme:
    """Alignment scores: defaults put identity at 1.0 and all-mismatch at 0.0 after normalization."""

    match: float = 1.0
    mismatch: float = 0.0
    gap: float = -0.5

    def __post_init__(self) -> None:
        if not self.match > self.mismatch:
            raise ValueError("match score must exceed mismatch score")
        if not self.gap < self.match:
            raise ValueError("gap score must be below match score")
        if not self.match > 0:
            raise ValueError("match score must be positive (it normalizes the alignment)")


def to_sequence(vocab: Vocabulary, run: RunRecord) -> tuple:
    """Tokenize a run: canonical topic labels, UNASSIGNED, or normalized stray text."""
    tokens: list = []
    for assignment in run.assignments:
        if assignment is None or not assignment.strip():
            tokens.append(UNASSIGNED)
            continue
        topic = vocab.resolve(assignment)
        tokens.append(normalize_label(topic.label) if topic is not None else normalize_label(assignment))
    return tuple(tokens)


def nw_align(a: Sequence, b: Sequence, scheme: ScoringScheme = ScoringScheme()) -> float:
    """Maximum global alignment score of two token sequences (full DP, scores only)."""
    len_a, len_b = len(a), len(b)
    prev = [j * scheme.gap for j in range(len_b + 1)]
    for i in range(1, len_a + 1):
        cur = [i * scheme.gap] + [0.0] * len_b
        token = a[i - 1]
        for j in range(1, len_b + 1):
            step = scheme.match if token == b[j - 1] else scheme.mismatch
            cur[j] = max(prev[j - 1] + step, prev[j] + scheme.gap, cur[j - 1] + scheme.gap)
        prev = cur
    return prev[len_b]


def normalized_alignment(a: Sequence, b: Sequence, scheme: ScoringScheme = ScoringScheme()) -> float:
    """nw_align divided by match-score times max length; 1.0 means identical."""
    longest = max(len(a), len(b))
    if longest == 0:
        raise ValueError("cannot normalize the alignment of two empty sequences")
    return nw_align(a, b, scheme) / (scheme.match * longest)


def internal_consistency(sequences: Sequence[Sequence], scheme: ScoringScheme = ScoringScheme()) -> float:
    """Mean normalized alignment over all unordered pairs of repeated runs."""
    if len(sequences) < 2:
        raise ValueError(f"internal consistency needs at least 2 runs, got {len(sequences)}")
    pairs = list(itertools.combinations(sequences, 2))
    return sum(normalized_alignment(a, b, scheme) for a, b in pairs) / len(pairs)


def inter_model_alignment(
    runs_a: Sequence[Sequence], runs_b: Sequence[Sequence], scheme: ScoringScheme = ScoringScheme()
) -> float:
    """Mean normalized alignment over the full cross product of two backends' runs."""
    if not runs_a or not runs_b:
        raise ValueError("inter-model alignment needs at least one run on each side")
    scores = [normalized_alignment(a, b, scheme) for a in runs_a for b in runs_b]
    return sum(scores) / len(scores)


# --------------------------------------------------------------------------
# Table builders over run stores


@dataclass(frozen=True)
class ConsistencyRow:
    backend: str
    dataset_id: str
    with_context: bool
    score: float


@dataclass(frozen=True)
class ConsistencyTable:
    """Per-dataset consistency scores plus the unweighted overall mean per backend/context."""

    rows: tuple[ConsistencyRow, ...]
    overall: Mapping[tuple[str, bool], float] = field(default_factory=dict)


def _sequences_by_group(
    vocab: Vocabulary, records: Iterable[RunRecord]
) -> dict[tuple[str, bool, str], list[tuple]]:
    grouped: dict[tuple[str, bool, str], list[tuple]] = {}
    for record in sorted(records, key=lambda r: r.key):
        grouped.setdefault((record.backend, record.with_context, record.dataset_id), []).append(
            to_sequence(vocab, record)
        )
    return grouped


def consistency_table(
    vocab: Vocabulary, records: Iterable[RunRecord], scheme: ScoringScheme = ScoringScheme()
) -> ConsistencyTable:
    """Internal consistency per (backend, dataset, context); groups with one run are skipped."""
    grouped = _sequences_by_group(vocab, records)
    rows: list[ConsistencyRow] = []
    per_overall: dict[tuple[str, bool], list[float]] = {}
    for (backend, with_context, dataset_id), sequences in sorted(grouped.items()):
        if len(sequences) < 2:
            continue
        score = internal_consistency(sequences, scheme)
        rows.append(ConsistencyRow(backend, dataset_id, with_context, score))
        per_overall.setdefault((backend, with_context), []).append(score)
    overall = {key: sum(scores) / len(scores) for key, scores in per_overall.items()}
    return ConsistencyTable(rows=tuple(rows), overall=overall)


@dataclass(frozen=True)
class AlignmentRow:
    backend_a: str
    backend_b: str
    dataset_id: str
    with_context: bool
    score: float


@dataclass(frozen=True)
class AlignmentTable:
    """Per-dataset cross-backend alignment plus the overall mean per pair/context."""

    rows: tuple[AlignmentRow, ...]
    overall: Mapping[tuple[str, str, bool], float] = field(default_factory=dict)


def alignment_table(
    vocab: Vocabulary, records: Iterable[RunRecord], scheme: ScoringScheme = ScoringScheme()
) -> AlignmentTable:
    """Inter-model alignment for every backend pair sharing a (dataset, context) cell."""
    grouped = _sequences_by_group(vocab, records)
    backends = sorted({backend for backend, _, _ in grouped})
    rows: list[AlignmentRow] = []
    per_overall: dict[tuple[str, str, bool], list[float]] = {}
    for backend_a, backend_b in itertools.combinations(backends, 2):
        cells = sorted(
            {
                (with_context, dataset_id)
                for (backend, with_context, dataset_id) in grouped
                if backend == backend_a and (backend_b, with_context, dataset_id) in grouped
            }
        )
        for with_context, dataset_id in cells:
            score = inter_model_alignment(
                grouped[(backend_a, with_context, dataset_id)],
                grouped[(backend_b, with_context, dataset_id)],
                scheme,
            )
            rows.append(AlignmentRow(backend_a, backend_b, dataset_id, with_context, score))
            per_overall.setdefault((backend_a, backend_b, with_context), []).append(score)
    rows.sort(key=lambda r: (r.backend_a, r.backend_b, r.with_context, r.dataset_id))
    overall = {key: sum(scores) / len(scores) for key, scores in per_overall.items()}
    return AlignmentTable(rows=tuple(rows), overall=overall)


# --------------------------------------------------------------------------
# Human-computer agreement


class MatchMode(Enum):
    EXACT = "exact"
    CLOSE = "close"


@dataclass(frozen=True)
class AgreementInputs:
    """Empirical per-header topic distributions for the human and machine sides.

    Keys are (dataset id, header). Human distributions range over vocabulary
    topics only; machine distributions additionally carry UNASSIGNED and
    hallucinated-text mass, which never contributes to agreement.
    """

    human: Mapping[tuple[str, str], Mapping[str, float]]
    machine: Mapping[tuple[str, str], Mapping[object, float]]


@dataclass(frozen=True)
class HcaResult:
    """Joint-probability agreement per header and its unweighted mean."""

    mode: MatchMode
    per_header: Mapping[tuple[str, str], float]
    aggregate: float


def human_distributions(
    labels: HumanLabels, vocab: Vocabulary
) -> dict[tuple[str, str], dict[str, float]]:
    """Per-header empirical topic distribution over participants (canonical labels)."""
    out: dict[tuple[str, str], dict[str, float]] = {}
    for key, by_participant in labels.by_header().items():
        counts: dict[str, int] = {}
        for topic_text in by_participant.values():
            topic = vocab.resolve(topic_text)
            if topic is None:
                raise ValueError(f"human label {topic_text!r} for {key} is not in the vocabulary")
            canon = normalize_label(topic.label)
            counts[canon] = counts.get(canon, 0) + 1
        total = sum(counts.values())
        out[key] = {label: count / total for label, count in counts.items()}
    return out


def machine_distributions(
    vocab: Vocabulary, corpus: Corpus, records: Iterable[RunRecord]
) -> dict[tuple[str, str], dict[object, float]]:
    """Per-header empirical token distribution over the runs of one backend/context group.

    The caller is expected to pass records of a single backend and context
    setting; datasets are handled independently.
    """
    by_dataset: dict[str, list[tuple]] = {}
    for record in sorted(records, key=lambda r: r.key):
        dataset = corpus.get(record.dataset_id)
        if dataset is None:
            raise ValueError(f"run {record.key} references unknown dataset {record.dataset_id!r}")
        by_dataset.setdefault(record.dataset_id, []).append(to_sequence(vocab, record))
    out: dict[tuple[str, str], dict[object, float]] = {}
    for dataset_id, sequences in by_dataset.items():
        dataset = corpus.get(dataset_id)
        assert dataset is not None
        runs = len(sequences)
        for i, header in enumerate(dataset.headers):
            counts: dict[object, int] = {}
            for sequence in sequences:
                token = sequence[i]
                counts[token] = counts.get(token, 0) + 1
            out[(dataset_id, header)] = {token: count / runs for token, count in counts.items()}
    return out


def _project(
    dist: Mapping[object, float], vocab: Vocabulary, mode: MatchMode
) -> dict[str, float]:
    """Restrict a distribution to vocabulary topics, generalizing in Close mode.

    Mass on UNASSIGNED or hallucinated tokens is dropped (it can never match
    a topic, so it contributes zero to the joint probability).
    """
    out: dict[str, float] = {}
    for token, mass in dist.items():
        if not isinstance(token, str):
            continue
        topic = vocab.resolve(token)
        if topic is None:
            continue
        if mode is MatchMode.CLOSE:
            topic = vocab.generalize(topic)
        label = normalize_label(topic.label)
        out[label] = out.get(label, 0.0) + mass
    return out


def hca(inputs: AgreementInputs, vocab: Vocabulary, mode: MatchMode) -> HcaResult:
    """Human-computer agreement: per header, the sum over topics of the
    product of human and machine topic probabilities.

    Close mode maps every topic through its parent on both sides before
    multiplying. Aggregation is the unweighted mean over all headers that
    carry human labels; such a header missing from the machine side is an
    error.
    """
    if not inputs.human:
        raise ValueError("agreement requires at least one header with human labels")
    per_header: dict[tuple[str, str], float] = {}
    for key in sorted(inputs.human):
        if key not in inputs.machine:
            raise ValueError(f"header {key!r} has human labels but no machine runs")
        human_side = _project(inputs.human[key], vocab, mode)
        machine_side = _project(inputs.machine[key], vocab, mode)
        per_header[key] = sum(mass * machine_side.get(label, 0.0) for label, mass in human_side.items())
    aggregate = sum(per_header.values()) / len(per_header)
    return HcaResult(mode=mode, per_header=per_header, aggregate=aggregate)
