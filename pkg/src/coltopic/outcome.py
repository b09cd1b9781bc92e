"""Five-way outcome taxonomy over parsed assignments and its tabulation.

Every (header, run) cell lands in exactly one bucket: Specific (a topic
with a parent), General (a parentless topic other than the abstention
topic), Other (the abstention topic itself), Unassigned (no classification)
or Hallucination (text that resolves to no vocabulary topic).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from coltopic.backends import RunRecord
from coltopic.corpus import Corpus, Dataset
from coltopic.vocab import Vocabulary, normalize_label


class OutcomeLabel(Enum):
    SPECIFIC = "specific"
    GENERAL = "general"
    OTHER = "other"
    UNASSIGNED = "unassigned"
    HALLUCINATION = "hallucination"

    @property
    def title(self) -> str:
        return self.value.capitalize()


OUTCOME_ORDER = (
    OutcomeLabel.SPECIFIC,
    OutcomeLabel.GENERAL,
    OutcomeLabel.OTHER,
    OutcomeLabel.UNASSIGNED,
    OutcomeLabel.HALLUCINATION,
)


def label_assignment(vocab: Vocabulary, assignment: str | None) -> OutcomeLabel:
    """Classify one optional raw topic text against a vocabulary.

    Abstention is detected after resolution, so an out-of-vocabulary synonym
    of the abstention topic counts as Hallucination rather than Other.
    """
    if assignment is None or not assignment.strip():
        return OutcomeLabel.UNASSIGNED
    topic = vocab.resolve(assignment)
    if topic is None:
        return OutcomeLabel.HALLUCINATION
    if normalize_label(topic.label) == normalize_label(vocab.abstention_label):
        return OutcomeLabel.OTHER
    return OutcomeLabel.SPECIFIC if topic.parent_label is not None else OutcomeLabel.GENERAL


@dataclass(frozen=True)
class OutcomeTally:
    """Per-label counts for one run of one dataset."""

    backend: str
    dataset_id: str
    with_context: bool
    run_index: int
    counts: Mapping[OutcomeLabel, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def proportions(self) -> dict[OutcomeLabel, float]:
        total = self.total
        return {label: self.counts.get(label, 0) / total for label in OUTCOME_ORDER}


@dataclass(frozen=True)
class PooledProportions:
    """Per-run label proportions pooled across all datasets of one backend/context."""

    backend: str
    with_context: bool
    run_index: int
    counts: Mapping[OutcomeLabel, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def proportions(self) -> dict[OutcomeLabel, float]:
        total = self.total
        return {label: self.counts.get(label, 0) / total for label in OUTCOME_ORDER}


def tally_run(vocab: Vocabulary, dataset: Dataset, run: RunRecord) -> dict[OutcomeLabel, int]:
    """Count outcome labels over every assignment of one run.

    The counts always sum to the dataset's header count; a failed run is all
    Unassigned by the record's own invariant.
    """
    if len(run.assignments) != len(dataset.headers):
        raise ValueError(
            f"run {run.key} carries {len(run.assignments)} assignments "
            f"for {len(dataset.headers)} headers of dataset {dataset.id!r}"
        )
    counts: Counter[OutcomeLabel] = Counter(label_assignment(vocab, a) for a in run.assignments)
    return {label: counts.get(label, 0) for label in OUTCOME_ORDER}


def tally_campaign(
    vocab: Vocabulary, corpus: Corpus, runs: Iterable[RunRecord]
) -> tuple[list[OutcomeTally], list[PooledProportions]]:
    """Tabulate outcomes for a whole run set.

    Returns per-run tallies (one per store record) and, pooled across
    datasets, the per-run label proportions for each backend and context
    setting - the observations behind outcome boxplots.
    """
    tallies: list[OutcomeTally] = []
    pooled: dict[tuple[str, bool, int], Counter[OutcomeLabel]] = {}
    for run in sorted(runs, key=lambda r: r.key):
        dataset = corpus.get(run.dataset_id)
        if dataset is None:
            raise ValueError(f"run {run.key} references unknown dataset {run.dataset_id!r}")
        counts = tally_run(vocab, dataset, run)
        tallies.append(
            OutcomeTally(
                backend=run.backend,
                dataset_id=run.dataset_id,
                with_context=run.with_context,
                run_index=run.run_index,
                counts=counts,
            )
        )
        bucket = pooled.setdefault((run.backend, run.with_context, run.run_index), Counter())
        bucket.update(counts)
    pooled_rows = [
        PooledProportions(
            backend=backend,
            with_context=with_context,
            run_index=run_index,
            counts={label: counter.get(label, 0) for label in OUTCOME_ORDER},
        )
        for (backend, with_context, run_index), counter in sorted(pooled.items())
    ]
    return tallies, pooled_rows
