"""Deterministic construction of the classification prompt.

The prompt wording is the experimental treatment, so the template below is
normative and rendered character for character. The only variation is the
optional dataset-description block, inserted among the inputs immediately
before the column headers.
"""

from __future__ import annotations

from dataclasses import dataclass

from coltopic.corpus import Dataset
from coltopic.vocab import Vocabulary


class PromptError(ValueError):
    """The requested prompt cannot be built from the given inputs."""


PROMPT_TEMPLATE = """Task: Column Header Classification with Controlled Vocabulary

You are provided with two inputs, below: 1) the column headers of a dataset (in a list format), and 2) a controlled vocabulary of topics (in a CSV format). Your goal is to classify each column header with a relevant topic. The controlled vocabulary has two columns: the 'Topic Label' and 'Topic Description'. For each column header, assign a topic from the controlled vocabulary based on semantic relevance and the definition provided for each topic. The result should be structured in JSON format, where each column header is paired with its assigned topic's label.

**Constraints:
Use only topics provided in the controlled vocabulary, do not add any topics that are not included.
Do not change the text of the column headers or topic's label.
Only return the output in a JSON format, and no additional text.

**Inputs:
{description_block}
*Column Headers (List):
[{headers}]

*Controlled Vocabulary (CSV Format):
{vocabulary_csv}"""

_DESCRIPTION_BLOCK = "\n*Dataset Description:\n{description}\n"


@dataclass(frozen=True)
class PromptText:
    """A fully rendered prompt and whether it carries the description context."""

    text: str
    with_context: bool


def build_prompt(dataset: Dataset, vocab: Vocabulary, with_context: bool) -> PromptText:
    """Render the classification prompt for one dataset.

    Deterministic: identical inputs produce identical text. The with-context
    variant differs from the plain one only by the inserted
    ``*Dataset Description:`` block. No truncation is performed here; an
    oversize prompt is the backend's error to report.
    """
    if with_context:
        description = (dataset.description or "").strip()
        if not description:
            raise PromptError(f"dataset {dataset.id!r} has no description, cannot build a with-context prompt")
        description_block = _DESCRIPTION_BLOCK.format(description=description)
    else:
        description_block = ""
    text = PROMPT_TEMPLATE.format(
        description_block=description_block,
        headers=", ".join(dataset.headers),
        vocabulary_csv=vocab.serialize_for_prompt(),
    )
    return PromptText(text=text, with_context=with_context)
