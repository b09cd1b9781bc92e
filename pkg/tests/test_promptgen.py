"""Prompt rendering: template fidelity, context insertion, determinism."""

from __future__ import annotations

import pytest

from coltopic.corpus import Dataset
from coltopic.promptgen import PromptError, build_prompt


def test_matches_golden_prompt_without_context(livestock_dataset, small_vocab, fixtures_dir):
    golden = (fixtures_dir / "prompt_none.txt").read_text(encoding="utf-8")
    assert build_prompt(livestock_dataset, small_vocab, with_context=False).text == golden


def test_matches_golden_prompt_with_context(livestock_dataset, small_vocab, fixtures_dir):
    golden = (fixtures_dir / "prompt_with.txt").read_text(encoding="utf-8")
    assert build_prompt(livestock_dataset, small_vocab, with_context=True).text == golden


def test_context_variant_differs_only_by_description_block(livestock_dataset, small_vocab):
    plain = build_prompt(livestock_dataset, small_vocab, with_context=False).text.split("\n")
    contextual = build_prompt(livestock_dataset, small_vocab, with_context=True).text.split("\n")
    start = contextual.index("*Dataset Description:")
    block = ["*Dataset Description:"] + livestock_dataset.description.split("\n") + [""]
    assert contextual[start : start + len(block)] == block
    # removing the inserted block recovers the plain prompt line for line
    assert contextual[:start] + contextual[start + len(block) :] == plain
    # and the block sits among the inputs, before the column headers
    assert contextual.index("**Inputs:") < start < contextual.index("*Column Headers (List):")


def test_prompt_carries_vocabulary_block_and_every_header_once(livestock_dataset, small_vocab):
    prompt = build_prompt(livestock_dataset, small_vocab, with_context=False)
    assert small_vocab.serialize_for_prompt() in prompt.text
    headers_line = next(
        line for line in prompt.text.split("\n") if line.startswith("[") and line.endswith("]")
    )
    assert headers_line == "[" + ", ".join(livestock_dataset.headers) + "]"
    for header in livestock_dataset.headers:
        assert headers_line.count(header) == 1


def test_prompt_begins_with_task_line(livestock_dataset, small_vocab):
    prompt = build_prompt(livestock_dataset, small_vocab, with_context=False)
    assert prompt.text.startswith("Task: Column Header Classification with Controlled Vocabulary\n")
    assert "**Constraints:" in prompt.text
    assert "**Inputs:" in prompt.text


def test_with_context_requires_description(small_vocab):
    for description in (None, "", "   "):
        dataset = Dataset(id="x", description=description, headers=("a", "b"))
        with pytest.raises(PromptError, match="no description"):
            build_prompt(dataset, small_vocab, with_context=True)
        # the plain variant is always buildable
        assert build_prompt(dataset, small_vocab, with_context=False).with_context is False


def test_build_prompt_is_deterministic(livestock_dataset, small_vocab):
    first = build_prompt(livestock_dataset, small_vocab, with_context=True)
    second = build_prompt(livestock_dataset, small_vocab, with_context=True)
    assert first == second


def test_no_truncation_for_large_inputs(small_vocab):
    # linear growth: every header of a wide dataset survives verbatim
    headers = tuple(f"column {i:03d}" for i in range(400))
    dataset = Dataset(id="wide", headers=headers)
    text = build_prompt(dataset, small_vocab, with_context=False).text
    assert ", ".join(headers) in text


def test_full_vocabulary_survives_verbatim(livestock_dataset, cessda_vocab):
    text = build_prompt(livestock_dataset, cessda_vocab, with_context=False).text
    assert cessda_vocab.serialize_for_prompt() in text
    assert text.rstrip("\n").endswith("Other,No listed topic fits the item")
