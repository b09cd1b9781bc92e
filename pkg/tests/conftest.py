"""Shared fixtures: bundled data paths and small in-memory inputs."""

from __future__ import annotations

from pathlib import Path

import pytest

from coltopic import Dataset, load_corpus, load_vocabulary, parse_vocabulary
from coltopic.backends import RunRecord

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
FIXTURES = Path(__file__).parent / "fixtures"

SMALL_VOCAB_CSV = """Topic Label,Topic Description,Parent Topic
Trade and Industry,Commerce and production sectors,
Agriculture,Farming and crop production,Trade and Industry
Livestock Farming,Keeping of farm animals,Trade and Industry
Economic Indicators,Measures of economic performance,Trade and Industry
Natural Environment,The natural world,
Plants and Animals,Flora and fauna,Natural Environment
Demography,Population size and structure,
Other,No listed topic fits the item,
"""


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def cessda_vocab():
    return load_vocabulary(DATA / "cessda_topics.csv")


@pytest.fixture(scope="session")
def corpus():
    return load_corpus(DATA / "corpus")


@pytest.fixture()
def small_vocab():
    return parse_vocabulary(SMALL_VOCAB_CSV)


@pytest.fixture()
def livestock_dataset() -> Dataset:
    return Dataset(
        id="84952eng",
        title="Livestock",
        description=(
            "This table contains the number of livestock animals kept on agricultural "
            "holdings in the Netherlands per livestock category, based on the annual "
            "agricultural census."
        ),
        headers=("Livestock categories", "Periods", "Number of animals"),
    )


def make_record(
    backend: str = "m",
    dataset_id: str = "84952eng",
    run_index: int = 1,
    with_context: bool = False,
    assignments: tuple[str | None, ...] = (None, None, None),
    error: str | None = None,
    raw_response: str = "{}",
) -> RunRecord:
    return RunRecord(
        backend=backend,
        dataset_id=dataset_id,
        run_index=run_index,
        with_context=with_context,
        raw_response=raw_response,
        assignments=assignments,
        error=error,
    )
