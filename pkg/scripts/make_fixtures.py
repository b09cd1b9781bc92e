#!/usr/bin/env python3
"""Regenerate the bundled demo data under data/.

Writes the corpus descriptors, a synthetic 3-participant human-labels file,
two replay stores recorded from the deterministic mock backends (a small
both-contexts store over 3 datasets and a paper-scale no-context store over
all 10), and the matching campaign configs. Everything is seeded, so
re-running the script reproduces the same bytes.
"""

from __future__ import annotations

import dataclasses
import json
import random
import tempfile
from pathlib import Path

from coltopic.backends import BackendConfig, load_runs
from coltopic.campaign import CampaignConfig, run_campaign
from coltopic.vocab import Vocabulary, load_vocabulary

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"

FIXED_TIMESTAMP = "2026-08-14T00:00:00+00:00"
SMALL_IDS = ("71950eng", "84952eng", "85538eng")

DATASETS = [
    {
        "id": "80393eng",
        "title": "Education expenditure and indicators",
        "description": (
            "This table contains figures on expenditure on education in the Netherlands: "
            "government expenditure, expenditure of education institutions, household and "
            "company expenditure, and derived indicators such as expenditure per pupil and "
            "expenditure as a percentage of GDP, together with pupil, student, staff and "
            "graduate numbers."
        ),
        "headers": [
            "Periods",
            "Total government expenditure on education",
            "Government expenditure on education institutions",
            "Government expenditure on primary education",
            "Government expenditure on secondary education",
            "Government expenditure on higher education",
            "Government expenditure on adult education",
            "Government transfers to households",
            "Government transfers to companies",
            "Student grants and loans",
            "School fees paid by households",
            "Total expenditure on education institutions",
            "Expenditure of public education institutions",
            "Expenditure of private education institutions",
            "Personnel costs of education institutions",
            "Material costs of education institutions",
            "Capital expenditure of education institutions",
            "Household expenditure on education",
            "Company expenditure on education",
            "Expenditure on in-company training",
            "International comparison indicator",
            "Education expenditure as percentage of GDP",
            "Public expenditure as percentage of GDP",
            "Private expenditure as percentage of GDP",
            "Expenditure per pupil in primary education",
            "Expenditure per student in secondary education",
            "Expenditure per student in higher education",
            "Expenditure per student relative to GDP per capita",
            "Pupils in primary education",
            "Pupils in special education",
            "Students in secondary education",
            "Students in vocational education",
            "Students in higher professional education",
            "Students in university education",
            "Participants in adult education",
            "Teachers in primary education (fte)",
            "Teachers in secondary education (fte)",
            "Teaching staff in higher education (fte)",
            "Support staff in education (fte)",
            "Pupil teacher ratio primary education",
            "Pupil teacher ratio secondary education",
            "Average class size primary education",
            "Graduates in secondary education",
            "Graduates in vocational education",
            "Graduates in higher professional education",
            "University graduates",
            "Doctoral degrees awarded",
            "Early school leavers",
            "Educational attainment of the population",
            "Population with primary education only",
            "Population with secondary education",
            "Population with tertiary education",
            "Participation rate of 4 year olds",
            "Participation rate of 5 to 14 year olds",
            "Participation rate of 15 to 19 year olds",
            "Participation rate of 20 to 29 year olds",
            "Lifelong learning participation rate",
            "Expected years in education",
            "Public funding share of education",
            "Private funding share of education",
            "Foreign students in higher education",
            "Dutch students studying abroad",
            "Education price index",
            "Education expenditure in constant prices",
            "Education expenditure per inhabitant",
            "Research expenditure of universities",
            "Student housing allowances",
            "Administrative costs of education",
        ],
    },
    {
        "id": "71950eng",
        "title": "Health expectancy; since 1981",
        "description": (
            "This table presents health expectancy of the Dutch population by sex and age: "
            "life expectancy in perceived good health, without physical limitations, in good "
            "mental health and without chronic diseases, based on the annual health survey."
        ),
        "headers": [
            "Sex",
            "Age",
            "Periods",
            "Total life expectancy",
            "Life expectancy in perceived good health",
            "Life expectancy without physical limitations",
            "Life expectancy in good mental health",
            "Life expectancy without chronic diseases",
            "Life expectancy with good oral health",
            "Healthy life expectancy based on GALI",
            "Years lived with physical limitations",
            "Years lived in less than good health",
            "Years lived with chronic diseases",
            "Years lived in good mental health",
        ],
    },
    {
        "id": "85538eng",
        "title": "Listed monuments; region 2023",
        "description": (
            "This table contains the number of listed monuments in the Netherlands by type "
            "of monument and region, as registered in the national heritage register."
        ),
        "headers": [
            "Type of listed monument",
            "Regions",
            "Periods",
            "Listed monuments",
        ],
    },
    {
        "id": "84952eng",
        "title": "Livestock",
        "description": (
            "This table contains the number of livestock animals kept on agricultural "
            "holdings in the Netherlands per livestock category, based on the annual "
            "agricultural census."
        ),
        "headers": [
            "Livestock categories",
            "Periods",
            "Number of animals",
        ],
    },
    {
        "id": "7425eng",
        "title": "Milk supply and dairy production",
        "description": (
            "This table contains figures on the supply of raw milk to dairy factories in the "
            "Netherlands and the production of dairy products such as butter, cheese and "
            "milk powder."
        ),
        "headers": [
            "Periods",
            "Volume of milk supplied",
            "Fat content of milk supplied",
            "Protein content of milk supplied",
            "Production of butter",
            "Production of cheese",
            "Production of milk powder",
            "Production of condensed milk",
            "Whole milk powder production",
            "Skimmed milk powder production",
            "Whey powder production",
        ],
    },
    {
        "id": "84710eng",
        "title": "Mobility per person per day; travel modes and travel purposes",
        "description": (
            "This table contains figures on the daily mobility of the Dutch population aged "
            "6 or over: average trips, distance and time travelled per person per day, by "
            "travel mode, travel purpose, personal and regional characteristics."
        ),
        "headers": [
            "Travel modes",
            "Travel purposes",
            "Personal characteristics",
            "Region characteristics",
            "Margins",
            "Periods",
            "Trips per person per day",
            "Distance travelled per person per day",
            "Time travelled per person per day",
            "Average trip distance",
            "Average trip duration",
            "Average trip speed",
        ],
    },
    {
        "id": "83566eng",
        "title": "Plant protection products; sales",
        "description": (
            "This table contains the quantities of active substances in plant protection "
            "products sold in the Netherlands, broken down by product group and active "
            "substance group."
        ),
        "headers": [
            "Product groups",
            "Active substance groups",
            "Periods",
            "Sales of active substance",
        ],
    },
    {
        "id": "83474eng",
        "title": "Population dynamics; month and year",
        "description": (
            "This table contains figures on the development of the Dutch population: live "
            "births, deaths, immigration, emigration and resulting population growth per "
            "month and per year."
        ),
        "headers": [
            "Periods",
            "Population at beginning of period",
            "Live births",
            "Deaths",
            "Immigration",
            "Emigration including administrative corrections",
            "Total population growth",
            "Population at end of period",
            "Population growth rate",
        ],
    },
    {
        "id": "37789eng",
        "title": "Social security; key figures",
        "description": (
            "This table contains key figures on Dutch social security schemes: numbers of "
            "benefit recipients and amounts paid for old age pensions, disability, "
            "unemployment, sickness, child benefit and social assistance."
        ),
        "headers": [
            "Periods",
            "General old age pension benefits",
            "Surviving dependants benefits",
            "Child benefit payments",
            "Disability benefits total",
            "Disability benefits for employees",
            "Disability benefits for young disabled",
            "Unemployment benefits",
            "Sickness benefits",
            "Social assistance benefits",
            "Supplementary benefits",
            "Benefits for older unemployed",
            "Number of old age pensioners",
            "Number of surviving dependants",
            "Families receiving child benefit",
            "Number of disability benefit recipients",
            "Number of unemployment benefit recipients",
            "Number of social assistance recipients",
            "Expenditure on social security schemes",
        ],
    },
    {
        "id": "81156eng",
        "title": "Trade and industry; finance; SIC 2008",
        "description": (
            "This table contains financial figures of non-financial enterprises in the "
            "Netherlands by economic activity (SIC 2008): profit and loss account items, "
            "balance sheet items and derived indicators."
        ),
        "headers": [
            "Industries SIC 2008",
            "Periods",
            "Number of enterprises",
            "Net turnover",
            "Turnover from domestic sales",
            "Turnover from foreign sales",
            "Other operating income",
            "Total operating income",
            "Purchase value of goods sold",
            "Costs of outsourced work",
            "Personnel costs total",
            "Wages and salaries",
            "Social security costs",
            "Pension costs",
            "Other personnel costs",
            "Depreciation on fixed assets",
            "Other operating costs",
            "Total operating costs",
            "Operating result",
            "Financial revenues",
            "Financial costs",
            "Financial result",
            "Pre-tax result",
            "Corporate tax paid",
            "Result after taxation",
            "Balance sheet total",
            "Tangible fixed assets",
            "Intangible fixed assets",
            "Financial fixed assets",
            "Total fixed assets",
            "Stocks and inventories",
            "Short-term receivables",
            "Cash and cash equivalents",
            "Total current assets",
            "Group equity",
            "Provisions",
            "Long-term liabilities",
            "Short-term liabilities",
            "Total liabilities",
            "Investments in tangible assets",
            "Employees in full-time equivalents",
            "Labour productivity indicator",
            "Profitability of total capital",
        ],
    },
]

EXPECTED_COLUMNS = {
    "80393eng": 68, "71950eng": 14, "85538eng": 4, "84952eng": 3, "7425eng": 11,
    "84710eng": 12, "83566eng": 4, "83474eng": 9, "37789eng": 19, "81156eng": 43,
}

# Plausible per-dataset topic pools for the synthetic annotators; the first
# entry is the dominant choice. All labels must resolve in the vocabulary.
LABEL_POOLS = {
    "80393eng": ["Educational Policy", "Higher and Further Education",
                 "Compulsory and Pre-School Education", "Education",
                 "Economic Conditions and Indicators"],
    "71950eng": ["General Health and Well-Being", "Mortality", "Health",
                 "Specific Diseases and Medical Conditions"],
    "85538eng": ["Cultural Activities and Participation", "Society and Culture",
                 "Housing", "Other"],
    "84952eng": ["Livestock and Animal Husbandry", "Agriculture and Rural Industry",
                 "Trade, Industry and Markets"],
    "7425eng": ["Agriculture and Rural Industry", "Livestock and Animal Husbandry",
                "Manufacturing Industry", "Trade, Industry and Markets"],
    "84710eng": ["Passenger Transport", "Transport and Travel",
                 "Public Transport Systems", "Time Use"],
    "83566eng": ["Environmental Degradation and Pollution", "Natural Environment",
                 "Agriculture and Rural Industry"],
    "83474eng": ["Demography and Population", "Migration", "Fertility", "Mortality"],
    "37789eng": ["Retirement", "Unemployment", "Labour and Employment",
                 "Economic Policy", "Equality and Inequality"],
    "81156eng": ["Business and Industrial Management", "Economic Conditions and Indicators",
                 "Trade, Industry and Markets", "Retail and Wholesale Trade",
                 "National Accounts"],
}

# Structural headers that annotators file under the abstention topic.
HEADER_OVERRIDES = {
    "Periods": "Other",
    "Regions": "Other",
    "Margins": "Other",
    "Sex": "Demography and Population",
    "Age": "Demography and Population",
    "Personal characteristics": "Demography and Population",
    "Region characteristics": "Other",
}

MOCK_BACKENDS = [
    BackendConfig(
        name="mock-a",
        kind="mock",
        behavior={
            "seed": 11, "stability": 0.97, "p_specific": 0.55, "p_general": 0.25,
            "p_other": 0.12, "p_hallucination": 0.05, "p_skip": 0.03,
        },
    ),
    BackendConfig(
        name="mock-b",
        kind="mock",
        contexts=("none",),
        behavior={
            "seed": 23, "stability": 0.5, "p_specific": 0.3, "p_general": 0.2,
            "p_other": 0.1, "p_hallucination": 0.25, "p_skip": 0.15,
            "p_fence": 0.3, "p_prose": 0.3, "p_recase": 0.2, "p_refusal": 0.05,
        },
    ),
    BackendConfig(
        name="mock-c",
        kind="mock",
        behavior={
            "seed": 37, "stability": 0.8, "p_specific": 0.45, "p_general": 0.3,
            "p_other": 0.1, "p_hallucination": 0.08, "p_skip": 0.07,
            "p_fence": 0.1,
        },
    ),
]


def write_corpus() -> None:
    full = DATA / "corpus"
    small = DATA / "corpus_small"
    full.mkdir(parents=True, exist_ok=True)
    small.mkdir(parents=True, exist_ok=True)
    for dataset in DATASETS:
        count = EXPECTED_COLUMNS[dataset["id"]]
        assert len(dataset["headers"]) == count, (dataset["id"], len(dataset["headers"]), count)
        assert all("," not in h for h in dataset["headers"]), dataset["id"]
        text = json.dumps(dataset, indent=2, ensure_ascii=False) + "\n"
        (full / f"{dataset['id']}.json").write_text(text, encoding="utf-8")
        if dataset["id"] in SMALL_IDS:
            (small / f"{dataset['id']}.json").write_text(text, encoding="utf-8")


def write_labels(vocab: Vocabulary) -> None:
    import csv
    import io

    rng = random.Random(20240214)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("participant", "dataset", "header", "topic"))
    for dataset in DATASETS:
        pool = LABEL_POOLS[dataset["id"]]
        for label in pool:
            assert vocab.resolve(label) is not None, label
        for header in dataset["headers"]:
            consensus = HEADER_OVERRIDES.get(header)
            if consensus is None:
                consensus = pool[0] if rng.random() < 0.6 else rng.choice(pool)
            alternatives = [t for t in pool + ["Other"] if t != consensus]
            for participant, agree_p in (("p1", 1.0), ("p2", 0.75), ("p3", 0.6)):
                topic = consensus if rng.random() < agree_p else rng.choice(alternatives)
                writer.writerow((participant, dataset["id"], header, topic))
    (DATA / "human_labels.csv").write_text(buffer.getvalue(), encoding="utf-8")


def record_store(target: Path, corpus_dir: Path, context: str, runs: int) -> int:
    """Run the mock campaign into a fresh store and freeze its timestamps."""
    with tempfile.TemporaryDirectory() as tmp:
        store = Path(tmp) / "store.jsonl"
        config = CampaignConfig(
            corpus_dir=str(corpus_dir),
            vocabulary=str(DATA / "cessda_topics.csv"),
            store=str(store),
            backends=tuple(MOCK_BACKENDS),
            runs=runs,
            context=context,
            parallelism=4,
        )
        report = run_campaign(config)
        assert report.ok, report.failures
        records = load_runs(store)
    lines = [
        dataclasses.replace(record, timestamp=FIXED_TIMESTAMP).to_json() for record in records
    ]
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(records)


def write_configs() -> None:
    def replay_entry(name: str, source: str, contexts: list[str] | None = None) -> dict:
        entry: dict = {"name": name, "kind": "replay", "source": source}
        if contexts is not None:
            entry["contexts"] = contexts
        return entry

    small = {
        "corpus": "corpus_small",
        "vocabulary": "cessda_topics.csv",
        "store": "runs_small.jsonl",
        "runs": 10,
        "context": "both",
        "human_labels": "human_labels.csv",
        "backends": [
            replay_entry("mock-a", "replay_small.jsonl"),
            replay_entry("mock-b", "replay_small.jsonl", ["none"]),
            replay_entry("mock-c", "replay_small.jsonl"),
        ],
    }
    full = {
        "corpus": "corpus",
        "vocabulary": "cessda_topics.csv",
        "store": "runs_full.jsonl",
        "runs": 10,
        "context": "none",
        "human_labels": "human_labels.csv",
        "backends": [
            replay_entry("mock-a", "replay_full.jsonl"),
            replay_entry("mock-b", "replay_full.jsonl", ["none"]),
            replay_entry("mock-c", "replay_full.jsonl"),
        ],
    }
    (DATA / "config_small.json").write_text(json.dumps(small, indent=2) + "\n", encoding="utf-8")
    (DATA / "config_full.json").write_text(json.dumps(full, indent=2) + "\n", encoding="utf-8")


def main() -> None:
    DATA.mkdir(exist_ok=True)
    vocab = load_vocabulary(DATA / "cessda_topics.csv")
    write_corpus()
    write_labels(vocab)
    n_small = record_store(DATA / "replay_small.jsonl", DATA / "corpus_small", "both", 10)
    n_full = record_store(DATA / "replay_full.jsonl", DATA / "corpus", "none", 10)
    write_configs()
    print(f"corpus: {len(DATASETS)} datasets ({sum(len(d['headers']) for d in DATASETS)} headers)")
    print(f"replay_small.jsonl: {n_small} records")
    print(f"replay_full.jsonl: {n_full} records")


if __name__ == "__main__":
    main()
