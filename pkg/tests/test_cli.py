"""Command-line interface: classify, evaluate, report-plots, validate."""

from __future__ import annotations

import csv
import json

import pytest
from click.testing import CliRunner

from coltopic.backends import load_runs, record_run
from coltopic.cli import main

from tests.conftest import SMALL_VOCAB_CSV, make_record


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))

DATASETS = {
    "d1": {
        "id": "d1",
        "title": "First",
        "description": "Numbers about the first thing.",
        "headers": ["Alpha", "Beta"],
    },
    "d2": {
        "id": "d2",
        "title": "Second",
        "description": None,
        "headers": ["Gamma"],
    },
}

LABELS_CSV = (
    "participant,dataset,header,topic\n"
    "p1,d1,Alpha,Agriculture\n"
    "p2,d1,Alpha,Livestock Farming\n"
    "p1,d1,Beta,Demography\n"
    "p2,d1,Beta,Demography\n"
)


@pytest.fixture()
def workspace(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for name, payload in DATASETS.items():
        (corpus / f"{name}.json").write_text(json.dumps(payload), encoding="utf-8")
    (tmp_path / "vocab.csv").write_text(SMALL_VOCAB_CSV, encoding="utf-8")
    (tmp_path / "labels.csv").write_text(LABELS_CSV, encoding="utf-8")
    config = {
        "corpus": "corpus",
        "vocabulary": "vocab.csv",
        "store": "runs.jsonl",
        "human_labels": "labels.csv",
        "backends": [
            {"name": "mock-a", "kind": "mock", "behavior": {"seed": 5}},
            {"name": "mock-b", "kind": "mock", "behavior": {"seed": 6}},
        ],
        "runs": 2,
        "context": "none",
    }
    (tmp_path / "campaign.json").write_text(json.dumps(config), encoding="utf-8")
    return tmp_path


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


# --------------------------------------------------------------------------
# classify


def test_classify_fills_the_store(workspace):
    result = invoke("classify", "--config", workspace / "campaign.json")
    assert result.exit_code == 0, result.output
    assert "cells: 8 total, 0 already recorded, 8 completed, 0 failed" in result.stdout
    records = load_runs(workspace / "runs.jsonl")
    assert len(records) == 8
    assert {r.backend for r in records} == {"mock-a", "mock-b"}


def test_classify_is_resumable(workspace):
    first = invoke("classify", "--config", workspace / "campaign.json")
    assert first.exit_code == 0
    second = invoke("classify", "--config", workspace / "campaign.json")
    assert second.exit_code == 0
    assert "8 already recorded, 0 completed" in second.stdout


def test_classify_partial_failure_exits_1(workspace):
    result = invoke(
        "classify", "--config", workspace / "campaign.json",
        "--context", "both", "--runs", "1", "--backend", "mock-a",
    )
    assert result.exit_code == 1
    assert "3 completed, 1 failed" in result.stdout
    assert "failed: mock-a / d2 / context=with / run 1" in result.stderr
    assert "no description" in result.stderr
    # the failing cell did not block the others
    assert len(load_runs(workspace / "runs.jsonl")) == 3


def test_classify_backend_filter(workspace):
    result = invoke(
        "classify", "--config", workspace / "campaign.json", "--backend", "mock-b"
    )
    assert result.exit_code == 0
    assert {r.backend for r in load_runs(workspace / "runs.jsonl")} == {"mock-b"}


def test_classify_unknown_backend_exits_2(workspace):
    result = invoke(
        "classify", "--config", workspace / "campaign.json", "--backend", "nope"
    )
    assert result.exit_code == 2
    assert "error:" in result.stderr and "unknown backend" in result.stderr


def test_classify_missing_config_exits_2(workspace):
    result = invoke("classify", "--config", workspace / "absent.json")
    assert result.exit_code == 2
    assert "cannot read config" in result.stderr


def test_classify_store_override(workspace):
    result = invoke(
        "classify", "--config", workspace / "campaign.json",
        "--store", workspace / "elsewhere.jsonl", "--runs", "1",
    )
    assert result.exit_code == 0
    assert not (workspace / "runs.jsonl").exists()
    assert len(load_runs(workspace / "elsewhere.jsonl")) == 4


# --------------------------------------------------------------------------
# evaluate


def test_evaluate_writes_bundle(workspace):
    assert invoke("classify", "--config", workspace / "campaign.json").exit_code == 0
    result = invoke(
        "evaluate", "--config", workspace / "campaign.json", "--out", workspace / "bundle"
    )
    assert result.exit_code == 0, result.output
    for name in (
        "outcome_tallies.csv",
        "outcome_proportions.csv",
        "consistency.csv",
        "alignment.csv",
        "agreement.csv",
        "agreement_summary.csv",
        "notices.txt",
    ):
        assert (workspace / "bundle" / name).is_file(), name
        assert f"wrote {workspace / 'bundle' / name}" in result.stdout
    assert "notice:" in result.stdout


def test_evaluate_missing_store_exits_2(workspace):
    result = invoke(
        "evaluate", "--config", workspace / "campaign.json", "--out", workspace / "bundle"
    )
    assert result.exit_code == 2
    assert "run store not found" in result.stderr


def test_evaluate_corrupt_store_exits_2(workspace):
    (workspace / "runs.jsonl").write_text("not json\n", encoding="utf-8")
    result = invoke(
        "evaluate", "--config", workspace / "campaign.json", "--out", workspace / "bundle"
    )
    assert result.exit_code == 2
    assert "error:" in result.stderr


def test_evaluate_scoring_override_changes_tables(workspace):
    # two runs that differ in one position, so the mismatch score matters
    record_run(
        workspace / "runs.jsonl",
        make_record("mock-a", "d1", 1, assignments=("Agriculture", "Demography")),
    )
    record_run(
        workspace / "runs.jsonl",
        make_record("mock-a", "d1", 2, assignments=("Livestock Farming", "Demography")),
    )
    default = invoke(
        "evaluate", "--config", workspace / "campaign.json", "--out", workspace / "b1"
    )
    shifted = invoke(
        "evaluate", "--config", workspace / "campaign.json", "--out", workspace / "b2",
        "--mismatch", "0.9",
    )
    assert default.exit_code == 0 and shifted.exit_code == 0

    def consistency(bundle):
        rows = read_csv(workspace / bundle / "consistency.csv")[1:]
        return {(r[0], r[1]): r[3] for r in rows}

    assert consistency("b1")[("mock-a", "d1")] == "0.500000"
    assert consistency("b2")[("mock-a", "d1")] == "0.950000"


# --------------------------------------------------------------------------
# report-plots and validate


def test_report_plots_renders_figures(workspace):
    assert invoke("classify", "--config", workspace / "campaign.json").exit_code == 0
    assert (
        invoke("evaluate", "--config", workspace / "campaign.json", "--out", workspace / "bundle").exit_code
        == 0
    )
    result = invoke("report-plots", "--out", workspace / "bundle")
    assert result.exit_code == 0, result.output
    for name in ("outcomes_mock-a_none.svg", "outcomes_mock-b_none.svg", "boxplot_stats.csv"):
        assert (workspace / "bundle" / name).is_file(), name
    assert result.stdout.count("wrote ") == 3


def test_report_plots_without_bundle_exits_2(workspace):
    result = invoke("report-plots", "--out", workspace / "empty")
    assert result.exit_code == 2
    assert "run evaluate first" in result.stderr


def test_validate_reports_input_shapes(workspace):
    result = invoke("validate", "--config", workspace / "campaign.json")
    assert result.exit_code == 0, result.output
    assert "vocabulary: 8 topics (4 general, 4 specific)" in result.stdout
    assert "corpus: 2 dataset(s), 3 header(s)" in result.stdout
    assert "human labels: 4 entrie(s) from 2 participant(s)" in result.stdout


def test_validate_without_labels(workspace):
    config = json.loads((workspace / "campaign.json").read_text(encoding="utf-8"))
    del config["human_labels"]
    (workspace / "campaign.json").write_text(json.dumps(config), encoding="utf-8")
    result = invoke("validate", "--config", workspace / "campaign.json")
    assert result.exit_code == 0
    assert "human labels: not configured" in result.stdout


def test_validate_rejects_broken_vocab(workspace):
    (workspace / "vocab.csv").write_text("Topic Label,Topic Description,Parent Topic\n", encoding="utf-8")
    result = invoke("validate", "--config", workspace / "campaign.json")
    assert result.exit_code == 2
    assert "error:" in result.stderr


def test_help_lists_commands():
    result = invoke("--help")
    assert result.exit_code == 0
    for command in ("classify", "evaluate", "report-plots", "validate"):
        assert command in result.stdout
