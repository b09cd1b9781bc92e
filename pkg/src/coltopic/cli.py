"""Command-line entry point: classify, evaluate, report-plots and validate.

Exit codes: 0 on success, 1 when some classification cells failed (the rest
were still attempted and recorded), 2 on invalid input.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from coltopic.backends import StoreError, load_runs
from coltopic.campaign import (
    CampaignConfig,
    ConfigError,
    apply_overrides,
    load_config,
    load_inputs,
    run_campaign,
)
from coltopic.corpus import CorpusError, load_human_labels_file
from coltopic.reports import ReportError, evaluate_store, write_plot_bundle
from coltopic.vocab import VocabularyError

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INVALID = 2

_INPUT_ERRORS = (ConfigError, CorpusError, VocabularyError, StoreError, ReportError, OSError)


def _fail_invalid(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_INVALID)


def _config_options(command):
    options = [
        click.option("--config", "config_path", required=True, type=click.Path(), help="Campaign config (JSON)."),
        click.option("--store", "store_path", type=click.Path(), default=None, help="Run store override."),
        click.option(
            "--context", type=click.Choice(["none", "with", "both"]), default=None,
            help="Context settings to run.",
        ),
        click.option("--runs", type=click.IntRange(min=1), default=None, help="Runs per cell override."),
        click.option(
            "--backend", "backend_names", multiple=True,
            help="Restrict to the named backend(s); repeatable.",
        ),
        click.option("--alpha", type=float, default=None, help="Significance level override."),
        click.option("--match", type=float, default=None, help="Alignment match score override."),
        click.option("--mismatch", type=float, default=None, help="Alignment mismatch score override."),
        click.option("--gap", type=float, default=None, help="Alignment gap score override."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _load_effective_config(
    config_path: str,
    store_path: str | None,
    context: str | None,
    runs: int | None,
    backend_names: tuple[str, ...],
    alpha: float | None,
    match: float | None,
    mismatch: float | None,
    gap: float | None,
) -> CampaignConfig:
    config = load_config(config_path)
    return apply_overrides(
        config,
        store=store_path,
        context=context,
        runs=runs,
        backend_names=backend_names,
        alpha=alpha,
        match=match,
        mismatch=mismatch,
        gap=gap,
    )


@click.group()
@click.version_option(package_name="coltopic")
def main() -> None:
    """Classify dataset column headers against a controlled topic vocabulary
    with LLM backends, and evaluate the classifications."""


@main.command()
@_config_options
def classify(**kwargs) -> None:
    """Fill the run store: one classification call per missing cell."""
    try:
        config = _load_effective_config(**kwargs)
        report = run_campaign(config)
    except _INPUT_ERRORS as exc:
        _fail_invalid(str(exc))
        return
    click.echo(
        f"cells: {report.total_cells} total, {report.skipped} already recorded, "
        f"{report.completed} completed, {len(report.failures)} failed"
    )
    for failure in report.failures:
        context_name = "with" if failure.with_context else "none"
        click.echo(
            f"failed: {failure.backend} / {failure.dataset_id} / context={context_name} "
            f"/ run {failure.run_index}: {failure.error}",
            err=True,
        )
    sys.exit(EXIT_OK if report.ok else EXIT_PARTIAL)


@main.command()
@_config_options
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Report bundle directory.")
def evaluate(out_dir: str, **kwargs) -> None:
    """Evaluate a run store into a deterministic report bundle."""
    try:
        config = _load_effective_config(**kwargs)
        if not Path(config.store).is_file():
            raise ReportError(f"run store not found: {config.store}")
        records = load_runs(config.store)
        result = evaluate_store(config, records, out_dir)
    except _INPUT_ERRORS as exc:
        _fail_invalid(str(exc))
        return
    for path in result.paths:
        click.echo(f"wrote {path}")
    for notice in result.notices:
        click.echo(f"notice: {notice}")
    sys.exit(EXIT_OK)


@main.command("report-plots")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Evaluation bundle directory.")
def report_plots(out_dir: str) -> None:
    """Render outcome boxplot figures from an evaluation bundle."""
    try:
        written = write_plot_bundle(out_dir)
    except _INPUT_ERRORS as exc:
        _fail_invalid(str(exc))
        return
    for path in written:
        click.echo(f"wrote {path}")
    sys.exit(EXIT_OK)


@main.command()
@_config_options
def validate(**kwargs) -> None:
    """Lint the configured corpus, vocabulary and human labels."""
    try:
        config = _load_effective_config(**kwargs)
        vocab, corpus = load_inputs(config)
        general = sum(1 for t in vocab.topics if t.is_general)
        click.echo(f"vocabulary: {len(vocab.topics)} topics ({general} general, {len(vocab.topics) - general} specific)")
        header_count = sum(len(d.headers) for d in corpus.datasets)
        click.echo(f"corpus: {len(corpus.datasets)} dataset(s), {header_count} header(s)")
        if config.human_labels is not None:
            labels = load_human_labels_file(config.human_labels, vocab)
            click.echo(
                f"human labels: {len(labels)} entrie(s) from {len(labels.participants)} participant(s)"
            )
        else:
            click.echo("human labels: not configured")
    except _INPUT_ERRORS as exc:
        _fail_invalid(str(exc))
        return
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
