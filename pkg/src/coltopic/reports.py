"""Deterministic evaluation report bundle: CSV tables, notices and boxplots.

The bundle is a directory of machine-consumable CSVs derived purely from
the run store (evaluation never calls a backend), plus standalone SVG
boxplot figures of the per-run outcome proportions. Byte-identical inputs
produce byte-identical bundles.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from coltopic.backends import RunRecord
from coltopic.campaign import CampaignConfig, load_inputs
from coltopic.corpus import Corpus, HumanLabels, load_human_labels_file
from coltopic.metrics import (
    AgreementInputs,
    MatchMode,
    ScoringScheme,
    alignment_table,
    consistency_table,
    hca,
    human_distributions,
    machine_distributions,
)
from coltopic.outcome import OUTCOME_ORDER, tally_campaign
from coltopic.stats import Observation, anova, tukey_hsd
from coltopic.vocab import Vocabulary


class ReportError(ValueError):
    """The evaluation inputs cannot produce a report bundle."""


OVERALL = "(overall)"
MISSING_CELL = "X"


def _context_name(with_context: bool) -> str:
    return "with" if with_context else "none"


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _fmt_p(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return f"{value:.6g}"


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    path.write_text(buffer.getvalue(), encoding="utf-8")
    return path


@dataclass(frozen=True)
class BundleResult:
    """Files written by one evaluation, plus human-readable notices."""

    out_dir: Path
    paths: tuple[Path, ...]
    notices: tuple[str, ...]


def write_evaluation_bundle(
    vocab: Vocabulary,
    corpus: Corpus,
    records: Sequence[RunRecord],
    out_dir: str | Path,
    labels: HumanLabels | None = None,
    scheme: ScoringScheme = ScoringScheme(),
    alpha: float = 0.05,
) -> BundleResult:
    """Write every evaluation table derivable from the given run records."""
    if not records:
        raise ReportError("the run store is empty; nothing to evaluate")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    notices: list[str] = []
    paths: list[Path] = []

    failed = sum(1 for r in records if r.error is not None)
    if failed:
        notices.append(f"{failed} run(s) recorded with errors; their headers count as unassigned")

    tallies, pooled = tally_campaign(vocab, corpus, records)
    paths.append(
        _write_csv(
            out / "outcome_tallies.csv",
            ("backend", "dataset", "context", "run", *(label.value for label in OUTCOME_ORDER)),
            (
                (
                    t.backend,
                    t.dataset_id,
                    _context_name(t.with_context),
                    str(t.run_index),
                    *(str(t.counts[label]) for label in OUTCOME_ORDER),
                )
                for t in tallies
            ),
        )
    )
    paths.append(
        _write_csv(
            out / "outcome_proportions.csv",
            ("backend", "context", "run", *(label.value for label in OUTCOME_ORDER)),
            (
                (
                    p.backend,
                    _context_name(p.with_context),
                    str(p.run_index),
                    *(_fmt(p.proportions()[label]) for label in OUTCOME_ORDER),
                )
                for p in pooled
            ),
        )
    )

    consistency = consistency_table(vocab, records, scheme)
    consistency_rows = [
        (row.backend, row.dataset_id, _context_name(row.with_context), _fmt(row.score))
        for row in consistency.rows
    ]
    consistency_rows += [
        (backend, OVERALL, _context_name(with_context), _fmt(score))
        for (backend, with_context), score in sorted(consistency.overall.items())
    ]
    paths.append(
        _write_csv(out / "consistency.csv", ("backend", "dataset", "context", "consistency"), consistency_rows)
    )
    if not consistency.rows:
        notices.append("no (backend, dataset, context) group has 2 or more runs; consistency table is empty")

    alignment = alignment_table(vocab, records, scheme)
    alignment_rows = [
        (row.backend_a, row.backend_b, row.dataset_id, _context_name(row.with_context), _fmt(row.score))
        for row in alignment.rows
    ]
    alignment_rows += [
        (backend_a, backend_b, OVERALL, _context_name(with_context), _fmt(score))
        for (backend_a, backend_b, with_context), score in sorted(alignment.overall.items())
    ]
    paths.append(
        _write_csv(
            out / "alignment.csv",
            ("backendA", "backendB", "dataset", "context", "alignment"),
            alignment_rows,
        )
    )
    if len({r.backend for r in records}) < 2:
        notices.append("fewer than two backends in the store; alignment table is empty")

    if labels is not None and len(labels):
        paths.extend(_write_agreement(vocab, corpus, records, labels, out, notices))
    else:
        notices.append("no human labels provided; agreement tables omitted")

    paths.extend(_write_significance(consistency.rows, alpha, out, notices))

    if not notices:
        notices.append("none")
    notices_path = out / "notices.txt"
    notices_path.write_text("\n".join(notices) + "\n", encoding="utf-8")
    paths.append(notices_path)
    return BundleResult(out_dir=out, paths=tuple(paths), notices=tuple(notices))


def _validate_labels(corpus: Corpus, labels: HumanLabels, notices: list[str]) -> HumanLabels:
    """Drop labels for datasets outside the corpus (with a notice); reject unknown headers.

    A labels file may cover a wider collection than the corpus under
    evaluation, so foreign dataset ids are not an error. A label naming a
    corpus dataset but a header it does not have is a hard error.
    """
    ignored = sorted(
        {dataset_id for (_, dataset_id, _) in labels.entries if corpus.get(dataset_id) is None}
    )
    if ignored:
        notices.append(
            f"human labels for dataset(s) outside the corpus ignored: {', '.join(ignored)}"
        )
    problems: list[str] = []
    kept: dict[tuple[str, str, str], str] = {}
    seen_bad: set[tuple[str, str]] = set()
    for key in sorted(labels.entries):
        _, dataset_id, header = key
        dataset = corpus.get(dataset_id)
        if dataset is None:
            continue
        if header not in dataset.headers:
            if (dataset_id, header) not in seen_bad:
                seen_bad.add((dataset_id, header))
                problems.append(f"dataset {dataset_id!r} has no header {header!r}")
            continue
        kept[key] = labels.entries[key]
    if problems:
        raise ReportError("human label(s) reference unknown headers:\n  " + "\n  ".join(problems))
    return HumanLabels(entries=kept, unresolved=labels.unresolved)


_MODE_ORDER = (MatchMode.EXACT, MatchMode.CLOSE)


def _write_agreement(
    vocab: Vocabulary,
    corpus: Corpus,
    records: Sequence[RunRecord],
    labels: HumanLabels,
    out: Path,
    notices: list[str],
) -> list[Path]:
    labels = _validate_labels(corpus, labels, notices)
    if not labels.entries:
        notices.append("no human labels fall inside the corpus; agreement tables omitted")
        return []
    human = human_distributions(labels, vocab)
    backends = sorted({r.backend for r in records})
    contexts = (False, True)
    detail_rows: list[tuple[str, str, str, str, str]] = []
    summary: dict[tuple[str, bool, MatchMode], str] = {}
    for backend in backends:
        for with_context in contexts:
            group = [r for r in records if r.backend == backend and r.with_context == with_context]
            if not group:
                notices.append(
                    f"backend {backend!r} has no runs with context={_context_name(with_context)}; "
                    f"agreement cell rendered as {MISSING_CELL}"
                )
                continue
            machine = machine_distributions(vocab, corpus, group)
            covered = {r.dataset_id for r in group}
            human_here = {key: dist for key, dist in human.items() if key[0] in covered}
            if not human_here:
                notices.append(
                    f"backend {backend!r} context={_context_name(with_context)}: runs cover no dataset "
                    f"with human labels; agreement cell rendered as {MISSING_CELL}"
                )
                continue
            inputs = AgreementInputs(human=human_here, machine=machine)
            for mode in _MODE_ORDER:
                result = hca(inputs, vocab, mode)
                for (dataset_id, header), score in sorted(result.per_header.items()):
                    detail_rows.append(
                        (backend, _context_name(with_context), mode.value, f"{dataset_id}/{header}", _fmt(score))
                    )
                detail_rows.append(
                    (backend, _context_name(with_context), mode.value, OVERALL, _fmt(result.aggregate))
                )
                summary[(backend, with_context, mode)] = _fmt(result.aggregate)
    written = [
        _write_csv(out / "agreement.csv", ("backend", "context", "mode", "header", "agreement"), detail_rows)
    ]
    summary_rows = [
        (
            backend,
            summary.get((backend, False, MatchMode.EXACT), MISSING_CELL),
            summary.get((backend, True, MatchMode.EXACT), MISSING_CELL),
            summary.get((backend, False, MatchMode.CLOSE), MISSING_CELL),
            summary.get((backend, True, MatchMode.CLOSE), MISSING_CELL),
        )
        for backend in backends
    ]
    written.append(
        _write_csv(
            out / "agreement_summary.csv",
            ("backend", "exact_none", "exact_with", "close_none", "close_with"),
            summary_rows,
        )
    )
    return written


def _write_significance(
    consistency_rows: Sequence, alpha: float, out: Path, notices: list[str]
) -> list[Path]:
    observations = [
        Observation(
            response=row.score,
            factors={
                "backend": row.backend,
                "dataset": row.dataset_id,
                "context": _context_name(row.with_context),
            },
        )
        for row in consistency_rows
    ]
    factors = [
        name
        for name in ("backend", "dataset", "context")
        if len({obs.factors[name] for obs in observations}) > 1
    ] if observations else []
    if not factors:
        notices.append("consistency ANOVA skipped: no factor varies across consistency scores")
        return []
    try:
        result = anova(observations, factors)
    except ValueError as exc:
        notices.append(f"consistency ANOVA skipped: {exc}")
        return []
    anova_rows = [
        (eff.name, _fmt(eff.ss), str(eff.df), _fmt(eff.ms), _fmt_p(eff.f), _fmt_p(eff.p))
        for eff in result.effects
    ]
    anova_rows.append(
        ("residual", _fmt(result.residual_ss), str(result.residual_df), _fmt(result.residual_ms), "", "")
    )
    anova_rows.append(("total", _fmt(result.total_ss), str(len(observations) - 1), "", "", ""))
    written = [_write_csv(out / "anova_consistency.csv", ("source", "ss", "df", "ms", "F", "p"), anova_rows)]
    for warning in result.warnings:
        notices.append(f"consistency ANOVA: {warning}")

    tukey_rows: list[tuple[str, ...]] = []
    for factor in factors:
        try:
            tukey = tukey_hsd(observations, factor, alpha=alpha, model_factors=factors)
        except ValueError as exc:
            notices.append(f"Tukey HSD on {factor!r} skipped: {exc}")
            continue
        for comparison in tukey.comparisons:
            tukey_rows.append(
                (
                    factor,
                    comparison.level_a,
                    comparison.level_b,
                    _fmt(comparison.mean_diff),
                    _fmt_p(comparison.q),
                    _fmt_p(comparison.p),
                    "true" if comparison.significant else "false",
                )
            )
    written.append(
        _write_csv(
            out / "tukey_consistency.csv",
            ("factor", "level_a", "level_b", "mean_diff", "q", "p", "significant"),
            tukey_rows,
        )
    )
    return written


def evaluate_store(
    config: CampaignConfig, records: Sequence[RunRecord], out_dir: str | Path
) -> BundleResult:
    """Evaluate loaded run records under a campaign configuration."""
    vocab, corpus = load_inputs(config)
    labels = None
    if config.human_labels is not None:
        if not Path(config.human_labels).is_file():
            raise ReportError(f"human labels file not found: {config.human_labels}")
        labels = load_human_labels_file(config.human_labels, vocab)
    return write_evaluation_bundle(
        vocab,
        corpus,
        records,
        out_dir,
        labels=labels,
        scheme=config.scoring,
        alpha=config.alpha,
    )


# --------------------------------------------------------------------------
# Boxplot statistics and SVG figures


@dataclass(frozen=True)
class BoxplotStats:
    """Five-number summary with 1.5-IQR whiskers and listed outliers."""

    backend: str
    with_context: bool
    label: str
    n: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]


def boxplot_stats(values: Sequence[float], backend: str, with_context: bool, label: str) -> BoxplotStats:
    """Quartiles by linear interpolation; whiskers at the most extreme points within 1.5 IQR."""
    if not values:
        raise ReportError("cannot summarize an empty value list")
    data = np.array(sorted(values), dtype=float)
    q1, median, q3 = (float(q) for q in np.percentile(data, (25, 50, 75)))
    iqr = q3 - q1
    low_fence = q1 - 1.5 * iqr
    high_fence = q3 + 1.5 * iqr
    inside = data[(data >= low_fence) & (data <= high_fence)]
    outliers = tuple(float(v) for v in data[(data < low_fence) | (data > high_fence)])
    return BoxplotStats(
        backend=backend,
        with_context=with_context,
        label=label,
        n=len(data),
        minimum=float(data[0]),
        q1=q1,
        median=median,
        q3=q3,
        maximum=float(data[-1]),
        whisker_low=float(inside[0]),
        whisker_high=float(inside[-1]),
        outliers=outliers,
    )


def _read_proportions(bundle_dir: Path) -> dict[tuple[str, bool], dict[str, list[float]]]:
    source = bundle_dir / "outcome_proportions.csv"
    if not source.is_file():
        raise ReportError(f"no outcome proportions table in {bundle_dir}; run evaluate first")
    with open(source, encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        grouped: dict[tuple[str, bool], dict[str, list[float]]] = {}
        for row in reader:
            key = (row["backend"], row["context"] == "with")
            by_label = grouped.setdefault(key, {label.value: [] for label in OUTCOME_ORDER})
            for label in OUTCOME_ORDER:
                by_label[label.value].append(float(row[label.value]))
    if not grouped:
        raise ReportError(f"{source} has no data rows")
    return grouped


def write_plot_bundle(bundle_dir: str | Path) -> list[Path]:
    """Render per-backend outcome boxplots (SVG) plus their summary CSV.

    Reads ``outcome_proportions.csv`` from an evaluation bundle and writes
    one figure per (backend, context) next to it.
    """
    bundle = Path(bundle_dir)
    grouped = _read_proportions(bundle)
    stats_rows: list[BoxplotStats] = []
    written: list[Path] = []
    for (backend, with_context), by_label in sorted(grouped.items()):
        per_label = [
            boxplot_stats(by_label[label.value], backend, with_context, label.value)
            for label in OUTCOME_ORDER
        ]
        stats_rows.extend(per_label)
        name = f"outcomes_{_slug(backend)}_{_context_name(with_context)}.svg"
        figure = bundle / name
        figure.write_text(_render_boxplot_svg(per_label, backend, with_context), encoding="utf-8")
        written.append(figure)
    stats_path = _write_csv(
        bundle / "boxplot_stats.csv",
        (
            "backend", "context", "label", "n", "min", "q1", "median", "q3", "max",
            "whisker_low", "whisker_high", "outliers",
        ),
        (
            (
                s.backend,
                _context_name(s.with_context),
                s.label,
                str(s.n),
                _fmt(s.minimum),
                _fmt(s.q1),
                _fmt(s.median),
                _fmt(s.q3),
                _fmt(s.maximum),
                _fmt(s.whisker_low),
                _fmt(s.whisker_high),
                ";".join(_fmt(v) for v in s.outliers),
            )
            for s in stats_rows
        ),
    )
    written.append(stats_path)
    return written


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() else "-" for c in name)


_SVG_WIDTH = 640
_SVG_HEIGHT = 400
_MARGIN_LEFT = 60
_MARGIN_RIGHT = 20
_MARGIN_TOP = 40
_MARGIN_BOTTOM = 50


def _render_boxplot_svg(stats: Sequence[BoxplotStats], backend: str, with_context: bool) -> str:
    """Standalone SVG boxplot of outcome proportions in [0, 1]."""
    plot_w = _SVG_WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _SVG_HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

    def x_center(i: int) -> float:
        return _MARGIN_LEFT + plot_w * (i + 0.5) / len(stats)

    def y_pos(v: float) -> float:
        return _MARGIN_TOP + plot_h * (1.0 - v)

    box_w = plot_w / len(stats) * 0.5
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_WIDTH}" height="{_SVG_HEIGHT}" '
        f'viewBox="0 0 {_SVG_WIDTH} {_SVG_HEIGHT}">',
        f'<rect width="{_SVG_WIDTH}" height="{_SVG_HEIGHT}" fill="white"/>',
        f'<text x="{_SVG_WIDTH / 2:.2f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{_escape(backend)} ({_context_name(with_context)}-context outcome proportions)</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y_pos(tick)
        parts.append(
            f'<line x1="{_MARGIN_LEFT}" y1="{y:.2f}" x2="{_SVG_WIDTH - _MARGIN_RIGHT}" y2="{y:.2f}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" font-family="sans-serif" '
            f'font-size="11">{tick:.2f}</text>'
        )
    for i, s in enumerate(stats):
        cx = x_center(i)
        parts.append(
            f'<line x1="{cx:.2f}" y1="{y_pos(s.whisker_low):.2f}" x2="{cx:.2f}" '
            f'y2="{y_pos(s.whisker_high):.2f}" stroke="black" stroke-width="1"/>'
        )
        for whisker in (s.whisker_low, s.whisker_high):
            parts.append(
                f'<line x1="{cx - box_w / 4:.2f}" y1="{y_pos(whisker):.2f}" x2="{cx + box_w / 4:.2f}" '
                f'y2="{y_pos(whisker):.2f}" stroke="black" stroke-width="1"/>'
            )
        parts.append(
            f'<rect x="{cx - box_w / 2:.2f}" y="{y_pos(s.q3):.2f}" width="{box_w:.2f}" '
            f'height="{max(y_pos(s.q1) - y_pos(s.q3), 0.5):.2f}" fill="#9ecae1" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{cx - box_w / 2:.2f}" y1="{y_pos(s.median):.2f}" x2="{cx + box_w / 2:.2f}" '
            f'y2="{y_pos(s.median):.2f}" stroke="black" stroke-width="2"/>'
        )
        for outlier in s.outliers:
            parts.append(
                f'<circle cx="{cx:.2f}" cy="{y_pos(outlier):.2f}" r="2.5" fill="none" stroke="black"/>'
            )
        parts.append(
            f'<text x="{cx:.2f}" y="{_SVG_HEIGHT - _MARGIN_BOTTOM + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{_escape(s.label)}</text>'
        )
    parts.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" '
        f'y2="{_SVG_HEIGHT - _MARGIN_BOTTOM}" stroke="black" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{_SVG_HEIGHT - _MARGIN_BOTTOM}" '
        f'x2="{_SVG_WIDTH - _MARGIN_RIGHT}" y2="{_SVG_HEIGHT - _MARGIN_BOTTOM}" stroke="black" stroke-width="1"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
