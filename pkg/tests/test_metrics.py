"""Alignment metrics and joint-probability agreement."""

from __future__ import annotations

import copy
import random

import pytest
from hypothesis import given, settings, strategies as st

from coltopic.corpus import Corpus, Dataset, HumanLabels
from coltopic.metrics import (
    UNASSIGNED,
    AgreementInputs,
    MatchMode,
    ScoringScheme,
    alignment_table,
    consistency_table,
    hca,
    human_distributions,
    inter_model_alignment,
    internal_consistency,
    machine_distributions,
    normalized_alignment,
    nw_align,
    to_sequence,
)
from coltopic.vocab import parse_vocabulary

from tests.conftest import SMALL_VOCAB_CSV, make_record

VOCAB = parse_vocabulary(SMALL_VOCAB_CSV)


def brute_force_align(a, b, scheme: ScoringScheme) -> float:
    """Exhaustive maximum over all global alignments, written independently
    of the production code: plain recursion over the three edit moves, no
    memoization, no shared scoring helpers beyond the scheme fields."""
    if not a and not b:
        return 0.0
    best = float("-inf")
    if a and b:
        step = scheme.match if a[0] == b[0] else scheme.mismatch
        best = max(best, step + brute_force_align(a[1:], b[1:], scheme))
    if a:
        best = max(best, scheme.gap + brute_force_align(a[1:], b, scheme))
    if b:
        best = max(best, scheme.gap + brute_force_align(a, b[1:], scheme))
    return best


# --------------------------------------------------------------------------
# Tokenization


def test_to_sequence_canonical_unassigned_and_stray():
    run = make_record(assignments=("AGRICULTURE", None, "Bananas"))
    assert to_sequence(VOCAB, run) == ("agriculture", UNASSIGNED, "bananas")


def test_to_sequence_blank_text_is_unassigned():
    run = make_record(assignments=("", "  ", "Other"))
    assert to_sequence(VOCAB, run) == (UNASSIGNED, UNASSIGNED, "other")


def test_to_sequence_failed_run_is_all_unassigned():
    run = make_record(error="refused")
    assert to_sequence(VOCAB, run) == (UNASSIGNED, UNASSIGNED, UNASSIGNED)


def test_unassigned_is_a_singleton_distinct_from_any_text():
    assert UNASSIGNED != "unassigned"
    assert UNASSIGNED != ""
    assert copy.copy(UNASSIGNED) is UNASSIGNED
    assert copy.deepcopy(UNASSIGNED) is UNASSIGNED
    assert repr(UNASSIGNED) == "UNASSIGNED"


def test_unassigned_tokens_align_as_equal():
    # two unclassified headers count as agreeing on "no classification"
    assert nw_align((UNASSIGNED,), (UNASSIGNED,)) == 1.0


# --------------------------------------------------------------------------
# Needleman-Wunsch alignment


def test_scoring_scheme_validation():
    with pytest.raises(ValueError, match="match score must exceed"):
        ScoringScheme(match=0.0, mismatch=0.0)
    with pytest.raises(ValueError, match="gap score"):
        ScoringScheme(gap=2.0)
    with pytest.raises(ValueError, match="positive"):
        ScoringScheme(match=-1.0, mismatch=-2.0, gap=-3.0)


def test_nw_align_hand_examples():
    assert nw_align(("a", "b", "c"), ("a", "b", "c")) == 3.0
    assert nw_align(("a", "b"), ("a", "c")) == 1.0
    assert nw_align(("a",), ()) == -0.5
    assert nw_align((), ()) == 0.0
    # unequal lengths: best of matching then gapping
    assert nw_align(("a", "b"), ("a",)) == 0.5


def test_nw_align_against_brute_force_sample():
    rng = random.Random(13)
    alphabet = ["a", "b", "c", "d"]
    scheme = ScoringScheme()
    for _ in range(150):
        a = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, 6)))
        b = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, 6)))
        assert nw_align(a, b, scheme) == brute_force_align(a, b, scheme)


def test_nw_align_brute_force_with_nondefault_scheme():
    rng = random.Random(17)
    scheme = ScoringScheme(match=2.0, mismatch=-1.0, gap=-2.0)
    alphabet = ["a", "b", "c"]
    for _ in range(80):
        a = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, 5)))
        b = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, 5)))
        assert nw_align(a, b, scheme) == brute_force_align(a, b, scheme)


@given(
    st.lists(st.sampled_from("abcd"), max_size=6),
    st.lists(st.sampled_from("abcd"), max_size=6),
)
def test_nw_align_symmetry(a, b):
    assert nw_align(tuple(a), tuple(b)) == nw_align(tuple(b), tuple(a))


def test_normalized_alignment_bounds_and_identity():
    assert normalized_alignment(("a", "b"), ("a", "b")) == 1.0
    assert normalized_alignment(("a", "b"), ("c", "d")) == 0.0
    assert normalized_alignment(("a", "b", "c"), ("a", "b", "x")) == pytest.approx(2 / 3)
    with pytest.raises(ValueError, match="empty"):
        normalized_alignment((), ())


@given(
    st.lists(st.sampled_from("abcd"), min_size=1, max_size=6),
    st.lists(st.sampled_from("abcd"), min_size=0, max_size=6),
)
def test_normalized_alignment_at_most_one(a, b):
    if not a and not b:
        return
    score = normalized_alignment(tuple(a), tuple(b))
    assert score <= 1.0
    if score == 1.0:
        assert tuple(a) == tuple(b)


# --------------------------------------------------------------------------
# Consistency and cross-model alignment


def test_internal_consistency_identical_runs_is_exactly_one():
    runs = [("agriculture", "other", UNASSIGNED)] * 10
    assert internal_consistency(runs) == 1.0


def test_internal_consistency_two_runs():
    # 2 runs, 3 headers, one disagreement -> single pair scoring 2/3
    runs = [("a", "b", "c"), ("a", "b", "x")]
    assert internal_consistency(runs) == pytest.approx(2 / 3)


def test_internal_consistency_averages_all_pairs():
    runs = [("a", "b"), ("a", "b"), ("a", "x")]
    # pairs: (1,2)=1, (1,3)=0.5, (2,3)=0.5
    assert internal_consistency(runs) == pytest.approx((1.0 + 0.5 + 0.5) / 3)


def test_internal_consistency_needs_two_runs():
    with pytest.raises(ValueError, match="at least 2"):
        internal_consistency([("a",)])


def test_internal_consistency_order_invariant():
    rng = random.Random(3)
    runs = [tuple(rng.choice("abc") for _ in range(4)) for _ in range(5)]
    base = internal_consistency(runs)
    for _ in range(5):
        shuffled = runs[:]
        rng.shuffle(shuffled)
        assert internal_consistency(shuffled) == pytest.approx(base)


def test_inter_model_alignment_cross_product():
    runs_a = [("a", "b"), ("a", "x")]
    runs_b = [("a", "b")]
    # pairs: 1.0 and 0.5
    assert inter_model_alignment(runs_a, runs_b) == pytest.approx(0.75)
    assert inter_model_alignment(runs_b, runs_a) == pytest.approx(0.75)


def test_inter_model_alignment_disjoint_is_zero():
    assert inter_model_alignment([("a", "b")], [("c", "d")]) == 0.0


def test_inter_model_alignment_needs_runs_on_both_sides():
    with pytest.raises(ValueError, match="each side"):
        inter_model_alignment([], [("a",)])


def records_for(backend: str, dataset_id: str, runs: list[tuple]) -> list:
    return [
        make_record(
            backend=backend,
            dataset_id=dataset_id,
            run_index=i + 1,
            assignments=run,
        )
        for i, run in enumerate(runs)
    ]


def test_consistency_table_skips_single_run_groups():
    records = records_for("m", "84952eng", [("Other", "Other", "Other")] * 3)
    records += records_for("m", "oth", [("Other", "Other", "Other")])
    table = consistency_table(VOCAB, records)
    assert [(r.backend, r.dataset_id) for r in table.rows] == [("m", "84952eng")]
    assert table.rows[0].score == 1.0
    assert table.overall[("m", False)] == 1.0


def test_consistency_table_overall_is_unweighted_mean():
    records = records_for("m", "d1", [("Other", "Other"), ("Other", "Other")])
    records += records_for("m", "d2", [("Other", "Other"), ("Agriculture", "Agriculture")])
    table = consistency_table(VOCAB, records)
    scores = {row.dataset_id: row.score for row in table.rows}
    assert scores["d1"] == 1.0
    assert scores["d2"] == 0.0
    assert table.overall[("m", False)] == pytest.approx(0.5)


def test_alignment_table_pairs_shared_cells_only():
    records = records_for("a", "d1", [("Other", "Other")])
    records += records_for("b", "d1", [("Other", "Other")])
    records += records_for("b", "d2", [("Other", "Other")])
    table = alignment_table(VOCAB, records)
    assert [(r.backend_a, r.backend_b, r.dataset_id) for r in table.rows] == [("a", "b", "d1")]
    assert table.rows[0].score == 1.0
    assert table.overall[("a", "b", False)] == 1.0


def test_alignment_table_orders_backend_pairs_lexically():
    records = records_for("zeta", "d1", [("Other", "Other")])
    records += records_for("alpha", "d1", [("Other", "Other")])
    table = alignment_table(VOCAB, records)
    assert table.rows[0].backend_a == "alpha"
    assert table.rows[0].backend_b == "zeta"


# --------------------------------------------------------------------------
# Human-computer agreement


def agreement_from_labels(human_topics: list[str], machine_runs: list[str]):
    """One-header fixture: participants' topics vs machine run topics."""
    human = {("d", "h"): {t: human_topics.count(t) / len(human_topics) for t in set(human_topics)}}
    machine = {("d", "h"): {t: machine_runs.count(t) / len(machine_runs) for t in set(machine_runs)}}
    return AgreementInputs(human=human, machine=machine)


def test_hca_worked_example_two_thirds():
    # 3 humans (A, A, B) vs machine always A: 2/3*1 + 1/3*0
    inputs = agreement_from_labels(
        ["agriculture", "agriculture", "demography"], ["agriculture"] * 10
    )
    result = hca(inputs, VOCAB, MatchMode.EXACT)
    assert result.aggregate == pytest.approx(2 / 3, abs=1e-9)


def test_hca_worked_example_half():
    # 3 humans (A, A, B) vs machine 5 A / 5 B: 2/3*0.5 + 1/3*0.5
    inputs = agreement_from_labels(
        ["agriculture", "agriculture", "demography"],
        ["agriculture"] * 5 + ["demography"] * 5,
    )
    result = hca(inputs, VOCAB, MatchMode.EXACT)
    assert result.aggregate == pytest.approx(0.5, abs=1e-9)


def test_hca_point_mass_law():
    same = agreement_from_labels(["agriculture"], ["agriculture"])
    assert hca(same, VOCAB, MatchMode.EXACT).aggregate == 1.0
    different = agreement_from_labels(["agriculture"], ["demography"])
    assert hca(different, VOCAB, MatchMode.EXACT).aggregate == 0.0


def test_hca_close_mode_generalizes_both_sides():
    # Agriculture and Livestock Farming share the parent Trade and Industry
    inputs = agreement_from_labels(["agriculture"], ["livestock farming"])
    assert hca(inputs, VOCAB, MatchMode.EXACT).aggregate == 0.0
    assert hca(inputs, VOCAB, MatchMode.CLOSE).aggregate == 1.0


def test_hca_close_mode_does_not_merge_across_parents():
    inputs = agreement_from_labels(["agriculture"], ["plants and animals"])
    assert hca(inputs, VOCAB, MatchMode.CLOSE).aggregate == 0.0


def test_hca_machine_unassigned_and_hallucination_mass_contributes_zero():
    inputs = AgreementInputs(
        human={("d", "h"): {"agriculture": 1.0}},
        machine={("d", "h"): {"agriculture": 0.5, UNASSIGNED: 0.3, "bananas": 0.2}},
    )
    assert hca(inputs, VOCAB, MatchMode.EXACT).aggregate == pytest.approx(0.5)
    assert hca(inputs, VOCAB, MatchMode.CLOSE).aggregate == pytest.approx(0.5)


def test_hca_aggregate_is_unweighted_header_mean():
    inputs = AgreementInputs(
        human={
            ("d", "h1"): {"agriculture": 1.0},
            ("d", "h2"): {"agriculture": 1.0},
        },
        machine={
            ("d", "h1"): {"agriculture": 1.0},
            ("d", "h2"): {"demography": 1.0},
        },
    )
    result = hca(inputs, VOCAB, MatchMode.EXACT)
    assert result.per_header[("d", "h1")] == 1.0
    assert result.per_header[("d", "h2")] == 0.0
    assert result.aggregate == pytest.approx(0.5)


def test_hca_requires_human_labels_and_machine_coverage():
    with pytest.raises(ValueError, match="at least one header"):
        hca(AgreementInputs(human={}, machine={}), VOCAB, MatchMode.EXACT)
    inputs = AgreementInputs(human={("d", "h"): {"agriculture": 1.0}}, machine={})
    with pytest.raises(ValueError, match="no machine runs"):
        hca(inputs, VOCAB, MatchMode.EXACT)


def test_human_distributions_from_labels():
    labels = HumanLabels(
        entries={
            ("p1", "d", "h"): "Agriculture",
            ("p2", "d", "h"): " AGRICULTURE ",
            ("p3", "d", "h"): "Demography",
        }
    )
    dists = human_distributions(labels, VOCAB)
    assert dists[("d", "h")] == {"agriculture": pytest.approx(2 / 3), "demography": pytest.approx(1 / 3)}
    assert sum(dists[("d", "h")].values()) == pytest.approx(1.0)


def test_human_distributions_reject_unresolvable_topic():
    labels = HumanLabels(entries={("p1", "d", "h"): "Bananas"})
    with pytest.raises(ValueError, match="not in the vocabulary"):
        human_distributions(labels, VOCAB)


def test_machine_distributions_per_header():
    corpus = Corpus(datasets=(Dataset(id="d", headers=("h1", "h2")),))
    records = [
        make_record(dataset_id="d", run_index=1, assignments=("Agriculture", None)),
        make_record(dataset_id="d", run_index=2, assignments=("Agriculture", "Bananas")),
    ]
    dists = machine_distributions(VOCAB, corpus, records)
    assert dists[("d", "h1")] == {"agriculture": 1.0}
    assert dists[("d", "h2")] == {UNASSIGNED: 0.5, "bananas": 0.5}
    for dist in dists.values():
        assert sum(dist.values()) == pytest.approx(1.0)


@st.composite
def agreement_fixture(draw):
    topics = [t.label.casefold() for t in VOCAB if t.label != "Other"]
    human_support = draw(st.lists(st.sampled_from(topics), min_size=1, max_size=4, unique=True))
    machine_support = draw(st.lists(st.sampled_from(topics), min_size=1, max_size=4, unique=True))
    human_weights = [draw(st.integers(min_value=1, max_value=5)) for _ in human_support]
    machine_weights = [draw(st.integers(min_value=1, max_value=5)) for _ in machine_support]
    human = {t: w / sum(human_weights) for t, w in zip(human_support, human_weights)}
    machine = {t: w / sum(machine_weights) for t, w in zip(machine_support, machine_weights)}
    return AgreementInputs(human={("d", "h"): human}, machine={("d", "h"): machine})


@settings(max_examples=200)
@given(agreement_fixture())
def test_hca_close_never_below_exact(inputs):
    exact = hca(inputs, VOCAB, MatchMode.EXACT).aggregate
    close = hca(inputs, VOCAB, MatchMode.CLOSE).aggregate
    assert 0.0 <= exact <= 1.0
    assert close >= exact
