"""Topic classification of dataset column headers with a controlled vocabulary.

The package classifies column headers against a controlled vocabulary of
topics by embedding the whole vocabulary in a zero-shot prompt, records the
raw model responses in a replayable store, and evaluates the results:
outcome taxonomy tallies, repeat-run internal consistency and cross-model
alignment via Needleman-Wunsch scoring, human agreement via joint
probabilities, and ANOVA / Tukey HSD significance testing.
"""

from coltopic.vocab import (
    Topic,
    Vocabulary,
    VocabularyError,
    load_vocabulary,
    normalize_label,
    parse_vocabulary,
)
from coltopic.corpus import (
    Corpus,
    CorpusError,
    Dataset,
    HumanLabels,
    load_corpus,
    load_dataset,
    load_human_labels,
    load_human_labels_file,
)
from coltopic.promptgen import PromptError, PromptText, build_prompt
from coltopic.backends import (
    BackendConfig,
    BackendError,
    ResponseParseError,
    RunRecord,
    StoreError,
    load_runs,
    make_backend,
    parse_response,
    record_run,
)
from coltopic.outcome import OutcomeLabel, label_assignment, tally_campaign, tally_run
from coltopic.metrics import (
    UNASSIGNED,
    AgreementInputs,
    MatchMode,
    ScoringScheme,
    hca,
    inter_model_alignment,
    internal_consistency,
    normalized_alignment,
    nw_align,
    to_sequence,
)
from coltopic.stats import Observation, anova, f_upper_tail, studentized_range_upper_tail, tukey_hsd
from coltopic.campaign import CampaignConfig, ConfigError, apply_overrides, load_config, run_campaign
from coltopic.reports import ReportError, evaluate_store, write_evaluation_bundle, write_plot_bundle

__version__ = "0.1.0"

__all__ = [
    "AgreementInputs",
    "BackendConfig",
    "BackendError",
    "CampaignConfig",
    "ConfigError",
    "Corpus",
    "CorpusError",
    "Dataset",
    "HumanLabels",
    "MatchMode",
    "Observation",
    "OutcomeLabel",
    "PromptError",
    "PromptText",
    "ReportError",
    "ResponseParseError",
    "RunRecord",
    "ScoringScheme",
    "StoreError",
    "Topic",
    "UNASSIGNED",
    "Vocabulary",
    "VocabularyError",
    "anova",
    "apply_overrides",
    "build_prompt",
    "evaluate_store",
    "f_upper_tail",
    "hca",
    "inter_model_alignment",
    "internal_consistency",
    "label_assignment",
    "load_config",
    "load_corpus",
    "load_dataset",
    "load_human_labels",
    "load_human_labels_file",
    "load_runs",
    "load_vocabulary",
    "make_backend",
    "normalize_label",
    "normalized_alignment",
    "nw_align",
    "parse_response",
    "parse_vocabulary",
    "record_run",
    "run_campaign",
    "studentized_range_upper_tail",
    "tally_campaign",
    "tally_run",
    "to_sequence",
    "tukey_hsd",
    "write_evaluation_bundle",
    "write_plot_bundle",
]
