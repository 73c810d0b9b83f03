"""Orthographically-informed ASR evaluation toolkit.

Scores hypotheses with classic WER and with OIWER, which aligns against a
lattice of permissible orthographic variants instead of a single reference
string. Also ships the benchmark-creation pipeline: LLM-assisted variation
generation, a local human review service, validation and analysis reports.
"""

from .align import (
    AlignmentResult,
    EditOp,
    POLICY_ORIGINAL,
    POLICY_PATH,
    ScorePolicy,
    ScoreRecord,
    align,
    align_lattice,
    oiwer,
    wer,
)
from .errors import (
    ConfigError,
    InputError,
    OiwerError,
    ParseError,
    PathLimitExceeded,
    ProviderError,
    UndefinedStatisticError,
    ValidationError,
)
from .metrics import (
    CorpusReport,
    UtteranceScore,
    aggregate,
    compare_reports,
    error_shift,
    r_squared,
    score_utterance,
)
from .refmodel import (
    Lattice,
    Utterance,
    VariantSegment,
    VariationReference,
    build_lattice,
    dataset_stats,
    enumerate_paths,
    make_utterance,
    parse_bracketed,
    parse_manifest,
    parse_hypotheses,
    render_bracketed,
    serialize_manifest,
    validate_reference,
)
from .textnorm import DEFAULT_CONFIG, NormConfig, normalize, tokenize

__version__ = "0.1.0"

__all__ = [
    "AlignmentResult",
    "ConfigError",
    "CorpusReport",
    "DEFAULT_CONFIG",
    "EditOp",
    "InputError",
    "Lattice",
    "NormConfig",
    "OiwerError",
    "POLICY_ORIGINAL",
    "POLICY_PATH",
    "ParseError",
    "PathLimitExceeded",
    "ProviderError",
    "ScorePolicy",
    "ScoreRecord",
    "UndefinedStatisticError",
    "Utterance",
    "UtteranceScore",
    "ValidationError",
    "VariantSegment",
    "VariationReference",
    "aggregate",
    "align",
    "align_lattice",
    "build_lattice",
    "compare_reports",
    "dataset_stats",
    "enumerate_paths",
    "error_shift",
    "make_utterance",
    "normalize",
    "oiwer",
    "parse_bracketed",
    "parse_hypotheses",
    "parse_manifest",
    "r_squared",
    "render_bracketed",
    "score_utterance",
    "serialize_manifest",
    "tokenize",
    "validate_reference",
    "wer",
]
