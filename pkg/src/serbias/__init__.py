"""Gender-bias audit toolkit for speech emotion recognition exports."""

from .data_model import (
    DEFAULT_SMOOTHING,
    DEFAULT_VALENCE,
    EmotionSchema,
    GroupPair,
    UtteranceRecord,
    Valence,
    binarize,
    build_soft_label,
)
from .gap_metrics import (
    DataBiasVector,
    GapReport,
    GroupF1Table,
    build_gap_report,
    corpus_gap,
    data_bias,
    emotion_gap,
    group_f1,
    valence_gap,
)
from .speat import (
    AggregationMode,
    SpeatResult,
    aggregate_mean,
    aggregate_weighted,
    association,
    average_fold_weights,
    effect_size,
)
from .association_stats import CorrelationCell, data_vs_gap, pearson, valence_vs_upstream

__version__ = "0.1.0"

__all__ = [
    "AggregationMode",
    "CorrelationCell",
    "DEFAULT_SMOOTHING",
    "DEFAULT_VALENCE",
    "DataBiasVector",
    "EmotionSchema",
    "GapReport",
    "GroupF1Table",
    "GroupPair",
    "SpeatResult",
    "UtteranceRecord",
    "Valence",
    "aggregate_mean",
    "aggregate_weighted",
    "association",
    "average_fold_weights",
    "binarize",
    "build_gap_report",
    "build_soft_label",
    "corpus_gap",
    "data_bias",
    "data_vs_gap",
    "effect_size",
    "emotion_gap",
    "group_f1",
    "pearson",
    "valence_gap",
    "valence_vs_upstream",
]
