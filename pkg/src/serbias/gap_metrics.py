"""Per-group F1 scores and the downstream gender-bias metrics built on them.

Metric conventions, applied consistently everywhere:

* Gaps are signed, advantaged group minus disadvantaged group.
* A class with zero gold positives and zero predicted positives in a group
  has an undefined F1 (``None``); an undefined side makes the gap undefined.
* Undefined gaps are excluded from averages and surfaced in the report so
  the exclusion is never silent. Scoring zero-evidence classes as 0 would
  fabricate bias where there is none.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum
from typing import Mapping, Sequence

from .data_model import (
    EmotionSchema,
    GoldRule,
    GroupPair,
    UtteranceRecord,
    Valence,
    binarize,
    binarize_gold,
)
from .errors import GroupEmpty, MetricUndefined, MissingValenceTags, ValidationError


@dataclass(frozen=True)
class ClassTally:
    """Binary confusion summary of one class within one group."""

    gold_positives: int
    predicted_positives: int
    true_positives: int
    precision: float | None
    recall: float | None
    f1: float | None


@dataclass(frozen=True)
class GroupF1Table:
    """Per-class scores for both groups plus per-group macro-F1."""

    classes: tuple[str, ...]
    pair: GroupPair
    scores: Mapping[str, Mapping[str, ClassTally]]
    macro_f1: Mapping[str, float | None]
    ignored_records: int


@dataclass(frozen=True)
class ValenceSplit:
    """Positive/negative breakdown of one both-valence class.

    ``p_plus`` and ``p_minus`` are the fractions of tagged gold-positive
    utterances carrying each tag; ``d_plus``/``d_minus`` are the group F1
    gaps on the corresponding tagged subsets.
    """

    p_plus: float
    p_minus: float
    d_plus: float | None
    d_minus: float | None


@dataclass(frozen=True)
class GapReport:
    """All downstream gap metrics for one (model, corpus) evaluation."""

    model_id: str
    corpus_id: str
    classes: tuple[str, ...]
    gaps: Mapping[str, float | None]
    macro_gap: float | None
    macro_f1_gap: float | None
    corpus_gap: float
    corpus_gap_excluded: tuple[str, ...]
    valence_gap: float
    valence_split: Mapping[str, ValenceSplit]
    valence_excluded: tuple[str, ...]


@dataclass(frozen=True)
class DataBiasVector:
    """Per-class difference of mean gold soft-label mass between groups."""

    classes: tuple[str, ...]
    values: tuple[float, ...]
    pair: GroupPair

    def as_mapping(self) -> dict[str, float]:
        return dict(zip(self.classes, self.values))


def _split_by_group(
    records: Sequence[UtteranceRecord], pair: GroupPair
) -> tuple[dict[str, list[UtteranceRecord]], int]:
    by_group: dict[str, list[UtteranceRecord]] = {label: [] for label in pair.labels}
    ignored = 0
    for record in records:
        if record.group in by_group:
            by_group[record.group].append(record)
        else:
            ignored += 1
    return by_group, ignored


def _confusion_counts(
    records: Sequence[UtteranceRecord], n: int, gold_rule: GoldRule
) -> list[tuple[int, int, int]]:
    """(gold positives, predicted positives, true positives) per class index."""
    gp = [0] * n
    pp = [0] * n
    tp = [0] * n
    for record in records:
        if record.pred is None:
            raise ValidationError(f"record {record.utt_id!r} has no prediction")
        gold_set = binarize_gold(record.gold, n, gold_rule)
        pred_set = binarize(record.pred, n)
        for k in gold_set:
            gp[k] += 1
        for k in pred_set:
            pp[k] += 1
        for k in gold_set & pred_set:
            tp[k] += 1
    return list(zip(gp, pp, tp))


def _tally(gp: int, pp: int, tp: int) -> ClassTally:
    if gp == 0 and pp == 0:
        return ClassTally(0, 0, 0, None, None, None)
    precision = tp / pp if pp > 0 else None
    recall = tp / gp if gp > 0 else None
    if tp == 0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return ClassTally(gp, pp, tp, precision, recall, f1)


def _macro(tallies: Sequence[ClassTally]) -> float | None:
    defined = [t.f1 for t in tallies if t.f1 is not None]
    if not defined:
        return None
    return fsum(defined) / len(defined)


def group_f1(
    records: Sequence[UtteranceRecord],
    schema: EmotionSchema,
    pair: GroupPair,
    gold_rule: GoldRule = "same_as_pred",
) -> GroupF1Table:
    """Binary precision/recall/F1 per class within each group.

    Both gold and predicted distributions are binarized with the strict 1/n
    rule (the gold side can be switched to argmax). Records tagged with a
    group outside the pair are ignored and counted.
    """
    by_group, ignored = _split_by_group(records, pair)
    for label in pair.labels:
        if not by_group[label]:
            raise GroupEmpty(f"no records for group {label!r}")
    n = schema.n
    scores: dict[str, dict[str, ClassTally]] = {}
    macro: dict[str, float | None] = {}
    for label in pair.labels:
        counts = _confusion_counts(by_group[label], n, gold_rule)
        tallies = [_tally(*c) for c in counts]
        scores[label] = dict(zip(schema.classes, tallies))
        macro[label] = _macro(tallies)
    return GroupF1Table(
        classes=schema.classes,
        pair=pair,
        scores=scores,
        macro_f1=macro,
        ignored_records=ignored,
    )


def emotion_gap(table: GroupF1Table) -> dict[str, float | None]:
    """Signed per-class F1 gap, advantaged minus disadvantaged."""
    adv, dis = table.pair.labels
    gaps: dict[str, float | None] = {}
    for name in table.classes:
        a = table.scores[adv][name].f1
        d = table.scores[dis][name].f1
        gaps[name] = None if a is None or d is None else a - d
    return gaps


def corpus_gap(gaps: Mapping[str, float | None]) -> float:
    """Mean absolute per-class gap over the classes where it is defined."""
    defined = [abs(v) for v in gaps.values() if v is not None]
    if not defined:
        raise MetricUndefined("every per-class gap is undefined")
    return fsum(defined) / len(defined)


def undefined_classes(gaps: Mapping[str, float | None]) -> tuple[str, ...]:
    return tuple(name for name, v in gaps.items() if v is None)


@dataclass(frozen=True)
class ValenceGapResult:
    value: float
    split: Mapping[str, ValenceSplit]
    excluded: tuple[str, ...]


def _restricted_gap(
    records: Sequence[UtteranceRecord],
    class_index: int,
    n: int,
    pair: GroupPair,
    gold_rule: GoldRule,
) -> float | None:
    """Gap of one class's F1 computed on a restricted record subset.

    Unlike :func:`group_f1` this does not require both groups to appear in
    the subset; a group with no records simply has an undefined score.
    """
    sides: list[float | None] = []
    for label in pair.labels:
        subset = [r for r in records if r.group == label]
        counts = _confusion_counts(subset, n, gold_rule) if subset else None
        tally = _tally(*counts[class_index]) if counts else ClassTally(0, 0, 0, None, None, None)
        sides.append(tally.f1)
    advantaged, disadvantaged = sides
    if advantaged is None or disadvantaged is None:
        return None
    return advantaged - disadvantaged


def valence_gap(
    records: Sequence[UtteranceRecord],
    schema: EmotionSchema,
    pair: GroupPair,
    gold_rule: GoldRule = "same_as_pred",
) -> ValenceGapResult:
    """Valence-level gap: positive-class gaps minus negative-class gaps.

    Both-valence classes contribute a mixture term weighted by the tag
    proportions of their gold-positive utterances. A positive result means
    the advantaged group scores relatively higher on positive valence.
    Undefined contributions are skipped and reported in ``excluded``.
    """
    table = group_f1(records, schema, pair, gold_rule)
    gaps = emotion_gap(table)
    n = schema.n
    pooled = [r for r in records if r.group in pair.labels]

    total = 0.0
    excluded: list[str] = []
    for name in schema.classes_with(Valence.POSITIVE):
        if gaps[name] is None:
            excluded.append(name)
        else:
            total += gaps[name]
    for name in schema.classes_with(Valence.NEGATIVE):
        if gaps[name] is None:
            excluded.append(name)
        else:
            total -= gaps[name]

    split: dict[str, ValenceSplit] = {}
    for name in schema.classes_with(Valence.BOTH):
        k = schema.index_of(name)
        gold_positive = [
            r for r in pooled if k in binarize_gold(r.gold, n, gold_rule)
        ]
        if not gold_positive:
            continue
        tagged = [r for r in gold_positive if r.valence_tag is not None]
        if not tagged:
            raise MissingValenceTags(
                f"class {name!r} has gold-positive utterances but no valence tags"
            )
        positive = [r for r in tagged if r.valence_tag is Valence.POSITIVE]
        negative = [r for r in tagged if r.valence_tag is Valence.NEGATIVE]
        p_plus = len(positive) / len(tagged)
        p_minus = len(negative) / len(tagged)
        d_plus = _restricted_gap(positive, k, n, pair, gold_rule)
        d_minus = _restricted_gap(negative, k, n, pair, gold_rule)
        split[name] = ValenceSplit(p_plus, p_minus, d_plus, d_minus)
        if p_plus > 0.0:
            if d_plus is None:
                excluded.append(f"{name}/positive")
            else:
                total += p_plus * d_plus
        if p_minus > 0.0:
            if d_minus is None:
                excluded.append(f"{name}/negative")
            else:
                total -= p_minus * d_minus
    return ValenceGapResult(value=total, split=split, excluded=tuple(excluded))


def data_bias(
    training_records: Sequence[UtteranceRecord],
    schema: EmotionSchema,
    pair: GroupPair,
) -> DataBiasVector:
    """Difference of mean gold soft-label distributions between the groups."""
    by_group, _ = _split_by_group(training_records, pair)
    for label in pair.labels:
        if not by_group[label]:
            raise GroupEmpty(f"no training records for group {label!r}")
    means = {}
    for label in pair.labels:
        group = by_group[label]
        means[label] = [
            fsum(r.gold[k] for r in group) / len(group) for k in range(schema.n)
        ]
    adv, dis = pair.labels
    values = tuple(means[adv][k] - means[dis][k] for k in range(schema.n))
    return DataBiasVector(classes=schema.classes, values=values, pair=pair)


def macro_gap_of_classes(gaps: Mapping[str, float | None]) -> float | None:
    """Signed mean of the defined per-class gaps (the primary Macro column)."""
    defined = [v for v in gaps.values() if v is not None]
    if not defined:
        return None
    return fsum(defined) / len(defined)


def macro_f1_gap(table: GroupF1Table) -> float | None:
    """Gap of the per-group macro-F1 scores (the alternative Macro reading)."""
    adv, dis = table.pair.labels
    a = table.macro_f1[adv]
    d = table.macro_f1[dis]
    if a is None or d is None:
        return None
    return a - d


def build_gap_report(
    records: Sequence[UtteranceRecord],
    schema: EmotionSchema,
    pair: GroupPair,
    model_id: str = "model",
    gold_rule: GoldRule = "same_as_pred",
) -> GapReport:
    """Compute every downstream gap metric for one evaluation run."""
    table = group_f1(records, schema, pair, gold_rule)
    gaps = emotion_gap(table)
    valence = valence_gap(records, schema, pair, gold_rule)
    return GapReport(
        model_id=model_id,
        corpus_id=schema.corpus_id,
        classes=schema.classes,
        gaps=gaps,
        macro_gap=macro_gap_of_classes(gaps),
        macro_f1_gap=macro_f1_gap(table),
        corpus_gap=corpus_gap(gaps),
        corpus_gap_excluded=undefined_classes(gaps),
        valence_gap=valence.value,
        valence_split=valence.split,
        valence_excluded=valence.excluded,
    )
