"""Straight-line transcriptions of the metric definitions.

This module exists so fixture expectations come from an independent code
path: nothing here calls into ``gap_metrics`` or ``speat``, and everything
is written as plain loops over plain floats. Slow and obvious on purpose.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from .data_model import EmotionSchema, GroupPair, UtteranceRecord, Valence


# --- downstream metrics -----------------------------------------------------

def naive_binary_sets(distribution: Sequence[float]) -> set[int]:
    n = len(distribution)
    out = set()
    for k in range(n):
        if distribution[k] > 1.0 / n:
            out.add(k)
    return out


def naive_gold_sets(distribution: Sequence[float], rule: str) -> set[int]:
    if rule == "argmax":
        best = 0
        for k in range(1, len(distribution)):
            if distribution[k] > distribution[best]:
                best = k
        return {best}
    return naive_binary_sets(distribution)


def naive_confusion(
    records: Sequence[UtteranceRecord], group: str, class_index: int, rule: str
) -> tuple[int, int, int]:
    gp = pp = tp = 0
    for r in records:
        if r.group != group:
            continue
        gold = naive_gold_sets(r.gold, rule)
        pred = naive_binary_sets(r.pred)
        if class_index in gold:
            gp += 1
        if class_index in pred:
            pp += 1
        if class_index in gold and class_index in pred:
            tp += 1
    return gp, pp, tp


def naive_f1(gp: int, pp: int, tp: int) -> float | None:
    if gp == 0 and pp == 0:
        return None
    if tp == 0:
        return 0.0
    precision = tp / pp
    recall = tp / gp
    return 2 * precision * recall / (precision + recall)


def naive_group_f1(
    records: Sequence[UtteranceRecord],
    schema: EmotionSchema,
    group: str,
    rule: str = "same_as_pred",
) -> dict[str, float | None]:
    out = {}
    for k, name in enumerate(schema.classes):
        gp, pp, tp = naive_confusion(records, group, k, rule)
        out[name] = naive_f1(gp, pp, tp)
    return out


def naive_emotion_gaps(
    records: Sequence[UtteranceRecord],
    schema: EmotionSchema,
    pair: GroupPair,
    rule: str = "same_as_pred",
) -> dict[str, float | None]:
    f_adv = naive_group_f1(records, schema, pair.advantaged, rule)
    f_dis = naive_group_f1(records, schema, pair.disadvantaged, rule)
    gaps: dict[str, float | None] = {}
    for name in schema.classes:
        if f_adv[name] is None or f_dis[name] is None:
            gaps[name] = None
        else:
            gaps[name] = f_adv[name] - f_dis[name]
    return gaps


def naive_corpus_gap(gaps: Mapping[str, float | None]) -> float | None:
    total = 0.0
    count = 0
    for value in gaps.values():
        if value is not None:
            total += abs(value)
            count += 1
    if count == 0:
        return None
    return total / count


def naive_macro_gap(gaps: Mapping[str, float | None]) -> float | None:
    total = 0.0
    count = 0
    for value in gaps.values():
        if value is not None:
            total += value
            count += 1
    if count == 0:
        return None
    return total / count


def naive_valence_gap(
    records: Sequence[UtteranceRecord],
    schema: EmotionSchema,
    pair: GroupPair,
    rule: str = "same_as_pred",
) -> float:
    """Sum positive-class gaps, subtract negative-class gaps, and mix the
    both-valence classes by their tagged proportions. Undefined terms are
    skipped, matching the reporting convention."""
    gaps = naive_emotion_gaps(records, schema, pair, rule)
    total = 0.0
    for name in schema.classes:
        if schema.valence_of[name] is Valence.POSITIVE and gaps[name] is not None:
            total += gaps[name]
        if schema.valence_of[name] is Valence.NEGATIVE and gaps[name] is not None:
            total -= gaps[name]
    pooled = [r for r in records if r.group in pair.labels]
    for name in schema.classes:
        if schema.valence_of[name] is not Valence.BOTH:
            continue
        k = schema.classes.index(name)
        gold_positive = [r for r in pooled if k in naive_gold_sets(r.gold, rule)]
        tagged = [r for r in gold_positive if r.valence_tag is not None]
        if not tagged:
            continue
        for tag, sign in ((Valence.POSITIVE, 1.0), (Valence.NEGATIVE, -1.0)):
            subset = [r for r in tagged if r.valence_tag is tag]
            proportion = len(subset) / len(tagged)
            if proportion == 0.0:
                continue
            gp_a, pp_a, tp_a = naive_confusion(subset, pair.advantaged, k, rule)
            gp_d, pp_d, tp_d = naive_confusion(subset, pair.disadvantaged, k, rule)
            f_a = naive_f1(gp_a, pp_a, tp_a)
            f_d = naive_f1(gp_d, pp_d, tp_d)
            if f_a is None or f_d is None:
                continue
            total += sign * proportion * (f_a - f_d)
    return total


def naive_data_bias(
    records: Sequence[UtteranceRecord],
    schema: EmotionSchema,
    pair: GroupPair,
) -> list[float]:
    out = []
    adv = [r for r in records if r.group == pair.advantaged]
    dis = [r for r in records if r.group == pair.disadvantaged]
    for k in range(schema.n):
        mean_adv = sum(r.gold[k] for r in adv) / len(adv)
        mean_dis = sum(r.gold[k] for r in dis) / len(dis)
        out.append(mean_adv - mean_dis)
    return out


# --- upstream metrics -------------------------------------------------------

def naive_mean_layers(stack: Sequence[Sequence[float]]) -> list[float]:
    n_layers = len(stack)
    dim = len(stack[0])
    return [sum(stack[l][d] / n_layers for l in range(n_layers)) for d in range(dim)]


def naive_weighted_layers(
    stack: Sequence[Sequence[float]], weights: Sequence[float]
) -> list[float]:
    dim = len(stack[0])
    return [
        sum(weights[l] * stack[l][d] for l in range(len(stack))) for d in range(dim)
    ]


def naive_fold_average(folds: Sequence[Sequence[float]]) -> list[float]:
    n_layers = len(folds[0])
    mean = [sum(fold[l] for fold in folds) / len(folds) for l in range(n_layers)]
    total = sum(mean)
    return [v / total for v in mean]


def naive_cosine(u: Sequence[float], v: Sequence[float]) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = sum(a * a for a in u) ** 0.5
    nv = sum(b * b for b in v) ** 0.5
    return dot / (nu * nv)


def naive_association(
    w: Sequence[float], a_set: Sequence[Sequence[float]], b_set: Sequence[Sequence[float]]
) -> float:
    mean_a = sum(naive_cosine(w, a) for a in a_set) / len(a_set)
    mean_b = sum(naive_cosine(w, b) for b in b_set) / len(b_set)
    return mean_a - mean_b


def naive_effect_size(
    x_set: Sequence[Sequence[float]],
    y_set: Sequence[Sequence[float]],
    a_set: Sequence[Sequence[float]],
    b_set: Sequence[Sequence[float]],
    numerator: str = "sum",
    stddev: str = "population",
) -> float:
    s_x = [naive_association(x, a_set, b_set) for x in x_set]
    s_y = [naive_association(y, a_set, b_set) for y in y_set]
    if numerator == "sum":
        top = sum(s_x) - sum(s_y)
    else:
        top = sum(s_x) / len(s_x) - sum(s_y) / len(s_y)
    pooled = s_x + s_y
    mean = sum(pooled) / len(pooled)
    squares = sum((s - mean) ** 2 for s in pooled)
    if stddev == "population":
        bottom = (squares / len(pooled)) ** 0.5
    else:
        bottom = (squares / (len(pooled) - 1)) ** 0.5
    return top / bottom
