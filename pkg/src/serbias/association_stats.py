"""Pearson correlation analyses linking the bias metrics.

Two pairings are supported: per-class training-data bias against per-class
F1 gaps within one evaluation, and per-model valence gaps against per-model
upstream effect sizes across evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum
from typing import Mapping, Sequence

from .errors import DegenerateSeries, MetricUndefined, SchemaMismatch
from .gap_metrics import DataBiasVector


@dataclass(frozen=True)
class CorrelationCell:
    r: float
    n: int
    pair_description: str


def pearson(xs: Sequence[float], ys: Sequence[float], description: str = "") -> CorrelationCell:
    """Product-moment correlation of two equal-length series."""
    if len(xs) != len(ys):
        raise SchemaMismatch(f"series lengths differ: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise DegenerateSeries("correlation needs at least two points")
    mean_x = fsum(xs) / n
    mean_y = fsum(ys) / n
    dx = [x - mean_x for x in xs]
    dy = [y - mean_y for y in ys]
    var_x = fsum(d * d for d in dx)
    var_y = fsum(d * d for d in dy)
    if var_x == 0.0 or var_y == 0.0:
        raise DegenerateSeries("a series has zero variance")
    r = fsum(a * b for a, b in zip(dx, dy)) / (var_x * var_y) ** 0.5
    if abs(r) > 1.0 + 1e-12:
        raise AssertionError(f"correlation out of range: {r!r}")
    r = max(-1.0, min(1.0, r))
    return CorrelationCell(r=r, n=n, pair_description=description)


def data_vs_gap(
    bias: DataBiasVector, gaps: Mapping[str, float | None]
) -> CorrelationCell:
    """Correlate per-class training-data bias with per-class F1 gaps.

    Classes with an undefined gap are dropped from both series; the cell
    records the effective sample size.
    """
    usable = [c for c in bias.classes if gaps.get(c) is not None]
    if len(usable) < 2:
        raise MetricUndefined(
            f"need at least 2 classes with defined gaps, have {len(usable)}"
        )
    bias_map = bias.as_mapping()
    xs = [bias_map[c] for c in usable]
    ys = [gaps[c] for c in usable]
    return pearson(xs, ys, description=f"data bias vs F1 gap over classes {usable}")


def valence_vs_upstream(
    valence_by_model: Mapping[str, float],
    upstream_by_model: Mapping[str, float],
) -> CorrelationCell:
    """Correlate per-model valence gaps with per-model upstream effect sizes."""
    if set(valence_by_model) != set(upstream_by_model):
        missing = sorted(set(valence_by_model) ^ set(upstream_by_model))
        raise SchemaMismatch(f"model rosters differ; unmatched: {missing}")
    models = list(valence_by_model)
    xs = [valence_by_model[m] for m in models]
    ys = [upstream_by_model[m] for m in models]
    return pearson(xs, ys, description=f"valence gap vs upstream bias over models {models}")
