"""Upstream embedding bias: cosine associations and the effect size over
the four stimulus sets, with mean and weighted layer aggregation.

The effect size divides the X-minus-Y association contrast by the standard
deviation of associations over the pooled target sets. The numerator uses
per-set sums by default; a mean-based variant is always reported as well so
results stay comparable when the target sets differ in size.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from math import fsum
from typing import Literal, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateAssociations,
    DegenerateWeights,
    SchemaMismatch,
    ZeroVector,
)
from .ingestion import LayerWeights, StimulusEmbeddings

NumeratorMode = Literal["sum", "mean"]
StddevMode = Literal["population", "sample"]

WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class AggregationMode:
    """How layer stacks collapse to one vector, with weight provenance."""

    kind: Literal["mean", "weighted"]
    model_id: str | None = None
    corpus_id: str | None = None

    def label(self) -> str:
        if self.kind == "mean":
            return "mean"
        return f"weighted[{self.model_id}/{self.corpus_id}]"


MEAN_AGGREGATION = AggregationMode("mean")


@dataclass(frozen=True)
class AggregatedEmbedding:
    """A layer stack collapsed to a single vector."""

    utt_id: str
    vector: np.ndarray
    aggregation_mode: AggregationMode


@dataclass(frozen=True)
class SpeatResult:
    """Effect size plus the per-item associations it was computed from."""

    effect_size: float
    associations: Mapping[str, tuple[tuple[str, float], ...]]
    aggregation: AggregationMode
    set_sizes: Mapping[str, int]
    std_dev: float
    numerator: NumeratorMode
    stddev_mode: StddevMode
    effect_size_mean_numerator: float
    model_id: str = ""
    stimulus_id: str = ""
    p_value: float | None = None
    permutations: int | None = None
    permutation_seed: int | None = None


def _combine(layer_stack: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return weights @ layer_stack


def aggregate_mean(layer_stack) -> np.ndarray:
    """Elementwise mean over layers, computed as a uniform weighted sum so
    it is bit-identical to weighted aggregation with uniform weights."""
    stack = np.asarray(layer_stack, dtype=np.float64)
    n_layers = stack.shape[0]
    return _combine(stack, np.full(n_layers, 1.0 / n_layers))


def average_fold_weights(weights: LayerWeights) -> np.ndarray:
    """Mean of the per-fold weight vectors, renormalized to sum to 1."""
    folds = np.asarray(weights.folds, dtype=np.float64)
    mean = folds.mean(axis=0)
    total = float(mean.sum())
    if total <= 0.0:
        raise DegenerateWeights(
            f"layer weights for {weights.model_id!r}/{weights.corpus_id!r} "
            "average to the zero vector"
        )
    return mean / total


def aggregate_weighted(layer_stack, weights) -> np.ndarray:
    """Weighted sum over layers; weights are renormalized with a warning if
    they do not already sum to 1."""
    stack = np.asarray(layer_stack, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != stack.shape[0]:
        raise SchemaMismatch(
            f"weight vector length {w.shape} does not match {stack.shape[0]} layers"
        )
    total = float(w.sum())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        warnings.warn(
            f"layer weights sum to {total!r}; renormalizing to 1",
            RuntimeWarning,
            stacklevel=2,
        )
        if total <= 0.0:
            raise DegenerateWeights("layer weights sum to zero")
        w = w / total
    return _combine(stack, w)


def _cosine(u: np.ndarray, v: np.ndarray, nu: float, nv: float) -> float:
    return float(np.dot(u, v) / (nu * nv))


def association(w, a_vectors: Sequence, b_vectors: Sequence) -> float:
    """Mean cosine similarity of ``w`` to the A set minus the B set."""
    w = np.asarray(w, dtype=np.float64)
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        raise ZeroVector("target vector has zero norm")
    sims_a = []
    for a in a_vectors:
        a = np.asarray(a, dtype=np.float64)
        na = float(np.linalg.norm(a))
        if na == 0.0:
            raise ZeroVector("attribute vector in A has zero norm")
        sims_a.append(_cosine(w, a, nw, na))
    sims_b = []
    for b in b_vectors:
        b = np.asarray(b, dtype=np.float64)
        nb = float(np.linalg.norm(b))
        if nb == 0.0:
            raise ZeroVector("attribute vector in B has zero norm")
        sims_b.append(_cosine(w, b, nw, nb))
    if not sims_a or not sims_b:
        raise ZeroVector("attribute sets must be non-empty")
    return fsum(sims_a) / len(sims_a) - fsum(sims_b) / len(sims_b)


def aggregate_set(
    stimuli: StimulusEmbeddings,
    set_name: str,
    mode: AggregationMode,
    weight_vector: np.ndarray | None,
) -> list[AggregatedEmbedding]:
    out = []
    for item in stimuli.sets[set_name]:
        if mode.kind == "mean":
            vec = aggregate_mean(item.layers)
        else:
            vec = aggregate_weighted(item.layers, weight_vector)
        if float(np.linalg.norm(vec)) == 0.0:
            raise ZeroVector(
                f"aggregated embedding of {item.utt_id!r} (set {set_name!r}) has zero norm"
            )
        out.append(AggregatedEmbedding(item.utt_id, vec, mode))
    return out


def _statistic(s_x: Sequence[float], s_y: Sequence[float], numerator: NumeratorMode) -> float:
    if numerator == "sum":
        return fsum(s_x) - fsum(s_y)
    return fsum(s_x) / len(s_x) - fsum(s_y) / len(s_y)


def _std(values: Sequence[float], mode: StddevMode) -> float:
    n = len(values)
    mean = fsum(values) / n
    squares = fsum((v - mean) ** 2 for v in values)
    if mode == "population":
        return (squares / n) ** 0.5
    if n < 2:
        raise DegenerateAssociations("sample standard deviation needs at least 2 items")
    return (squares / (n - 1)) ** 0.5


def effect_size(
    stimuli: StimulusEmbeddings,
    mode: AggregationMode = MEAN_AGGREGATION,
    weights: LayerWeights | None = None,
    numerator: NumeratorMode = "sum",
    stddev: StddevMode = "population",
    permutations: int | None = None,
    seed: int = 0,
) -> SpeatResult:
    """Association effect size between target sets X, Y and attribute sets A, B.

    The optional permutation test (an extension; reported separately) reshuffles
    the X/Y labels over the pooled targets and counts statistics at least as
    large as the observed one: ``p = (1 + hits) / (1 + permutations)``.
    """
    if numerator not in ("sum", "mean"):
        raise ValueError(f"numerator must be 'sum' or 'mean', got {numerator!r}")
    if stddev not in ("population", "sample"):
        raise ValueError(f"stddev must be 'population' or 'sample', got {stddev!r}")
    weight_vector = None
    if mode.kind == "weighted":
        if weights is None:
            raise ValueError("weighted aggregation requires a LayerWeights input")
        if weights.n_layers != stimuli.n_layers:
            raise SchemaMismatch(
                f"layer weights have {weights.n_layers} layers, "
                f"embeddings have {stimuli.n_layers}"
            )
        weight_vector = average_fold_weights(weights)
        mode = AggregationMode("weighted", weights.model_id, weights.corpus_id)

    aggregated = {
        name: aggregate_set(stimuli, name, mode, weight_vector)
        for name in ("X", "Y", "A", "B")
    }
    a_vecs = [e.vector for e in aggregated["A"]]
    b_vecs = [e.vector for e in aggregated["B"]]

    assoc: dict[str, tuple[tuple[str, float], ...]] = {}
    for name in ("X", "Y"):
        assoc[name] = tuple(
            (e.utt_id, association(e.vector, a_vecs, b_vecs)) for e in aggregated[name]
        )
    s_x = [s for _, s in assoc["X"]]
    s_y = [s for _, s in assoc["Y"]]
    pooled = s_x + s_y

    denominator = _std(pooled, stddev)
    if denominator <= 1e-12:
        raise DegenerateAssociations(
            "association scores are (numerically) identical; effect size undefined"
        )
    value = _statistic(s_x, s_y, numerator) / denominator
    mean_variant = _statistic(s_x, s_y, "mean") / denominator

    result = SpeatResult(
        effect_size=value,
        associations=assoc,
        aggregation=mode,
        set_sizes={name: len(stimuli.sets[name]) for name in ("X", "Y", "A", "B")},
        std_dev=denominator,
        numerator=numerator,
        stddev_mode=stddev,
        effect_size_mean_numerator=mean_variant,
    )
    if permutations:
        p = _permutation_p_value(s_x, s_y, numerator, permutations, seed)
        result = replace(
            result, p_value=p, permutations=permutations, permutation_seed=seed
        )
    return result


def _permutation_p_value(
    s_x: Sequence[float],
    s_y: Sequence[float],
    numerator: NumeratorMode,
    permutations: int,
    seed: int,
) -> float:
    """One-sided label-permutation p-value for the observed statistic.

    Each permutation draws from its own counter-based stream keyed by
    (seed, index), so the result does not depend on evaluation order.
    """
    observed = _statistic(s_x, s_y, numerator)
    pool = np.asarray(list(s_x) + list(s_y), dtype=np.float64)
    n_x = len(s_x)
    hits = 0
    for i in range(permutations):
        rng = np.random.Generator(np.random.Philox(key=[seed, i]))
        order = rng.permutation(pool.shape[0])
        perm_x = pool[order[:n_x]]
        perm_y = pool[order[n_x:]]
        stat = _statistic(perm_x.tolist(), perm_y.tolist(), numerator)
        if stat >= observed:
            hits += 1
    return (1 + hits) / (1 + permutations)
