"""Shared builders for tests: small schemas, records, and randomized
planted-bias specs consumed by the fixture generator."""

from __future__ import annotations

import numpy as np

from serbias.data_model import EmotionSchema, GroupPair, UtteranceRecord, Valence
from serbias.ingestion import StimulusEmbeddings


def four_class_schema(corpus_id: str = "demo") -> EmotionSchema:
    return EmotionSchema(
        corpus_id,
        ("Happiness", "Anger", "Surprise", "Sadness"),
        {
            "Happiness": Valence.POSITIVE,
            "Anger": Valence.NEGATIVE,
            "Surprise": Valence.BOTH,
            "Sadness": Valence.NEGATIVE,
        },
    )


def hot(k: int, n: int, epsilon: float = 0.05) -> tuple[float, ...]:
    base = epsilon / n
    return tuple((1.0 - epsilon) + base if i == k else base for i in range(n))


def flat(n: int) -> tuple[float, ...]:
    import math

    return (math.floor(1e9 / n) / 1e9,) * n


def record(utt_id, group, gold, pred=None, tag=None, fold=None) -> UtteranceRecord:
    return UtteranceRecord(utt_id, group, gold, pred, valence_tag=tag, fold=fold)


def simple_stimuli(
    x=((1.0, 0.0),), y=((0.0, 1.0),), a=((1.0, 0.0),), b=((0.0, 1.0),)
) -> StimulusEmbeddings:
    """Single-layer stimulus sets from plain 2-D-or-more vectors."""
    items = []
    for name, vectors in (("X", x), ("Y", y), ("A", a), ("B", b)):
        for i, vec in enumerate(vectors):
            items.append((f"{name.lower()}{i}", name, [list(vec)]))
    return StimulusEmbeddings.from_items(items)


def random_stimuli(rng: np.random.Generator, dim: int = 4, layers: int = 1) -> StimulusEmbeddings:
    items = []
    for name in ("X", "Y", "A", "B"):
        for i in range(int(rng.integers(2, 5))):
            stack = rng.standard_normal((layers, dim))
            items.append((f"{name.lower()}{i}", name, stack.tolist()))
    return StimulusEmbeddings.from_items(items)


def swap_sets(stimuli: StimulusEmbeddings, first: str, second: str) -> StimulusEmbeddings:
    sets = dict(stimuli.sets)
    sets[first], sets[second] = sets[second], sets[first]
    return StimulusEmbeddings(sets=sets, n_layers=stimuli.n_layers, dim=stimuli.dim)


_RECALL_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
_PRECISION_GRID = (0.5, 0.75, 1.0)


def random_prediction_spec(rng: np.random.Generator) -> dict:
    """A random planted-bias description: every target achievable."""
    n = int(rng.integers(3, 7))
    classes = [f"c{i}" for i in range(n)]
    valence = {c: ("positive" if rng.random() < 0.5 else "negative") for c in classes}
    if rng.random() < 0.5:
        valence[classes[int(rng.integers(0, n))]] = "both"

    plans: dict = {}
    for c in classes:
        if rng.random() < 0.2:
            continue
        per_group: dict = {}
        for group in ("female", "male"):
            if valence[c] == "both":
                entry: dict = {}
                total_tp = 0
                for token in ("positive", "negative"):
                    gp = int(rng.integers(1, 5))
                    recall = float(rng.choice(_RECALL_GRID))
                    total_tp += int(np.floor(recall * gp + 0.5))
                    entry[token] = {"gold_positives": gp, "recall": recall}
                if total_tp > 0:
                    entry["precision"] = float(rng.choice(_PRECISION_GRID))
                entry["false_positives"] = int(rng.integers(0, 3))
                per_group[group] = entry
            else:
                gp = int(rng.integers(0, 5))
                recall = float(rng.choice(_RECALL_GRID)) if gp else 0.0
                entry = {
                    "gold_positives": gp,
                    "recall": recall,
                    "false_positives": int(rng.integers(0, 3)),
                }
                if int(np.floor(recall * gp + 0.5)) > 0:
                    entry["precision"] = float(rng.choice(_PRECISION_GRID))
                per_group[group] = entry
        if per_group:
            plans[c] = per_group

    def has_evidence(entry: dict) -> bool:
        if "positive" in entry or "negative" in entry:
            return True
        return entry.get("gold_positives", 0) > 0 or entry.get("false_positives", 0) > 0

    scored = any(
        all(has_evidence(per_group.get(g, {})) for g in ("female", "male"))
        for per_group in plans.values()
    )
    if not scored:
        anchor = next(c for c in classes if valence[c] != "both")
        plans[anchor] = {
            g: {"gold_positives": 1, "recall": 1.0} for g in ("female", "male")
        }

    mean_adv = rng.dirichlet(np.ones(n))
    mean_dis = rng.dirichlet(np.ones(n))
    return {
        "corpus_id": "synth",
        "classes": classes,
        "valence": valence,
        "predictions": {"classes": plans},
        "training_gold": {
            "advantaged_mean": [float(v) for v in mean_adv],
            "disadvantaged_mean": [float(v) for v in mean_dis],
            "records_per_group": int(rng.integers(1, 4)),
        },
    }


def random_embedding_spec(rng: np.random.Generator) -> dict:
    dim = int(rng.integers(3, 9))
    layers = int(rng.integers(1, 4))
    strengths = [
        float(rng.uniform(0.2, 1.0)) if rng.random() < 0.8 else 0.0
        for _ in range(layers)
    ]
    if not any(strengths):
        strengths[0] = 0.5
    return {
        "dimension": dim,
        "layers": layers,
        "set_sizes": {name: int(rng.integers(2, 7)) for name in ("X", "Y", "A", "B")},
        "target_strength_per_layer": strengths,
        "attribute_strength": float(rng.uniform(0.5, 1.5)),
        "common_strength": float(rng.uniform(0.0, 0.5)),
        "noise": float(rng.uniform(0.05, 0.3)),
        "layer_weights": {
            "model_id": "planted",
            "corpus_id": "synth",
            "folds": [
                [float(rng.uniform(0.1, 1.0)) for _ in range(layers)]
                for _ in range(int(rng.integers(1, 4)))
            ],
        },
    }


def permute_fixture(records, schema: EmotionSchema, order) -> tuple[list, EmotionSchema]:
    """Reorder classes by ``order`` (new index -> old index), permuting every
    vector consistently. Class names travel with their columns."""
    new_classes = tuple(schema.classes[j] for j in order)
    new_schema = EmotionSchema(
        schema.corpus_id, new_classes, {c: schema.valence_of[c] for c in new_classes}
    )
    new_records = []
    for r in records:
        gold = tuple(r.gold[j] for j in order)
        pred = None if r.pred is None else tuple(r.pred[j] for j in order)
        new_records.append(
            UtteranceRecord(r.utt_id, r.group, gold, pred, r.valence_tag, r.fold)
        )
    return new_records, new_schema
