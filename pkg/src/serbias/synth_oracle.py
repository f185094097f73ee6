"""Deterministic fixture generator with planted, known bias.

Fixtures are described by a small declarative document (parsed JSON). The
generator builds records whose confusion counts realize the planted targets
exactly, then computes the expected metrics with the straight-line reference
transcriptions, never with the tuned implementations under test.

Construction tricks that keep per-class counts independent:

* a "hit" record concentrates both gold and prediction on one class;
* a "miss" record concentrates gold on the class and predicts nothing
  (an abstain vector strictly below the 1/n threshold everywhere);
* a "false alarm" record predicts the class while its gold is a flat
  vector that binarizes to the empty set.

All emitted floats are pre-rounded to the canonical 9-significant-digit
file resolution, so in-memory fixtures and their on-disk form agree
bit-exactly. Noise uses numpy's counter-based Philox generator keyed by
the seed, which regenerates identically across platforms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import reference
from .data_model import (
    DEFAULT_SMOOTHING,
    EmotionSchema,
    GroupPair,
    UtteranceRecord,
    Valence,
    build_soft_label,
)
from .errors import SpecError
from .ingestion import (
    DatasetManifest,
    LayerWeights,
    StimulusEmbeddings,
    canon_round,
    write_embeddings,
    write_layer_weights,
    write_manifest,
    write_predictions,
)


@dataclass(frozen=True)
class PredictionFixture:
    schema: EmotionSchema
    pair: GroupPair
    records: tuple[UtteranceRecord, ...]
    training_records: tuple[UtteranceRecord, ...] | None
    expected: dict


@dataclass(frozen=True)
class EmbeddingFixture:
    stimuli: StimulusEmbeddings
    layer_weights: LayerWeights | None
    expected: dict


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5))


def _canon_vec(values) -> tuple[float, ...]:
    return tuple(canon_round(float(v)) for v in values)


def _concentrated(class_index: int, schema: EmotionSchema, epsilon: float) -> tuple[float, ...]:
    """A smoothed one-hot vector; binarizes to exactly {class_index}."""
    return _canon_vec(
        build_soft_label({schema.classes[class_index]: 1}, schema, epsilon)
    )


def _flat_floor(n: int) -> tuple[float, ...]:
    """All entries floor(1e9/n)/1e9: sums to 1 within 1e-6, binarizes empty."""
    base = math.floor(1e9 / n) / 1e9
    return (base,) * n


def _schema_from_spec(spec: Mapping) -> tuple[EmotionSchema, GroupPair]:
    classes = spec.get("classes")
    if not isinstance(classes, list) or len(classes) < 2:
        raise SpecError("spec needs a 'classes' array with at least two names")
    valence_decl = spec.get("valence", {})
    valence = {}
    for name in classes:
        if name in valence_decl:
            try:
                valence[name] = Valence(valence_decl[name])
            except ValueError:
                raise SpecError(
                    f"unknown valence {valence_decl[name]!r} for class {name!r}"
                ) from None
        else:
            from .data_model import DEFAULT_VALENCE

            default = DEFAULT_VALENCE.get(name.lower())
            if default is None:
                raise SpecError(f"class {name!r} needs an explicit valence entry")
            valence[name] = default
    groups = spec.get("groups", {})
    pair = GroupPair(
        groups.get("advantaged", "female"), groups.get("disadvantaged", "male")
    )
    schema = EmotionSchema(spec.get("corpus_id", "synth"), tuple(classes), valence)
    return schema, pair


def _plan_counts(cfg: Mapping, what: str) -> tuple[int, int, int]:
    """Realize (hits, misses, false alarms) from integer-rounded targets."""
    gp = cfg.get("gold_positives", 0)
    if not isinstance(gp, int) or gp < 0:
        raise SpecError(f"{what}: gold_positives must be a non-negative integer")
    recall = cfg.get("recall")
    precision = cfg.get("precision")
    extra_fp = cfg.get("false_positives", 0)
    if not isinstance(extra_fp, int) or extra_fp < 0:
        raise SpecError(f"{what}: false_positives must be a non-negative integer")
    if gp == 0:
        if recall:
            raise SpecError(f"{what}: recall target with zero gold positives")
        tp, fn = 0, 0
    else:
        recall = 0.0 if recall is None else float(recall)
        if not 0.0 <= recall <= 1.0:
            raise SpecError(f"{what}: recall must be in [0, 1]")
        tp = min(gp, _round_half_away(recall * gp))
        fn = gp - tp
    fp = extra_fp
    if tp > 0:
        precision = 1.0 if precision is None else float(precision)
        if precision <= 0.0 or precision > 1.0:
            raise SpecError(f"{what}: precision must be in (0, 1] when hits are planted")
        pp = max(tp, _round_half_away(tp / precision))
        fp += pp - tp
    elif precision is not None and precision != 1.0:
        raise SpecError(f"{what}: precision target without any true positives")
    return tp, fn, fp


class _RecordFactory:
    def __init__(self, schema: EmotionSchema, epsilon: float):
        self.schema = schema
        self.flat = _flat_floor(schema.n)
        self.hot = [_concentrated(k, schema, epsilon) for k in range(schema.n)]
        self.serial: dict[str, int] = {}

    def _next_id(self, group: str) -> str:
        self.serial[group] = self.serial.get(group, 0) + 1
        return f"{group}-{self.serial[group]:05d}"

    def hit(self, group: str, k: int, tag: Valence | None = None) -> UtteranceRecord:
        return UtteranceRecord(
            self._next_id(group), group, self.hot[k], self.hot[k], valence_tag=tag
        )

    def miss(self, group: str, k: int, tag: Valence | None = None) -> UtteranceRecord:
        return UtteranceRecord(
            self._next_id(group), group, self.hot[k], self.flat, valence_tag=tag
        )

    def false_alarm(self, group: str, k: int) -> UtteranceRecord:
        return UtteranceRecord(self._next_id(group), group, self.flat, self.hot[k])

    def filler(self, group: str) -> UtteranceRecord:
        return UtteranceRecord(self._next_id(group), group, self.flat, self.flat)


def generate_predictions(spec: Mapping, seed: int = 0) -> PredictionFixture:
    """Emit prediction records realizing the planted per-class targets.

    The returned expectations are computed from the emitted records by the
    reference transcriptions, so they reflect the realized integer counts,
    not the (possibly rounded) targets. Generation is deterministic; the
    seed is carried through to keep fixture naming uniform with the
    embedding generator.
    """
    schema, pair = _schema_from_spec(spec)
    plan = spec.get("predictions", {})
    epsilon = float(plan.get("epsilon", DEFAULT_SMOOTHING))
    factory = _RecordFactory(schema, epsilon)
    records: list[UtteranceRecord] = []

    class_plans = plan.get("classes", {})
    unknown = sorted(set(class_plans) - set(schema.classes))
    if unknown:
        raise SpecError(f"planted classes not in schema: {unknown}")
    for name in schema.classes:
        cfg_by_group = class_plans.get(name, {})
        bad_groups = sorted(set(cfg_by_group) - set(pair.labels))
        if bad_groups:
            raise SpecError(f"class {name!r}: unknown groups {bad_groups}")
        k = schema.index_of(name)
        is_both = schema.valence_of[name] is Valence.BOTH
        for group in pair.labels:
            cfg = cfg_by_group.get(group)
            if cfg is None:
                continue
            tagged_part = {t: cfg.get(t) for t in ("positive", "negative")}
            has_tags = any(v is not None for v in tagged_part.values())
            if is_both and cfg.get("gold_positives", 0) and not has_tags:
                raise SpecError(
                    f"class {name!r} carries both valences; plant 'positive'/'negative' subsets"
                )
            if not is_both and has_tags:
                raise SpecError(f"class {name!r} is single-valence; no tagged subsets allowed")
            if has_tags and cfg.get("gold_positives"):
                raise SpecError(
                    f"class {name!r}: flat gold_positives and tagged subsets are mutually exclusive"
                )
            if has_tags:
                total_tp = 0
                for token, tag in (("positive", Valence.POSITIVE), ("negative", Valence.NEGATIVE)):
                    sub = tagged_part[token]
                    if sub is None:
                        continue
                    tp, fn, fp_sub = _plan_counts(sub, f"{name}/{group}/{token}")
                    if fp_sub:
                        raise SpecError(
                            f"{name}/{group}/{token}: false alarms belong on the class level"
                        )
                    total_tp += tp
                    records.extend(factory.hit(group, k, tag) for _ in range(tp))
                    records.extend(factory.miss(group, k, tag) for _ in range(fn))
                precision = cfg.get("precision")
                fp = cfg.get("false_positives", 0)
                if not isinstance(fp, int) or fp < 0:
                    raise SpecError(
                        f"{name}/{group}: false_positives must be a non-negative integer"
                    )
                if total_tp > 0 and precision is not None:
                    precision = float(precision)
                    if precision <= 0.0 or precision > 1.0:
                        raise SpecError(f"{name}/{group}: precision must be in (0, 1]")
                    fp += max(0, _round_half_away(total_tp / precision) - total_tp)
                records.extend(factory.false_alarm(group, k) for _ in range(fp))
            else:
                tp, fn, fp = _plan_counts(cfg, f"{name}/{group}")
                records.extend(factory.hit(group, k) for _ in range(tp))
                records.extend(factory.miss(group, k) for _ in range(fn))
                records.extend(factory.false_alarm(group, k) for _ in range(fp))

    group_size = plan.get("group_size")
    if group_size is not None:
        for group in pair.labels:
            used = factory.serial.get(group, 0)
            if used > group_size:
                raise SpecError(
                    f"group {group!r} needs {used} records, exceeding group_size={group_size}"
                )
            records.extend(factory.filler(group) for _ in range(group_size - used))
    else:
        for group in pair.labels:
            if factory.serial.get(group, 0) == 0:
                records.append(factory.filler(group))

    training_records = None
    training = spec.get("training_gold")
    if training is not None:
        training_records = _generate_training(training, schema, pair)

    expected = _expected_from_records(records, training_records, schema, pair)
    return PredictionFixture(
        schema=schema,
        pair=pair,
        records=tuple(records),
        training_records=training_records,
        expected=expected,
    )


def _generate_training(
    cfg: Mapping, schema: EmotionSchema, pair: GroupPair
) -> tuple[UtteranceRecord, ...]:
    per_group = cfg.get("records_per_group", 1)
    if not isinstance(per_group, int) or per_group < 1:
        raise SpecError("training_gold.records_per_group must be a positive integer")
    out = []
    for key, group in (("advantaged_mean", pair.advantaged), ("disadvantaged_mean", pair.disadvantaged)):
        mean = cfg.get(key)
        if not isinstance(mean, list) or len(mean) != schema.n:
            raise SpecError(f"training_gold.{key} must be a length-{schema.n} vector")
        gold = _canon_vec(mean)
        if abs(sum(gold) - 1.0) > 1e-6 or any(v < 0 or v > 1 for v in gold):
            raise SpecError(f"training_gold.{key} is not a probability vector")
        for i in range(per_group):
            out.append(UtteranceRecord(f"train-{group}-{i + 1:05d}", group, gold))
    return tuple(out)


def _expected_from_records(records, training_records, schema, pair) -> dict:
    gaps = reference.naive_emotion_gaps(records, schema, pair)
    expected: dict = {
        "emotion_gaps": dict(gaps),
        "corpus_gap": reference.naive_corpus_gap(gaps),
        "macro_gap": reference.naive_macro_gap(gaps),
        "valence_gap": reference.naive_valence_gap(records, schema, pair),
    }
    if training_records is not None:
        expected["data_bias"] = dict(
            zip(schema.classes, reference.naive_data_bias(training_records, schema, pair))
        )
    return expected


# ---------------------------------------------------------------------------
# Embedding fixtures
# ---------------------------------------------------------------------------

def generate_embeddings(spec: Mapping, seed: int = 0) -> EmbeddingFixture:
    """Emit stimulus embeddings built from fixed anchor directions.

    Targets lean toward their matching attribute anchor with a per-layer
    strength; an optional shared component and isotropic noise dilute the
    signal. The expected effect sizes are brute-force evaluations of the
    emitted vectors through the reference transcriptions.
    """
    dim = spec.get("dimension")
    if not isinstance(dim, int) or dim < 2:
        raise SpecError("embeddings need an integer dimension of at least 2")
    n_layers = spec.get("layers", 1)
    if not isinstance(n_layers, int) or n_layers < 1:
        raise SpecError("layers must be a positive integer")
    sizes = spec.get("set_sizes")
    if not isinstance(sizes, dict) or set(sizes) != {"X", "Y", "A", "B"}:
        raise SpecError("set_sizes must give integer sizes for X, Y, A and B")
    for name, size in sizes.items():
        if not isinstance(size, int) or size < 1:
            raise SpecError(f"set_sizes[{name!r}] must be a positive integer")
    strengths = spec.get("target_strength_per_layer", [1.0] * n_layers)
    if len(strengths) != n_layers:
        raise SpecError("target_strength_per_layer must have one entry per layer")
    strengths = [float(s) for s in strengths]
    attribute_strength = float(spec.get("attribute_strength", 1.0))
    common = float(spec.get("common_strength", 0.0))
    noise = float(spec.get("noise", 0.0))
    if noise < 0:
        raise SpecError("noise must be non-negative")
    if common != 0.0 and dim < 3:
        raise SpecError("common_strength needs dimension of at least 3")
    if noise == 0.0 and common == 0.0 and not any(strengths):
        raise SpecError("targets would be all-zero; add strength, common component or noise")
    if noise == 0.0 and attribute_strength == 0.0:
        raise SpecError("attribute sets would be all-zero")

    anchor = {"X": 0, "Y": 1, "A": 0, "B": 1}
    rng = np.random.Generator(np.random.Philox(key=seed))
    items = []
    for set_name in ("X", "Y", "A", "B"):
        axis = anchor[set_name]
        for i in range(sizes[set_name]):
            stack = np.zeros((n_layers, dim))
            for layer in range(n_layers):
                if set_name in ("X", "Y"):
                    stack[layer, axis] += strengths[layer]
                    if common:
                        stack[layer, 2] += common
                else:
                    stack[layer, axis] += attribute_strength
                if noise:
                    stack[layer] += noise * rng.standard_normal(dim)
            canon_stack = [list(_canon_vec(row)) for row in stack]
            items.append((f"{set_name}-{i + 1:04d}", set_name, canon_stack))
    stimuli = StimulusEmbeddings.from_items(items)

    weights = None
    weights_cfg = spec.get("layer_weights")
    if weights_cfg is not None:
        folds = weights_cfg.get("folds")
        if not isinstance(folds, list) or not folds:
            raise SpecError("layer_weights.folds must be a non-empty array")
        if any(len(fold) != n_layers for fold in folds):
            raise SpecError("layer_weights fold vectors must have one entry per layer")
        weights = LayerWeights(
            model_id=weights_cfg.get("model_id", "planted"),
            corpus_id=weights_cfg.get("corpus_id", spec.get("corpus_id", "synth")),
            folds=tuple(tuple(_canon_vec(fold)) for fold in folds),
        )

    expected = {"effect_size": _expected_effect_sizes(stimuli, weights)}
    return EmbeddingFixture(stimuli=stimuli, layer_weights=weights, expected=expected)


def _expected_effect_sizes(
    stimuli: StimulusEmbeddings, weights: LayerWeights | None
) -> dict:
    def stacks(name: str) -> list[list[list[float]]]:
        return [
            [[float(v) for v in row] for row in item.layers]
            for item in stimuli.sets[name]
        ]

    out: dict = {}
    mean_sets = {
        name: [reference.naive_mean_layers(stack) for stack in stacks(name)]
        for name in ("X", "Y", "A", "B")
    }
    out["mean"] = {
        num: reference.naive_effect_size(
            mean_sets["X"], mean_sets["Y"], mean_sets["A"], mean_sets["B"], numerator=num
        )
        for num in ("sum", "mean")
    }
    if weights is not None:
        w = reference.naive_fold_average([list(f) for f in weights.folds])
        weighted_sets = {
            name: [reference.naive_weighted_layers(stack, w) for stack in stacks(name)]
            for name in ("X", "Y", "A", "B")
        }
        out["weighted"] = {
            num: reference.naive_effect_size(
                weighted_sets["X"],
                weighted_sets["Y"],
                weighted_sets["A"],
                weighted_sets["B"],
                numerator=num,
            )
            for num in ("sum", "mean")
        }
    return out


# ---------------------------------------------------------------------------
# Fixture directories
# ---------------------------------------------------------------------------

def write_fixture(spec: Mapping, seed: int, out_dir) -> list[Path]:
    """Write a complete fixture directory in the exact ingestion formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    expected: dict = {"seed": seed}

    if "predictions" in spec or "training_gold" in spec:
        fixture = generate_predictions(spec, seed)
        pred_path = out / "predictions.jsonl"
        write_predictions(fixture.records, pred_path)
        written.append(pred_path)
        training_declared = None
        if fixture.training_records is not None:
            gold_path = out / "training_gold.jsonl"
            write_predictions(fixture.training_records, gold_path)
            written.append(gold_path)
            training_declared = "training_gold.jsonl"
        manifest = DatasetManifest(
            corpus_id=fixture.schema.corpus_id,
            schema=fixture.schema,
            group_pair=fixture.pair,
            predictions_path="predictions.jsonl",
            training_gold_path=training_declared,
            base_dir=out,
        )
        manifest_path = out / "manifest.json"
        write_manifest(manifest, manifest_path)
        written.append(manifest_path)
        expected.update(fixture.expected)

    if "embeddings" in spec:
        emb_spec = dict(spec["embeddings"])
        if "layer_weights" in spec:
            emb_spec.setdefault("layer_weights", spec["layer_weights"])
        emb_spec.setdefault("corpus_id", spec.get("corpus_id", "synth"))
        fixture = generate_embeddings(emb_spec, seed)
        emb_path = out / "embeddings.jsonl"
        write_embeddings(fixture.stimuli, emb_path)
        written.append(emb_path)
        if fixture.layer_weights is not None:
            weights_path = out / "layer_weights.json"
            write_layer_weights(fixture.layer_weights, weights_path)
            written.append(weights_path)
        expected.update(fixture.expected)

    if len(written) == 0:
        raise SpecError("spec plants neither predictions nor embeddings")

    expected_path = out / "expected.json"
    expected_path.write_text(
        json.dumps(expected, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    written.append(expected_path)
    return written
