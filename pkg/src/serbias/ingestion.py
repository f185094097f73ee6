"""On-disk formats: manifest, prediction lines, stimulus embeddings, layer weights.

Readers stream line-delimited files and validate every field with file/line
context. Writers emit the canonical form: JSON with sorted keys, no padding
whitespace, floats at 9 significant digits, one record per line, and a single
trailing newline. Parsing a canonical file and re-serializing it reproduces
the bytes exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .data_model import DEFAULT_VALENCE, EmotionSchema, GroupPair, UtteranceRecord, Valence
from .errors import ManifestError, SchemaMismatch, ValidationError

SET_NAMES = ("X", "Y", "A", "B")

_VALENCE_TOKENS = {v.value for v in Valence}
_TAG_TOKENS = {Valence.POSITIVE.value, Valence.NEGATIVE.value}


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------

def format_float(value: float) -> str:
    """Canonical float text: 9 significant digits, no negative zero."""
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"non-finite value {value!r} cannot be serialized")
    if value == 0.0:
        value = 0.0
    return format(value, ".9g")


def canon_round(value: float) -> float:
    """Round a float to its canonical on-disk resolution."""
    return float(format_float(value))


def canonical_json(obj) -> str:
    """Serialize a JSON-able structure in canonical form."""
    parts: list[str] = []
    _write_canonical(obj, parts)
    return "".join(parts)


def _write_canonical(obj, parts: list[str]) -> None:
    if isinstance(obj, dict):
        parts.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise ValidationError(f"non-string key {key!r} in document")
            if i:
                parts.append(",")
            parts.append(json.dumps(key))
            parts.append(":")
            _write_canonical(obj[key], parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(obj):
            if i:
                parts.append(",")
            _write_canonical(item, parts)
        parts.append("]")
    elif isinstance(obj, bool):
        parts.append("true" if obj else "false")
    elif obj is None:
        parts.append("null")
    elif isinstance(obj, float):
        parts.append(format_float(obj))
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    else:
        raise ValidationError(f"cannot serialize {type(obj).__name__} value {obj!r}")


def _iter_lines(path) -> Iterator[tuple[int, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                yield lineno, line


def _parse_line(path, lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON ({exc.msg})", path, lineno) from None
    if not isinstance(obj, dict):
        raise ValidationError("record line must be a JSON object", path, lineno)
    return obj


def _float_vector(raw, what: str, path, lineno) -> tuple[float, ...]:
    if not isinstance(raw, list) or not raw:
        raise ValidationError(f"{what} must be a non-empty array", path, lineno)
    out = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(f"{what} contains non-numeric entry {v!r}", path, lineno)
        v = float(v)
        if not math.isfinite(v):
            raise ValidationError(f"{what} contains non-finite entry", path, lineno)
        out.append(v)
    return tuple(out)


# ---------------------------------------------------------------------------
# Dataset manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetManifest:
    """Validated description of a corpus export: schema, groups, file paths."""

    corpus_id: str
    schema: EmotionSchema
    group_pair: GroupPair
    n_folds: int | None = None
    predictions_path: str | None = None
    training_gold_path: str | None = None
    base_dir: Path | None = None

    def _resolve(self, declared: str | None) -> Path | None:
        if declared is None:
            return None
        p = Path(declared)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p

    @property
    def predictions_file(self) -> Path | None:
        return self._resolve(self.predictions_path)

    @property
    def training_gold_file(self) -> Path | None:
        return self._resolve(self.training_gold_path)


def load_manifest(path) -> DatasetManifest:
    """Parse and fully validate a dataset manifest document."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError("manifest file not found", path) from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"invalid JSON ({exc.msg})", path) from None
    if not isinstance(raw, dict):
        raise ManifestError("manifest must be a JSON object", path)

    corpus_id = raw.get("corpus_id")
    if not isinstance(corpus_id, str) or not corpus_id:
        raise ManifestError("missing or empty corpus_id", path, "corpus_id")

    classes = raw.get("classes")
    if not isinstance(classes, list) or not classes:
        raise ManifestError("classes must be a non-empty array", path, "classes")
    if not all(isinstance(c, str) and c for c in classes):
        raise ManifestError("class names must be non-empty strings", path, "classes")
    if len(set(classes)) != len(classes):
        dupes = sorted({c for c in classes if classes.count(c) > 1})
        raise ManifestError(f"duplicate class names: {dupes}", path, "classes")

    declared = raw.get("valence", {})
    if not isinstance(declared, dict):
        raise ManifestError("valence must be an object", path, "valence")
    extra = sorted(set(declared) - set(classes))
    if extra:
        raise ManifestError(f"valence declared for unknown classes: {extra}", path, "valence")
    valence: dict[str, Valence] = {}
    for name in classes:
        if name in declared:
            token = declared[name]
            if token not in _VALENCE_TOKENS:
                raise ManifestError(
                    f"unknown valence token {token!r} for class {name!r}; "
                    f"expected one of {sorted(_VALENCE_TOKENS)}",
                    path,
                    "valence",
                )
            valence[name] = Valence(token)
        else:
            default = DEFAULT_VALENCE.get(name.lower())
            if default is None:
                raise ManifestError(
                    f"class {name!r} has no valence entry and no default", path, "valence"
                )
            valence[name] = default

    groups = raw.get("groups", {})
    if not isinstance(groups, dict):
        raise ManifestError("groups must be an object", path, "groups")
    advantaged = groups.get("advantaged", "female")
    disadvantaged = groups.get("disadvantaged", "male")
    if not isinstance(advantaged, str) or not isinstance(disadvantaged, str):
        raise ManifestError("group labels must be strings", path, "groups")

    n_folds = raw.get("n_folds")
    if n_folds is not None and (isinstance(n_folds, bool) or not isinstance(n_folds, int) or n_folds < 1):
        raise ManifestError("n_folds must be a positive integer", path, "n_folds")

    paths = raw.get("paths", {})
    if not isinstance(paths, dict):
        raise ManifestError("paths must be an object", path, "paths")
    for key, value in paths.items():
        if key not in ("predictions", "training_gold"):
            raise ManifestError(f"unknown path entry {key!r}", path, "paths")
        if not isinstance(value, str) or not value:
            raise ManifestError(f"path {key!r} must be a non-empty string", path, "paths")

    try:
        schema = EmotionSchema(corpus_id, tuple(classes), valence)
        pair = GroupPair(advantaged, disadvantaged)
    except SchemaMismatch as exc:
        raise ManifestError(str(exc), path) from None

    manifest = DatasetManifest(
        corpus_id=corpus_id,
        schema=schema,
        group_pair=pair,
        n_folds=n_folds,
        predictions_path=paths.get("predictions"),
        training_gold_path=paths.get("training_gold"),
        base_dir=path.parent,
    )
    for name, resolved in (
        ("predictions", manifest.predictions_file),
        ("training_gold", manifest.training_gold_file),
    ):
        if resolved is not None and not resolved.exists():
            raise ManifestError(f"referenced {name} file does not exist: {resolved}", path, "paths")
    return manifest


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    doc: dict = {
        "corpus_id": manifest.corpus_id,
        "classes": list(manifest.schema.classes),
        "valence": {c: v.value for c, v in manifest.schema.valence_of.items()},
        "groups": {
            "advantaged": manifest.group_pair.advantaged,
            "disadvantaged": manifest.group_pair.disadvantaged,
        },
    }
    if manifest.n_folds is not None:
        doc["n_folds"] = manifest.n_folds
    paths = {}
    if manifest.predictions_path is not None:
        paths["predictions"] = manifest.predictions_path
    if manifest.training_gold_path is not None:
        paths["training_gold"] = manifest.training_gold_path
    if paths:
        doc["paths"] = paths
    return doc


def serialize_manifest(manifest: DatasetManifest) -> str:
    return canonical_json(manifest_to_dict(manifest)) + "\n"


def write_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(serialize_manifest(manifest), encoding="utf-8")


# ---------------------------------------------------------------------------
# Prediction records
# ---------------------------------------------------------------------------

def load_predictions(path, manifest: DatasetManifest) -> list[UtteranceRecord]:
    """Stream prediction lines, validating each against the manifest schema."""
    n = manifest.schema.n
    labels = set(manifest.group_pair.labels)
    records: list[UtteranceRecord] = []
    for lineno, line in _iter_lines(path):
        obj = _parse_line(path, lineno, line)
        utt_id = obj.get("utt_id")
        if not isinstance(utt_id, str) or not utt_id:
            raise ValidationError("missing or empty utt_id", path, lineno)
        group = obj.get("group")
        if not isinstance(group, str) or not group:
            raise ValidationError(f"record {utt_id!r}: missing group tag", path, lineno)
        if group not in labels:
            raise ValidationError(
                f"record {utt_id!r}: unknown group tag {group!r}; "
                f"manifest declares {sorted(labels)}",
                path,
                lineno,
            )
        gold = _float_vector(obj.get("gold"), "gold", path, lineno)
        if len(gold) != n:
            raise ValidationError(
                f"record {utt_id!r}: gold length {len(gold)} != {n} classes",
                path,
                lineno,
            )
        pred = None
        if "pred" in obj and obj["pred"] is not None:
            pred = _float_vector(obj["pred"], "pred", path, lineno)
            if len(pred) != n:
                raise ValidationError(
                    f"record {utt_id!r}: pred length {len(pred)} != {n} classes",
                    path,
                    lineno,
                )
        tag = None
        if "valence_tag" in obj and obj["valence_tag"] is not None:
            token = obj["valence_tag"]
            if token not in _TAG_TOKENS:
                raise ValidationError(
                    f"record {utt_id!r}: valence_tag {token!r} must be one of "
                    f"{sorted(_TAG_TOKENS)}",
                    path,
                    lineno,
                )
            tag = Valence(token)
        fold = None
        if "fold" in obj and obj["fold"] is not None:
            fold = obj["fold"]
            if isinstance(fold, bool) or not isinstance(fold, int) or fold < 0:
                raise ValidationError(
                    f"record {utt_id!r}: fold must be a non-negative integer",
                    path,
                    lineno,
                )
            if manifest.n_folds is not None and fold >= manifest.n_folds:
                raise ValidationError(
                    f"record {utt_id!r}: fold {fold} out of range for "
                    f"n_folds={manifest.n_folds}",
                    path,
                    lineno,
                )
        try:
            records.append(
                UtteranceRecord(
                    utt_id=utt_id, group=group, gold=gold, pred=pred,
                    valence_tag=tag, fold=fold,
                )
            )
        except ValidationError as exc:
            raise ValidationError(str(exc), path, lineno) from None
    return records


def record_to_dict(record: UtteranceRecord) -> dict:
    doc: dict = {
        "utt_id": record.utt_id,
        "group": record.group,
        "gold": list(record.gold),
    }
    if record.pred is not None:
        doc["pred"] = list(record.pred)
    if record.valence_tag is not None:
        doc["valence_tag"] = record.valence_tag.value
    if record.fold is not None:
        doc["fold"] = record.fold
    return doc


def serialize_predictions(records: Iterable[UtteranceRecord]) -> str:
    return "".join(canonical_json(record_to_dict(r)) + "\n" for r in records)


def write_predictions(records: Iterable[UtteranceRecord], path) -> None:
    Path(path).write_text(serialize_predictions(records), encoding="utf-8")


# ---------------------------------------------------------------------------
# Stimulus embeddings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingItem:
    """One utterance's layerwise embedding stack, shape (layers, dim)."""

    utt_id: str
    layers: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.layers, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"item {self.utt_id!r}: layer stack must be 2-D")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "layers", arr)


@dataclass(frozen=True)
class StimulusEmbeddings:
    """The four named stimulus sets with a shared (layers, dim) shape."""

    sets: Mapping[str, tuple[EmbeddingItem, ...]]
    n_layers: int
    dim: int

    def __post_init__(self):
        object.__setattr__(
            self, "sets", {name: tuple(items) for name, items in self.sets.items()}
        )
        if set(self.sets) != set(SET_NAMES):
            raise ValidationError(
                f"stimulus sets must be exactly {list(SET_NAMES)}, got {sorted(self.sets)}"
            )
        if self.n_layers < 1:
            raise ValidationError("embedding stacks need at least one layer")
        for name in SET_NAMES:
            items = self.sets[name]
            if not items:
                raise ValidationError(
                    f"set {name!r} is empty; association means need at least one item"
                )
            for item in items:
                if item.layers.shape != (self.n_layers, self.dim):
                    raise ValidationError(
                        f"item {item.utt_id!r} in set {name!r} has shape "
                        f"{item.layers.shape}, expected {(self.n_layers, self.dim)}"
                    )
                if not np.all(np.isfinite(item.layers)):
                    raise ValidationError(
                        f"item {item.utt_id!r} in set {name!r} has non-finite entries"
                    )

    @classmethod
    def from_items(
        cls, items: Iterable[tuple[str, str, Sequence[Sequence[float]]]]
    ) -> "StimulusEmbeddings":
        """Build from (utt_id, set_name, layer stack) triples."""
        sets: dict[str, list[EmbeddingItem]] = {name: [] for name in SET_NAMES}
        shape: tuple[int, int] | None = None
        for utt_id, set_name, layers in items:
            if set_name not in SET_NAMES:
                raise ValidationError(
                    f"item {utt_id!r}: set must be one of {list(SET_NAMES)}, got {set_name!r}"
                )
            item = EmbeddingItem(utt_id, np.asarray(layers, dtype=np.float64))
            if shape is None:
                shape = item.layers.shape
            sets[set_name].append(item)
        if shape is None:
            raise ValidationError("no embedding items given")
        return cls(sets=sets, n_layers=shape[0], dim=shape[1])


def load_embeddings(path) -> StimulusEmbeddings:
    """Stream an embeddings file; dimensional consistency is enforced."""
    sets: dict[str, list[EmbeddingItem]] = {name: [] for name in SET_NAMES}
    n_layers: int | None = None
    dim: int | None = None
    for lineno, line in _iter_lines(path):
        obj = _parse_line(path, lineno, line)
        utt_id = obj.get("utt_id")
        if not isinstance(utt_id, str) or not utt_id:
            raise ValidationError("missing or empty utt_id", path, lineno)
        set_name = obj.get("set")
        if set_name not in SET_NAMES:
            raise ValidationError(
                f"item {utt_id!r}: set must be one of {list(SET_NAMES)}, "
                f"got {set_name!r}",
                path,
                lineno,
            )
        layers_raw = obj.get("layers")
        if not isinstance(layers_raw, list) or not layers_raw:
            raise ValidationError(
                f"item {utt_id!r}: layers must be a non-empty array of vectors",
                path,
                lineno,
            )
        vectors = [
            _float_vector(layer, f"item {utt_id!r} layer {i}", path, lineno)
            for i, layer in enumerate(layers_raw)
        ]
        widths = {len(v) for v in vectors}
        if len(widths) != 1:
            raise ValidationError(
                f"item {utt_id!r}: ragged layer stack, widths {sorted(widths)}",
                path,
                lineno,
            )
        if n_layers is None:
            n_layers, dim = len(vectors), widths.pop()
        else:
            if len(vectors) != n_layers:
                raise ValidationError(
                    f"item {utt_id!r} has {len(vectors)} layers, expected {n_layers}",
                    path,
                    lineno,
                )
            if widths.pop() != dim:
                raise ValidationError(
                    f"item {utt_id!r} has dimension mismatch, expected {dim}",
                    path,
                    lineno,
                )
        sets[set_name].append(EmbeddingItem(utt_id, np.array(vectors, dtype=np.float64)))
    if n_layers is None:
        raise ValidationError("embeddings file contains no records", path)
    try:
        return StimulusEmbeddings(sets=sets, n_layers=n_layers, dim=dim)
    except ValidationError as exc:
        raise ValidationError(str(exc), path) from None


def embeddings_to_dicts(stimuli: StimulusEmbeddings) -> Iterator[dict]:
    for set_name in SET_NAMES:
        for item in stimuli.sets[set_name]:
            yield {
                "utt_id": item.utt_id,
                "set": set_name,
                "layers": [[float(v) for v in layer] for layer in item.layers],
            }


def serialize_embeddings(stimuli: StimulusEmbeddings) -> str:
    """Canonical order: sets in X, Y, A, B order, items in load order."""
    return "".join(canonical_json(doc) + "\n" for doc in embeddings_to_dicts(stimuli))


def write_embeddings(stimuli: StimulusEmbeddings, path) -> None:
    Path(path).write_text(serialize_embeddings(stimuli), encoding="utf-8")


# ---------------------------------------------------------------------------
# Layer weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerWeights:
    """Per-fold layerwise weight vectors learned by a downstream model."""

    model_id: str
    corpus_id: str
    folds: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        folds = tuple(tuple(float(v) for v in fold) for fold in self.folds)
        object.__setattr__(self, "folds", folds)
        if not folds:
            raise ValidationError("layer weights need at least one fold")
        lengths = {len(fold) for fold in folds}
        if len(lengths) != 1:
            raise ValidationError(f"fold vectors have mixed lengths {sorted(lengths)}")
        if lengths.pop() < 1:
            raise ValidationError("fold vectors must be non-empty")
        for i, fold in enumerate(folds):
            for v in fold:
                if not math.isfinite(v):
                    raise ValidationError(f"fold {i} has non-finite weight")
                if v < 0.0:
                    raise ValidationError(f"fold {i} has negative weight {v!r}")

    @property
    def n_layers(self) -> int:
        return len(self.folds[0])


def load_layer_weights(path) -> LayerWeights:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError("layer weights file not found", path) from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON ({exc.msg})", path) from None
    if not isinstance(raw, dict):
        raise ValidationError("layer weights must be a JSON object", path)
    model_id = raw.get("model_id")
    corpus_id = raw.get("corpus_id")
    if not isinstance(model_id, str) or not model_id:
        raise ValidationError("missing or empty model_id", path)
    if not isinstance(corpus_id, str) or not corpus_id:
        raise ValidationError("missing or empty corpus_id", path)
    folds_raw = raw.get("folds")
    if not isinstance(folds_raw, list) or not folds_raw:
        raise ValidationError("folds must be a non-empty array", path)
    folds = [_float_vector(fold, f"fold {i}", path, None) for i, fold in enumerate(folds_raw)]
    try:
        return LayerWeights(model_id=model_id, corpus_id=corpus_id, folds=tuple(folds))
    except ValidationError as exc:
        raise ValidationError(str(exc), path) from None


def layer_weights_to_dict(weights: LayerWeights) -> dict:
    return {
        "model_id": weights.model_id,
        "corpus_id": weights.corpus_id,
        "folds": [list(fold) for fold in weights.folds],
    }


def serialize_layer_weights(weights: LayerWeights) -> str:
    return canonical_json(layer_weights_to_dict(weights)) + "\n"


def write_layer_weights(weights: LayerWeights, path) -> None:
    Path(path).write_text(serialize_layer_weights(weights), encoding="utf-8")
