"""Adapters that dump model artifacts into the audit toolkit's file formats.

The exporter never computes bias metrics; it only time-averages, normalizes
and serializes. A "model handle" is any callable mapping a waveform to a
sequence of per-layer frame matrices with shape (frames, dim); torch or
numpy arrays both work.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .canon import canonical_json, format_float

SET_NAMES = ("X", "Y", "A", "B")


@dataclass(frozen=True)
class ExportStats:
    written: int
    skipped: int


@dataclass(frozen=True)
class PredictionItem:
    """One utterance to serialize: raw gold weights plus optional outputs."""

    utt_id: str
    group: str
    gold: Sequence[float]
    pred: Sequence[float] | None = None
    valence_tag: str | None = None
    fold: int | None = None


def _canon_vector(values) -> list[float]:
    return [float(format_float(float(v))) for v in values]


def time_average_layers(layer_frames) -> np.ndarray | None:
    """Average each layer's frame sequence; None when any layer is empty."""
    averaged = []
    for frames in layer_frames:
        arr = np.asarray(frames, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0:
            return None
        averaged.append(arr.mean(axis=0))
    if not averaged:
        return None
    return np.stack(averaged)


def export_embeddings(
    model: Callable,
    utterances: Iterable[tuple[str, object]],
    set_tag: str,
    out_path,
    append: bool = False,
) -> ExportStats:
    """Run the model over (utt_id, waveform) pairs and emit one canonical
    line per utterance under the given stimulus set tag.

    Utterances too short to produce at least one frame in every layer are
    skipped with a warning. Call once per set with ``append=True`` after the
    first to build a complete four-set file.
    """
    if set_tag not in SET_NAMES:
        raise ValueError(f"set tag must be one of {list(SET_NAMES)}, got {set_tag!r}")
    written = 0
    skipped = 0
    mode = "a" if append else "w"
    with open(out_path, mode, encoding="utf-8") as fh:
        for utt_id, waveform in utterances:
            stack = time_average_layers(model(waveform))
            if stack is None:
                warnings.warn(
                    f"utterance {utt_id!r} is shorter than one frame window; skipped",
                    RuntimeWarning,
                    stacklevel=2,
                )
                skipped += 1
                continue
            doc = {
                "utt_id": utt_id,
                "set": set_tag,
                "layers": [_canon_vector(row) for row in stack],
            }
            fh.write(canonical_json(doc) + "\n")
            written += 1
    return ExportStats(written=written, skipped=skipped)


def softmax(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    shifted = np.exp(arr - arr.max())
    return shifted / shifted.sum()


def export_predictions(items: Iterable[PredictionItem], out_path) -> int:
    """Serialize prediction records; gold weights are normalized to sum 1."""
    written = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for item in items:
            gold = np.asarray(item.gold, dtype=np.float64)
            if gold.ndim != 1 or gold.size == 0 or np.any(gold < 0):
                raise ValueError(f"utterance {item.utt_id!r}: gold weights must be non-negative")
            total = float(gold.sum())
            if total <= 0:
                raise ValueError(f"utterance {item.utt_id!r}: gold weights are all zero")
            doc: dict = {
                "utt_id": item.utt_id,
                "group": item.group,
                "gold": _canon_vector(gold / total),
            }
            if item.pred is not None:
                pred = np.asarray(item.pred, dtype=np.float64)
                if pred.shape != gold.shape:
                    raise ValueError(
                        f"utterance {item.utt_id!r}: pred length {pred.size} "
                        f"!= gold length {gold.size}"
                    )
                doc["pred"] = _canon_vector(np.clip(pred, 0.0, 1.0))
            if item.valence_tag is not None:
                if item.valence_tag not in ("positive", "negative"):
                    raise ValueError(
                        f"utterance {item.utt_id!r}: valence tag must be "
                        f"'positive' or 'negative'"
                    )
                doc["valence_tag"] = item.valence_tag
            if item.fold is not None:
                doc["fold"] = int(item.fold)
            fh.write(canonical_json(doc) + "\n")
            written += 1
    return written


def export_layer_weights(
    model_id: str,
    corpus_id: str,
    fold_weights: Iterable[Sequence[float]],
    out_path,
) -> None:
    """Softmax-normalize each fold's raw layer weights and write one document."""
    folds = []
    for raw in fold_weights:
        folds.append(_canon_vector(softmax(raw)))
    if not folds:
        raise ValueError("need at least one fold of layer weights")
    widths = {len(f) for f in folds}
    if len(widths) != 1:
        raise ValueError(f"fold vectors have mixed lengths {sorted(widths)}")
    doc = {"model_id": model_id, "corpus_id": corpus_id, "folds": folds}
    Path(out_path).write_text(canonical_json(doc) + "\n", encoding="utf-8")
