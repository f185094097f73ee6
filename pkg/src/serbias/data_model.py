"""Core domain types, the soft-label pipeline, and the 1/n decision rule.

Everything here is immutable after construction and safe to share across
threads; the operations are pure functions over those types.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Literal, Mapping, Sequence

from .errors import EmptyAnnotation, SchemaMismatch, ValidationError


class Valence(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    BOTH = "both"

    @classmethod
    def from_token(cls, token: str) -> "Valence":
        try:
            return cls(token)
        except ValueError:
            raise SchemaMismatch(
                f"unknown valence {token!r}; expected one of "
                f"{[v.value for v in cls]}"
            ) from None


# Default emotion-to-valence taxonomy. Surprise is the one category that can
# carry either valence, so it is assigned to both. Lookup is case-insensitive.
DEFAULT_VALENCE: Mapping[str, Valence] = {
    "happiness": Valence.POSITIVE,
    "excitement": Valence.POSITIVE,
    "relax": Valence.POSITIVE,
    "joy": Valence.POSITIVE,
    "anger": Valence.NEGATIVE,
    "disgust": Valence.NEGATIVE,
    "contempt": Valence.NEGATIVE,
    "frustration": Valence.NEGATIVE,
    "disappointment": Valence.NEGATIVE,
    "sadness": Valence.NEGATIVE,
    "fear": Valence.NEGATIVE,
    "surprise": Valence.BOTH,
}

DEFAULT_SMOOTHING = 0.05

GOLD_SUM_TOL = 1e-6

GoldRule = Literal["same_as_pred", "argmax"]

GOLD_RULES = ("same_as_pred", "argmax")


@dataclass(frozen=True)
class EmotionSchema:
    """Ordered emotion classes of a corpus and each class's valence category."""

    corpus_id: str
    classes: tuple[str, ...]
    valence_of: Mapping[str, Valence]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "valence_of", dict(self.valence_of))
        if len(self.classes) < 2:
            raise SchemaMismatch("schema needs at least two emotion classes")
        if len(set(self.classes)) != len(self.classes):
            dupes = sorted({c for c in self.classes if self.classes.count(c) > 1})
            raise SchemaMismatch(f"duplicate class names: {dupes}")
        if set(self.valence_of) != set(self.classes):
            missing = sorted(set(self.classes) - set(self.valence_of))
            extra = sorted(set(self.valence_of) - set(self.classes))
            raise SchemaMismatch(
                f"valence map must cover exactly the declared classes "
                f"(missing {missing}, extra {extra})"
            )
        for name, val in self.valence_of.items():
            if not isinstance(val, Valence):
                raise SchemaMismatch(f"valence of {name!r} is not a Valence value")

    @classmethod
    def with_default_valence(cls, corpus_id: str, classes: Sequence[str]) -> "EmotionSchema":
        """Build a schema using the default taxonomy; unknown names are rejected."""
        valence = {}
        for name in classes:
            try:
                valence[name] = DEFAULT_VALENCE[name.lower()]
            except KeyError:
                raise SchemaMismatch(
                    f"class {name!r} has no default valence; declare one explicitly"
                ) from None
        return cls(corpus_id, tuple(classes), valence)

    @property
    def n(self) -> int:
        return len(self.classes)

    def index_of(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise SchemaMismatch(f"unknown class {name!r}") from None

    def classes_with(self, valence: Valence) -> tuple[str, ...]:
        return tuple(c for c in self.classes if self.valence_of[c] is valence)


@dataclass(frozen=True)
class GroupPair:
    """The two compared groups; the advantaged label is reported first.

    Sign convention for every gap metric: advantaged minus disadvantaged.
    """

    advantaged: str = "female"
    disadvantaged: str = "male"

    def __post_init__(self):
        if self.advantaged == self.disadvantaged:
            raise SchemaMismatch("group labels must be distinct")

    @property
    def labels(self) -> tuple[str, str]:
        return (self.advantaged, self.disadvantaged)

    def swapped(self) -> "GroupPair":
        return GroupPair(self.disadvantaged, self.advantaged)


@dataclass(frozen=True)
class UtteranceRecord:
    """A single utterance: group tag, gold soft label, optional prediction.

    ``valence_tag`` is only meaningful for utterances whose gold label
    activates a both-valence class; ``fold`` tracks cross-validation splits.
    """

    utt_id: str
    group: str
    gold: tuple[float, ...]
    pred: tuple[float, ...] | None = None
    valence_tag: Valence | None = None
    fold: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "gold", tuple(float(v) for v in self.gold))
        if self.pred is not None:
            object.__setattr__(self, "pred", tuple(float(v) for v in self.pred))
        if not self.gold:
            raise ValidationError(f"record {self.utt_id!r}: empty gold vector")
        if any(v < 0.0 or v > 1.0 for v in self.gold):
            raise ValidationError(f"record {self.utt_id!r}: gold entries outside [0, 1]")
        total = sum(self.gold)
        if abs(total - 1.0) > GOLD_SUM_TOL:
            raise ValidationError(
                f"record {self.utt_id!r}: gold sums to {total!r}, not 1"
            )
        if self.pred is not None:
            if len(self.pred) != len(self.gold):
                raise ValidationError(
                    f"record {self.utt_id!r}: pred length {len(self.pred)} "
                    f"!= gold length {len(self.gold)}"
                )
            if any(v < 0.0 or v > 1.0 for v in self.pred):
                raise ValidationError(
                    f"record {self.utt_id!r}: pred entries outside [0, 1]"
                )
        if self.valence_tag is Valence.BOTH:
            raise ValidationError(
                f"record {self.utt_id!r}: valence_tag must be positive or negative"
            )


def build_soft_label(
    annotation_counts: Mapping[str, float],
    schema: EmotionSchema,
    epsilon: float = DEFAULT_SMOOTHING,
) -> tuple[float, ...]:
    """Turn annotation counts into a smoothed soft label.

    Counts are normalized to a frequency distribution over the schema's
    classes, then each entry is mixed with the uniform distribution:
    ``(1 - epsilon) * freq + epsilon / n``. The output sums to 1 and every
    entry is at least ``epsilon / n``.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    unknown = sorted(set(annotation_counts) - set(schema.classes))
    if unknown:
        raise SchemaMismatch(f"annotated classes not in schema: {unknown}")
    negative = sorted(k for k, v in annotation_counts.items() if v < 0)
    if negative:
        raise SchemaMismatch(f"negative annotation counts for: {negative}")
    total = float(sum(annotation_counts.values()))
    if total <= 0.0:
        raise EmptyAnnotation("all annotation counts are zero")
    n = schema.n
    uniform = epsilon / n
    return tuple(
        (1.0 - epsilon) * (float(annotation_counts.get(c, 0.0)) / total) + uniform
        for c in schema.classes
    )


def binarize(distribution: Sequence[float], n: int) -> frozenset[int]:
    """Indices whose probability strictly exceeds 1/n.

    The comparison is strict, so a uniform distribution maps to the empty
    set. For probability vectors at most n-1 indices can qualify.
    """
    if n < 2:
        raise SchemaMismatch(f"need at least 2 classes, got n={n}")
    if len(distribution) != n:
        raise SchemaMismatch(
            f"distribution length {len(distribution)} does not match n={n}"
        )
    threshold = 1.0 / n
    return frozenset(k for k, v in enumerate(distribution) if v > threshold)


def argmax_index(distribution: Sequence[float]) -> int:
    """Index of the largest entry; ties resolve to the earliest class."""
    best = 0
    for k in range(1, len(distribution)):
        if distribution[k] > distribution[best]:
            best = k
    return best


def binarize_gold(distribution: Sequence[float], n: int, rule: GoldRule) -> frozenset[int]:
    """Binarize a gold soft label under the configured decision rule."""
    if rule == "same_as_pred":
        return binarize(distribution, n)
    if rule == "argmax":
        if len(distribution) != n:
            raise SchemaMismatch(
                f"distribution length {len(distribution)} does not match n={n}"
            )
        return frozenset({argmax_index(distribution)})
    raise ValueError(f"unknown gold rule {rule!r}; expected one of {GOLD_RULES}")
