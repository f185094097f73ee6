"""Exception hierarchy for the audit toolkit.

Each class carries the exit code the CLI maps it to: 2 for usage mistakes,
3 for input validation failures, 4 for metrics that cannot be computed from
otherwise valid data (empty groups, zero variance, degenerate weights).
"""

from __future__ import annotations


class AuditError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 3


class UsageError(AuditError):
    """Command line invoked with an inconsistent flag combination."""

    exit_code = 2


class EmptyAnnotation(AuditError):
    """Annotation counts are all zero; no distribution can be formed."""


class SchemaMismatch(AuditError):
    """Input refers to classes, lengths, or rosters the schema does not declare."""


class ManifestError(AuditError):
    """Dataset manifest is malformed."""

    def __init__(self, message: str, path: object = None, field: str | None = None):
        self.path = path
        self.field = field
        prefix = f"{path}: " if path is not None else ""
        suffix = f" (field {field!r})" if field else ""
        super().__init__(f"{prefix}{message}{suffix}")


class ValidationError(AuditError):
    """A data file or record violates the format contract."""

    def __init__(self, message: str, path: object = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = str(path)
            if line is not None:
                prefix += f":{line}"
            prefix += ": "
        super().__init__(prefix + message)


class MissingValenceTags(AuditError):
    """A both-valence class has gold positives but no per-utterance valence tags."""


class ZeroVector(AuditError):
    """An embedding has zero norm; cosine similarity is undefined."""


class SpecError(AuditError):
    """A planted-bias fixture description is malformed or unachievable."""


class GroupEmpty(AuditError):
    """No records for one of the comparison groups."""

    exit_code = 4


class MetricUndefined(AuditError):
    """Every input the metric averages over is undefined."""

    exit_code = 4


class DegenerateWeights(AuditError):
    """Layer weights average to the zero vector."""

    exit_code = 4


class DegenerateAssociations(AuditError):
    """All association scores are identical; the effect size denominator vanishes."""

    exit_code = 4


class DegenerateSeries(AuditError):
    """A correlation input series has fewer than two points or zero variance."""

    exit_code = 4


class NothingToRender(AuditError):
    """Table renderer was given an empty report set."""

    exit_code = 4
