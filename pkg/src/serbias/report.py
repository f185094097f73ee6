"""Table rendering and the audit report document.

Three sinks: aligned plain text for terminals, delimited text for
spreadsheets, and a structured JSON document for machines. The JSON sink
keeps raw full-precision numbers, so parsing it back reproduces every
numeric field; the text sinks use the presentation rounding (signed
one-decimal percentages for F1-gap tables, two decimals for effect sizes
and correlations, half away from zero).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from math import fsum
from pathlib import Path
from typing import Mapping, Sequence

from .association_stats import CorrelationCell
from .data_model import EmotionSchema
from .errors import NothingToRender, SchemaMismatch, ValidationError
from .gap_metrics import DataBiasVector, GapReport, GroupF1Table, ValenceSplit
from .speat import SpeatResult

UNDEFINED_CELL = "—"


def _quantize(value: float, places: int) -> Decimal:
    pattern = Decimal(1).scaleb(-places)
    q = Decimal(repr(value)).quantize(pattern, rounding=ROUND_HALF_UP)
    if q == 0:
        q = abs(q)
    return q


def format_signed_percent(value: float | None) -> str:
    """Scale to percent, one decimal, explicit sign on positive values."""
    if value is None:
        return UNDEFINED_CELL
    q = _quantize(value * 100.0, 1)
    return f"+{q}" if q > 0 else str(q)


def format_fixed(value: float | None, places: int = 2) -> str:
    if value is None:
        return UNDEFINED_CELL
    return str(_quantize(value, places))


@dataclass(frozen=True)
class TableDoc:
    """One rendered table: formatted cells plus the raw values behind them."""

    title: str
    corner: str
    columns: tuple[str, ...]
    row_labels: tuple[str, ...]
    cells: tuple[tuple[str, ...], ...]
    values: tuple[tuple[object, ...], ...]


def to_text(doc: TableDoc) -> str:
    header = [doc.corner, *doc.columns]
    rows = [[label, *cells] for label, cells in zip(doc.row_labels, doc.cells)]
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [doc.title]
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append(
            "  ".join(
                cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
                for i, cell in enumerate(row)
            ).rstrip()
        )
    return "\n".join(lines) + "\n"


def to_csv(doc: TableDoc) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([doc.corner, *doc.columns])
    for label, cells in zip(doc.row_labels, doc.cells):
        writer.writerow([label, *cells])
    return buf.getvalue()


def to_json(doc: TableDoc) -> str:
    payload = {
        "title": doc.title,
        "corner": doc.corner,
        "columns": list(doc.columns),
        "rows": [
            {"label": label, "cells": list(values)}
            for label, values in zip(doc.row_labels, doc.values)
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


TABLE_SINKS = {"text": (to_text, ".txt"), "csv": (to_csv, ".csv"), "json": (to_json, ".json")}


def write_table(doc: TableDoc, directory, stem: str, formats: Sequence[str]) -> list:
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        sink, suffix = TABLE_SINKS[fmt]
        path = out_dir / f"{stem}{suffix}"
        path.write_text(sink(doc), encoding="utf-8")
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Renderers
# ---------------------------------------------------------------------------

def render_emotion_gap_table(
    reports: Sequence[GapReport], schema: EmotionSchema
) -> TableDoc:
    """Rows are models, columns the per-class gaps plus the Macro column."""
    if not reports:
        raise NothingToRender("no gap reports to render")
    for report in reports:
        if tuple(report.classes) != schema.classes:
            raise SchemaMismatch(
                f"report for {report.model_id!r} uses classes {list(report.classes)}, "
                f"schema declares {list(schema.classes)}"
            )
    columns = (*schema.classes, "Macro")
    cells = []
    values = []
    for report in reports:
        row_vals = [report.gaps[c] for c in schema.classes] + [report.macro_gap]
        values.append(tuple(row_vals))
        cells.append(tuple(format_signed_percent(v) for v in row_vals))
    return TableDoc(
        title=f"Per-class F1 gap (%) on {schema.corpus_id}",
        corner="model",
        columns=columns,
        row_labels=tuple(r.model_id for r in reports),
        cells=tuple(cells),
        values=tuple(values),
    )


def _pivot(reports: Sequence[GapReport]) -> tuple[tuple[str, ...], tuple[str, ...], dict]:
    models: list[str] = []
    corpora: list[str] = []
    grid: dict[tuple[str, str], GapReport] = {}
    for report in reports:
        if report.model_id not in models:
            models.append(report.model_id)
        if report.corpus_id not in corpora:
            corpora.append(report.corpus_id)
        grid[(report.model_id, report.corpus_id)] = report
    return tuple(models), tuple(corpora), grid


def render_dc_dv_table(reports: Sequence[GapReport]) -> tuple[TableDoc, TableDoc]:
    """Two model-by-corpus grids: corpus-level gap and valence gap, each
    with a trailing cross-corpus mean column."""
    if not reports:
        raise NothingToRender("no gap reports to render")
    models, corpora, grid = _pivot(reports)
    docs = []
    for title, getter in (
        ("Corpus-level F1 gap d_c (%)", lambda r: r.corpus_gap),
        ("Valence F1 gap d_v (%)", lambda r: r.valence_gap),
    ):
        cells = []
        values = []
        for model in models:
            row_vals: list[float | None] = []
            for corpus in corpora:
                report = grid.get((model, corpus))
                row_vals.append(None if report is None else getter(report))
            defined = [v for v in row_vals if v is not None]
            row_vals.append(fsum(defined) / len(defined) if defined else None)
            values.append(tuple(row_vals))
            cells.append(tuple(format_signed_percent(v) for v in row_vals))
        docs.append(
            TableDoc(
                title=title,
                corner="model",
                columns=(*corpora, "mean"),
                row_labels=models,
                cells=tuple(cells),
                values=tuple(values),
            )
        )
    return docs[0], docs[1]


def render_speat_table(results: Sequence[SpeatResult]) -> TableDoc:
    """Models by aggregation grid: the mean column plus one column per
    corpus whose learned layer weights drove the weighted aggregation."""
    if not results:
        raise NothingToRender("no effect-size results to render")
    models: list[str] = []
    corpora: list[str] = []
    grid: dict[tuple[str, str], float] = {}
    for result in results:
        model = result.model_id or "model"
        if model not in models:
            models.append(model)
        if result.aggregation.kind == "mean":
            column = "mean"
        else:
            column = result.aggregation.corpus_id or "weighted"
            if column not in corpora:
                corpora.append(column)
        grid[(model, column)] = result.effect_size
    columns = ("mean", *corpora)
    cells = []
    values = []
    for model in models:
        row_vals = [grid.get((model, column)) for column in columns]
        values.append(tuple(row_vals))
        cells.append(tuple(format_fixed(v) for v in row_vals))
    return TableDoc(
        title="Upstream embedding bias effect size",
        corner="model",
        columns=columns,
        row_labels=tuple(models),
        cells=tuple(cells),
        values=tuple(values),
    )


def render_correlation_grid(
    cells: Mapping[tuple[str, str], CorrelationCell],
    row_labels: Sequence[str],
    columns: Sequence[str],
    title: str,
    corner: str = "series",
) -> TableDoc:
    """Generic r grid; the structured values carry n alongside r."""
    if not cells:
        raise NothingToRender("no correlation cells to render")
    table_cells = []
    table_values = []
    for row in row_labels:
        row_cells = []
        row_values = []
        for col in columns:
            cell = cells.get((row, col))
            if cell is None:
                row_cells.append(UNDEFINED_CELL)
                row_values.append(None)
            else:
                row_cells.append(format_fixed(cell.r))
                row_values.append({"r": cell.r, "n": cell.n})
        table_cells.append(tuple(row_cells))
        table_values.append(tuple(row_values))
    return TableDoc(
        title=title,
        corner=corner,
        columns=tuple(columns),
        row_labels=tuple(row_labels),
        cells=tuple(table_cells),
        values=tuple(table_values),
    )


# ---------------------------------------------------------------------------
# Audit report document
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BiasReport:
    """Everything one audit run computed, with provenance, JSON-able."""

    model_id: str
    corpus_id: str
    classes: tuple[str, ...]
    groups: dict
    gold_rule: str
    counts: dict
    f1: dict
    emotion_gaps: dict
    macro_gap: float | None
    macro_f1_gap: float | None
    corpus_gap: float
    corpus_gap_excluded: tuple[str, ...]
    valence_gap: float
    valence_split: dict
    valence_excluded: tuple[str, ...]
    data_bias: dict | None

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "corpus_id": self.corpus_id,
            "classes": list(self.classes),
            "groups": self.groups,
            "gold_rule": self.gold_rule,
            "counts": self.counts,
            "f1": self.f1,
            "emotion_gaps": self.emotion_gaps,
            "macro_gap": self.macro_gap,
            "macro_f1_gap": self.macro_f1_gap,
            "corpus_gap": self.corpus_gap,
            "corpus_gap_excluded": list(self.corpus_gap_excluded),
            "valence_gap": self.valence_gap,
            "valence_split": self.valence_split,
            "valence_excluded": list(self.valence_excluded),
            "data_bias": self.data_bias,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "BiasReport":
        required = (
            "model_id", "corpus_id", "classes", "emotion_gaps", "corpus_gap",
            "valence_gap",
        )
        missing = [key for key in required if key not in raw]
        if missing:
            raise ValidationError(f"audit report missing fields: {missing}")
        return cls(
            model_id=raw["model_id"],
            corpus_id=raw["corpus_id"],
            classes=tuple(raw["classes"]),
            groups=dict(raw.get("groups", {})),
            gold_rule=raw.get("gold_rule", "same_as_pred"),
            counts=dict(raw.get("counts", {})),
            f1=dict(raw.get("f1", {})),
            emotion_gaps=dict(raw["emotion_gaps"]),
            macro_gap=raw.get("macro_gap"),
            macro_f1_gap=raw.get("macro_f1_gap"),
            corpus_gap=raw["corpus_gap"],
            corpus_gap_excluded=tuple(raw.get("corpus_gap_excluded", ())),
            valence_gap=raw["valence_gap"],
            valence_split=dict(raw.get("valence_split", {})),
            valence_excluded=tuple(raw.get("valence_excluded", ())),
            data_bias=dict(raw["data_bias"]) if raw.get("data_bias") is not None else None,
        )

    def gap_report(self) -> GapReport:
        split = {
            name: ValenceSplit(
                p_plus=entry["p_plus"],
                p_minus=entry["p_minus"],
                d_plus=entry.get("d_plus"),
                d_minus=entry.get("d_minus"),
            )
            for name, entry in self.valence_split.items()
        }
        return GapReport(
            model_id=self.model_id,
            corpus_id=self.corpus_id,
            classes=self.classes,
            gaps=dict(self.emotion_gaps),
            macro_gap=self.macro_gap,
            macro_f1_gap=self.macro_f1_gap,
            corpus_gap=self.corpus_gap,
            corpus_gap_excluded=self.corpus_gap_excluded,
            valence_gap=self.valence_gap,
            valence_split=split,
            valence_excluded=self.valence_excluded,
        )


def build_bias_report(
    gap_report: GapReport,
    table: GroupF1Table,
    pair_labels: tuple[str, str],
    gold_rule: str,
    group_sizes: Mapping[str, int],
    bias: DataBiasVector | None,
) -> BiasReport:
    f1_section: dict = {}
    for group, per_class in table.scores.items():
        f1_section[group] = {
            name: {
                "precision": tally.precision,
                "recall": tally.recall,
                "f1": tally.f1,
                "gold_positives": tally.gold_positives,
                "predicted_positives": tally.predicted_positives,
                "true_positives": tally.true_positives,
            }
            for name, tally in per_class.items()
        }
    f1_section["macro"] = dict(table.macro_f1)
    split_section = {
        name: {
            "p_plus": s.p_plus,
            "p_minus": s.p_minus,
            "d_plus": s.d_plus,
            "d_minus": s.d_minus,
        }
        for name, s in gap_report.valence_split.items()
    }
    return BiasReport(
        model_id=gap_report.model_id,
        corpus_id=gap_report.corpus_id,
        classes=gap_report.classes,
        groups={"advantaged": pair_labels[0], "disadvantaged": pair_labels[1]},
        gold_rule=gold_rule,
        counts={
            "records_per_group": dict(group_sizes),
            "ignored_records": table.ignored_records,
        },
        f1=f1_section,
        emotion_gaps=dict(gap_report.gaps),
        macro_gap=gap_report.macro_gap,
        macro_f1_gap=gap_report.macro_f1_gap,
        corpus_gap=gap_report.corpus_gap,
        corpus_gap_excluded=gap_report.corpus_gap_excluded,
        valence_gap=gap_report.valence_gap,
        valence_split=split_section,
        valence_excluded=gap_report.valence_excluded,
        data_bias=bias.as_mapping() if bias is not None else None,
    )


def serialize_bias_report(report: BiasReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def load_bias_report(path) -> BiasReport:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError("audit report not found", path) from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON ({exc.msg})", path) from None
    if not isinstance(raw, dict):
        raise ValidationError("audit report must be a JSON object", path)
    try:
        return BiasReport.from_dict(raw)
    except ValidationError as exc:
        raise ValidationError(str(exc), path) from None


def speat_result_to_dict(result: SpeatResult) -> dict:
    doc: dict = {
        "model_id": result.model_id,
        "stimulus_id": result.stimulus_id,
        "aggregation": result.aggregation.kind,
        "weights": None,
        "set_sizes": dict(result.set_sizes),
        "effect_size": result.effect_size,
        "effect_size_mean_numerator": result.effect_size_mean_numerator,
        "numerator": result.numerator,
        "stddev": result.stddev_mode,
        "std_dev": result.std_dev,
        "associations": {
            name: [[utt, s] for utt, s in scores]
            for name, scores in result.associations.items()
        },
    }
    if result.aggregation.kind == "weighted":
        doc["weights"] = {
            "model_id": result.aggregation.model_id,
            "corpus_id": result.aggregation.corpus_id,
        }
    if result.permutations is not None:
        doc["permutation_test"] = {
            "extension": True,
            "permutations": result.permutations,
            "seed": result.permutation_seed,
            "p_value": result.p_value,
        }
    return doc


def serialize_speat_result(result: SpeatResult) -> str:
    return json.dumps(speat_result_to_dict(result), sort_keys=True, indent=2) + "\n"


def load_speat_result(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError("effect-size result not found", path) from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON ({exc.msg})", path) from None
    if not isinstance(raw, dict):
        raise ValidationError("effect-size result must be a JSON object", path)
    for key in ("model_id", "aggregation", "effect_size"):
        if key not in raw:
            raise ValidationError(f"effect-size result missing field {key!r}", path)
    return raw
