"""Command-line entry point: audit, speat, correlate, synth.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 metric
undefined or degenerate input. Reruns with identical inputs and flags
produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .association_stats import data_vs_gap, valence_vs_upstream
from .data_model import GOLD_RULES, GroupPair
from .errors import AuditError, SpecError, UsageError, ValidationError
from .gap_metrics import DataBiasVector, build_gap_report, data_bias, group_f1
from .ingestion import load_embeddings, load_layer_weights, load_manifest, load_predictions
from .report import (
    build_bias_report,
    load_bias_report,
    load_speat_result,
    render_correlation_grid,
    render_dc_dv_table,
    render_emotion_gap_table,
    serialize_bias_report,
    serialize_speat_result,
    to_text,
    write_table,
)
from .speat import MEAN_AGGREGATION, AggregationMode, effect_size
from .synth_oracle import write_fixture

FORMAT_CHOICES = ("text", "csv", "json", "all")

# Flags that an optional config document may default; explicit flags win.
# Environment variables are deliberately not consulted: every run must be
# reproducible from its command line and files alone.
CONFIG_KEYS = {
    "audit": {"model_id": str, "gold_rule": str, "format": str},
    "speat": {
        "aggregation": str, "numerator": str, "stddev": str,
        "model_id": str, "stimulus_id": str, "permutations": int, "seed": int,
    },
    "correlate": {"format": str},
}

HARD_DEFAULTS = {
    "model_id": "model",
    "gold_rule": "same_as_pred",
    "format": "all",
    "aggregation": "mean",
    "numerator": "sum",
    "stddev": "population",
    "stimulus_id": "stimuli",
    "permutations": None,
    "seed": 0,
}

FLAG_CHOICES = {
    "gold_rule": GOLD_RULES,
    "format": FORMAT_CHOICES,
    "aggregation": ("mean", "weighted"),
    "numerator": ("sum", "mean"),
    "stddev": ("population", "sample"),
}


def _apply_config(args) -> None:
    """Fill unset flags from the config document; explicit flags override."""
    keys = CONFIG_KEYS.get(args.command, {})
    config = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            config = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc.msg})") from None
        if not isinstance(config, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        unknown = sorted(set(config) - set(keys))
        if unknown:
            raise UsageError(f"{path}: unknown config keys for {args.command}: {unknown}")
    for key, kind in keys.items():
        if getattr(args, key) is not None:
            continue
        if key in config:
            value = config[key]
            if not isinstance(value, kind) or isinstance(value, bool):
                raise UsageError(f"config key {key!r} must be a {kind.__name__}")
            if key in FLAG_CHOICES and value not in FLAG_CHOICES[key]:
                raise UsageError(
                    f"config key {key!r} must be one of {list(FLAG_CHOICES[key])}"
                )
            setattr(args, key, value)
        else:
            setattr(args, key, HARD_DEFAULTS[key])


def _formats(arg: str) -> list[str]:
    return ["text", "csv", "json"] if arg == "all" else [arg]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="serbias",
        description="Gender-bias audit toolkit for speech emotion recognition exports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    audit = sub.add_parser("audit", help="compute downstream gap metrics from predictions")
    audit.add_argument("manifest", help="dataset manifest document")
    audit.add_argument("predictions", nargs="?", default=None,
                       help="prediction lines (default: the manifest's path)")
    audit.add_argument("--training-gold", default=None,
                       help="gold-only lines for the training-data bias "
                            "(default: the manifest's path, else the scored records)")
    audit.add_argument("--model-id", default=None)
    audit.add_argument("--gold-rule", choices=GOLD_RULES, default=None)
    audit.add_argument("--group-order", default=None, metavar="ADV,DIS",
                       help="override the advantaged,disadvantaged order")
    audit.add_argument("--out", default=None, help="directory for report and tables")
    audit.add_argument("--format", choices=FORMAT_CHOICES, default=None)
    audit.add_argument("--config", default=None, help="JSON document of default flags")
    audit.set_defaults(func=_cmd_audit)

    speat = sub.add_parser("speat", help="compute the upstream embedding bias effect size")
    speat.add_argument("embeddings", help="stimulus embeddings file")
    speat.add_argument("--weights", default=None, help="layer weights document")
    speat.add_argument("--aggregation", choices=("mean", "weighted"), default=None)
    speat.add_argument("--numerator", choices=("sum", "mean"), default=None)
    speat.add_argument("--stddev", choices=("population", "sample"), default=None)
    speat.add_argument("--permutations", type=int, default=None,
                       help="run the permutation-test extension with this many resamples")
    speat.add_argument("--seed", type=int, default=None)
    speat.add_argument("--model-id", default=None)
    speat.add_argument("--stimulus-id", default=None)
    speat.add_argument("--out", default=None, help="path for the result document")
    speat.add_argument("--config", default=None, help="JSON document of default flags")
    speat.set_defaults(func=_cmd_speat)

    correlate = sub.add_parser("correlate", help="correlate bias metrics across reports")
    correlate.add_argument("--mode", choices=("data-vs-gap", "valence-vs-upstream"),
                           required=True)
    correlate.add_argument("--reports", nargs="+", required=True,
                           help="audit report documents")
    correlate.add_argument("--speat", nargs="*", default=[],
                           help="effect-size result documents (valence-vs-upstream)")
    correlate.add_argument("--out", default=None, help="directory for the grid")
    correlate.add_argument("--format", choices=FORMAT_CHOICES, default=None)
    correlate.add_argument("--config", default=None, help="JSON document of default flags")
    correlate.set_defaults(func=_cmd_correlate)

    synth = sub.add_parser("synth", help="generate a planted-bias fixture directory")
    synth.add_argument("spec", help="planted-bias description document")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out-dir", required=True)
    synth.set_defaults(func=_cmd_synth)

    return parser


def _cmd_audit(args) -> int:
    manifest = load_manifest(args.manifest)
    pred_path = args.predictions or manifest.predictions_file
    if pred_path is None:
        raise UsageError("no predictions path given and the manifest declares none")
    records = load_predictions(pred_path, manifest)

    pair = manifest.group_pair
    if args.group_order:
        parts = [p.strip() for p in args.group_order.split(",")]
        if len(parts) != 2 or set(parts) != set(pair.labels):
            raise UsageError(
                f"--group-order must reorder the manifest labels {sorted(pair.labels)}"
            )
        pair = GroupPair(parts[0], parts[1])

    gap_report = build_gap_report(
        records, manifest.schema, pair, model_id=args.model_id, gold_rule=args.gold_rule
    )
    table = group_f1(records, manifest.schema, pair, args.gold_rule)

    training_path = args.training_gold or manifest.training_gold_file
    if training_path is not None:
        training_records = load_predictions(training_path, manifest)
    else:
        training_records = records
    bias = data_bias(training_records, manifest.schema, pair)

    group_sizes = {
        label: sum(1 for r in records if r.group == label) for label in pair.labels
    }
    bias_report = build_bias_report(
        gap_report, table, pair.labels, args.gold_rule, group_sizes, bias
    )

    print(f"d_c={gap_report.corpus_gap:.3f} d_v={gap_report.valence_gap:.3f}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "audit_report.json").write_text(
            serialize_bias_report(bias_report), encoding="utf-8"
        )
        formats = _formats(args.format)
        gap_table = render_emotion_gap_table([gap_report], manifest.schema)
        dc_doc, dv_doc = render_dc_dv_table([gap_report])
        write_table(gap_table, out, "emotion_gap_table", formats)
        write_table(dc_doc, out, "corpus_gap_table", formats)
        write_table(dv_doc, out, "valence_gap_table", formats)
    return 0


def _cmd_speat(args) -> int:
    if args.aggregation == "weighted" and not args.weights:
        raise UsageError("--aggregation weighted requires --weights")
    if args.permutations is not None and args.permutations < 1:
        raise UsageError("--permutations must be a positive integer")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    stimuli = load_embeddings(args.embeddings)
    weights = load_layer_weights(args.weights) if args.weights else None
    mode = (
        AggregationMode("weighted", weights.model_id, weights.corpus_id)
        if args.aggregation == "weighted"
        else MEAN_AGGREGATION
    )
    result = effect_size(
        stimuli,
        mode=mode,
        weights=weights,
        numerator=args.numerator,
        stddev=args.stddev,
        permutations=args.permutations,
        seed=args.seed,
    )
    result = replace(result, model_id=args.model_id, stimulus_id=args.stimulus_id)
    print(f"d_s={result.effect_size:.2f}")
    if result.p_value is not None:
        print(
            f"permutation test (extension): p={result.p_value:.4f} "
            f"over {result.permutations} resamples, seed {result.permutation_seed}"
        )
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(serialize_speat_result(result), encoding="utf-8")
    return 0


def _load_audit_reports(paths) -> list:
    reports = []
    seen = set()
    groups = None
    for path in paths:
        report = load_bias_report(path)
        key = (report.model_id, report.corpus_id)
        if key in seen:
            raise ValidationError(
                f"duplicate audit report for model {key[0]!r} on corpus {key[1]!r}", path
            )
        seen.add(key)
        if groups is None:
            groups = report.groups
        elif report.groups != groups:
            raise ValidationError(
                f"audit reports mix group conventions: {groups} vs {report.groups}; "
                "signed gaps are not comparable",
                path,
            )
        reports.append(report)
    return reports


def _cmd_correlate(args) -> int:
    if args.mode == "data-vs-gap":
        doc = _correlate_data_vs_gap(args)
    else:
        if not args.speat:
            raise UsageError("--mode valence-vs-upstream requires --speat results")
        doc = _correlate_valence_vs_upstream(args)
    sys.stdout.write(to_text(doc))
    if args.out:
        write_table(doc, Path(args.out), f"correlation_{args.mode}", _formats(args.format))
    return 0


def _correlate_data_vs_gap(args):
    reports = _load_audit_reports(args.reports)
    models: list[str] = []
    corpora: list[str] = []
    cells = {}
    for report in reports:
        if report.data_bias is None:
            raise ValidationError(
                f"audit report for {report.model_id!r} carries no training-data bias"
            )
        if report.model_id not in models:
            models.append(report.model_id)
        if report.corpus_id not in corpora:
            corpora.append(report.corpus_id)
        bias = DataBiasVector(
            classes=tuple(report.classes),
            values=tuple(report.data_bias[c] for c in report.classes),
            pair=GroupPair(
                report.groups.get("advantaged", "female"),
                report.groups.get("disadvantaged", "male"),
            ),
        )
        cells[(report.model_id, report.corpus_id)] = data_vs_gap(
            bias, report.emotion_gaps
        )
    return render_correlation_grid(
        cells, models, corpora,
        "Correlation of training-data bias with F1 gaps", corner="model",
    )


def _correlate_valence_vs_upstream(args):
    reports = _load_audit_reports(args.reports)
    corpora: list[str] = []
    valence: dict[str, dict[str, float]] = {}
    for report in reports:
        if report.corpus_id not in corpora:
            corpora.append(report.corpus_id)
            valence[report.corpus_id] = {}
        valence[report.corpus_id][report.model_id] = report.valence_gap

    mean_lookup: dict[tuple[str, str], float] = {}
    weighted_lookup: dict[tuple[str, str, str], float] = {}
    rows: list[tuple[str, str]] = []
    for path in args.speat:
        result = load_speat_result(path)
        stimulus = result.get("stimulus_id", "stimuli")
        model = result["model_id"]
        if result["aggregation"] == "mean":
            mean_lookup[(model, stimulus)] = result["effect_size"]
            row = (stimulus, "Mean")
        else:
            weights = result.get("weights") or {}
            corpus = weights.get("corpus_id")
            if not corpus:
                raise ValidationError(
                    "weighted effect-size result lacks weights corpus provenance", path
                )
            weighted_lookup[(model, stimulus, corpus)] = result["effect_size"]
            row = (stimulus, "Weighted")
        if row not in rows:
            rows.append(row)

    cells = {}
    for stimulus, kind in rows:
        label = f"{stimulus}/{kind}"
        for corpus in corpora:
            models = list(valence[corpus])
            series_s = {}
            for model in models:
                if kind == "Mean":
                    value = mean_lookup.get((model, stimulus))
                else:
                    value = weighted_lookup.get((model, stimulus, corpus))
                if value is None:
                    raise ValidationError(
                        f"no {kind.lower()} effect size for model {model!r}, "
                        f"stimuli {stimulus!r}, corpus {corpus!r}"
                    )
                series_s[model] = value
            cells[(label, corpus)] = valence_vs_upstream(valence[corpus], series_s)
    row_labels = [f"{stimulus}/{kind}" for stimulus, kind in rows]
    return render_correlation_grid(
        cells, row_labels, corpora,
        "Correlation of valence gaps with upstream embedding bias",
    )


def _cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    try:
        spec = json.loads(spec_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SpecError(f"spec file not found: {spec_path}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"{spec_path}: invalid JSON ({exc.msg})") from None
    if not isinstance(spec, dict):
        raise SpecError(f"{spec_path}: spec must be a JSON object")
    written = write_fixture(spec, seed=args.seed, out_dir=args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except AuditError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
