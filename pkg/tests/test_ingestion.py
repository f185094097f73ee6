import json

import numpy as np
import pytest

from serbias.data_model import EmotionSchema, GroupPair, UtteranceRecord, Valence
from serbias.errors import ManifestError, ValidationError
from serbias.ingestion import (
    DatasetManifest,
    LayerWeights,
    StimulusEmbeddings,
    canonical_json,
    format_float,
    load_embeddings,
    load_layer_weights,
    load_manifest,
    load_predictions,
    serialize_embeddings,
    serialize_layer_weights,
    serialize_manifest,
    serialize_predictions,
    write_manifest,
    write_predictions,
)

from helpers import four_class_schema, hot, record

EIGHT_CLASSES = ["A", "S", "H", "U", "F", "D", "C", "N"]
EIGHT_VALENCE = {
    "A": "negative", "S": "negative", "H": "positive", "U": "both",
    "F": "negative", "D": "negative", "C": "negative", "N": "negative",
}


def write_json(path, doc):
    path.write_text(json.dumps(doc) + "\n", encoding="utf-8")
    return path


def manifest_doc(**overrides):
    doc = {
        "corpus_id": "demo",
        "classes": EIGHT_CLASSES,
        "valence": EIGHT_VALENCE,
        "groups": {"advantaged": "female", "disadvantaged": "male"},
    }
    doc.update(overrides)
    return doc


class TestManifest:
    def test_eight_class_roster_parsed_as_declared(self, tmp_path):
        path = write_json(tmp_path / "m.json", manifest_doc())
        manifest = load_manifest(path)
        assert manifest.schema.classes == tuple(EIGHT_CLASSES)
        assert manifest.schema.valence_of["H"] is Valence.POSITIVE
        assert manifest.schema.valence_of["U"] is Valence.BOTH
        assert manifest.group_pair.labels == ("female", "male")

    def test_duplicate_class(self, tmp_path):
        doc = manifest_doc(classes=["Anger", "Anger"], valence={"Anger": "negative"})
        path = write_json(tmp_path / "m.json", doc)
        with pytest.raises(ManifestError, match="duplicate"):
            load_manifest(path)

    def test_valence_typo_names_the_token(self, tmp_path):
        doc = manifest_doc(valence=dict(EIGHT_VALENCE, H="positve"))
        path = write_json(tmp_path / "m.json", doc)
        with pytest.raises(ManifestError, match="positve"):
            load_manifest(path)

    def test_missing_corpus_id(self, tmp_path):
        doc = manifest_doc()
        del doc["corpus_id"]
        path = write_json(tmp_path / "m.json", doc)
        with pytest.raises(ManifestError, match="corpus_id"):
            load_manifest(path)

    def test_default_valence_fallback(self, tmp_path):
        doc = {
            "corpus_id": "demo",
            "classes": ["Happiness", "Sadness", "Surprise"],
        }
        path = write_json(tmp_path / "m.json", doc)
        manifest = load_manifest(path)
        assert manifest.schema.valence_of["Surprise"] is Valence.BOTH
        assert manifest.group_pair.labels == ("female", "male")

    def test_class_without_any_valence(self, tmp_path):
        doc = {"corpus_id": "demo", "classes": ["Happiness", "Zeal"]}
        path = write_json(tmp_path / "m.json", doc)
        with pytest.raises(ManifestError, match="Zeal"):
            load_manifest(path)

    def test_referenced_file_must_exist(self, tmp_path):
        doc = manifest_doc(paths={"predictions": "missing.jsonl"})
        path = write_json(tmp_path / "m.json", doc)
        with pytest.raises(ManifestError, match="missing.jsonl"):
            load_manifest(path)

    def test_relative_paths_resolve_against_manifest(self, tmp_path):
        (tmp_path / "preds.jsonl").write_text("", encoding="utf-8")
        doc = manifest_doc(paths={"predictions": "preds.jsonl"})
        path = write_json(tmp_path / "m.json", doc)
        manifest = load_manifest(path)
        assert manifest.predictions_file == tmp_path / "preds.jsonl"

    def test_round_trip_is_byte_identical(self, tmp_path):
        schema = EmotionSchema(
            "demo", tuple(EIGHT_CLASSES), {c: Valence(v) for c, v in EIGHT_VALENCE.items()}
        )
        manifest = DatasetManifest(
            corpus_id="demo", schema=schema, group_pair=GroupPair(), n_folds=5
        )
        path = tmp_path / "m.json"
        write_manifest(manifest, path)
        first = path.read_bytes()
        reloaded = load_manifest(path)
        assert serialize_manifest(reloaded).encode() == first


class TestPredictions:
    @pytest.fixture
    def manifest(self):
        schema = EmotionSchema(
            "demo",
            ("N", "A", "S", "H"),
            {"N": Valence.NEGATIVE, "A": Valence.NEGATIVE,
             "S": Valence.NEGATIVE, "H": Valence.POSITIVE},
        )
        return DatasetManifest(corpus_id="demo", schema=schema, group_pair=GroupPair(), n_folds=5)

    def test_accepts_well_formed_record(self, tmp_path, manifest):
        path = tmp_path / "p.jsonl"
        path.write_text(
            '{"utt_id":"u1","group":"female","gold":[0.2,0.3,0.4,0.1]}\n',
            encoding="utf-8",
        )
        records = load_predictions(path, manifest)
        assert records[0].gold == (0.2, 0.3, 0.4, 0.1)
        assert records[0].pred is None

    def test_rejects_unnormalized_gold(self, tmp_path, manifest):
        path = tmp_path / "p.jsonl"
        path.write_text(
            '{"utt_id":"u1","group":"female","gold":[0.5,0.5,0.5,0.5]}\n',
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match="p.jsonl:1"):
            load_predictions(path, manifest)

    def test_rejects_unknown_group(self, tmp_path, manifest):
        path = tmp_path / "p.jsonl"
        path.write_text(
            '{"utt_id":"u1","group":"adult","gold":[0.2,0.3,0.4,0.1]}\n',
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match="adult"):
            load_predictions(path, manifest)

    def test_error_carries_line_number(self, tmp_path, manifest):
        lines = [
            '{"utt_id":"u1","group":"female","gold":[0.2,0.3,0.4,0.1]}',
            '{"utt_id":"u2","group":"female","gold":[0.9,0.9,0.1,0.1]}',
        ]
        path = tmp_path / "p.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="p.jsonl:2"):
            load_predictions(path, manifest)

    def test_fold_range(self, tmp_path, manifest):
        path = tmp_path / "p.jsonl"
        path.write_text(
            '{"utt_id":"u1","group":"female","gold":[0.2,0.3,0.4,0.1],"fold":9}\n',
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match="fold"):
            load_predictions(path, manifest)

    def test_bad_valence_tag(self, tmp_path, manifest):
        path = tmp_path / "p.jsonl"
        path.write_text(
            '{"utt_id":"u1","group":"female","gold":[0.2,0.3,0.4,0.1],'
            '"valence_tag":"both"}\n',
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match="valence_tag"):
            load_predictions(path, manifest)

    def test_order_preserved(self, tmp_path, manifest):
        lines = [
            f'{{"utt_id":"u{i}","group":"female","gold":[0.2,0.3,0.4,0.1]}}'
            for i in range(5)
        ]
        path = tmp_path / "p.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        records = load_predictions(path, manifest)
        assert [r.utt_id for r in records] == [f"u{i}" for i in range(5)]

    def test_round_trip_is_byte_identical(self, tmp_path, manifest):
        records = [
            record("u1", "female", hot(0, 4), hot(0, 4), tag=Valence.POSITIVE, fold=2),
            record("u2", "male", (0.2, 0.3, 0.4, 0.1)),
            record("u3", "male", (1.0, 0.0, 0.0, 0.0), (0.25, 0.25, 0.25, 0.25)),
        ]
        path = tmp_path / "p.jsonl"
        write_predictions(records, path)
        first = path.read_bytes()
        reloaded = load_predictions(path, manifest)
        assert serialize_predictions(reloaded).encode() == first
        assert reloaded[0].valence_tag is Valence.POSITIVE
        assert reloaded[0].fold == 2


class TestEmbeddings:
    def lines(self, specs):
        return "".join(
            json.dumps({"utt_id": u, "set": s, "layers": layers}) + "\n"
            for u, s, layers in specs
        )

    def test_happy_path(self, tmp_path):
        specs = []
        for name in ("X", "Y", "A", "B"):
            for i in range(2):
                specs.append((f"{name}{i}", name, [[float(i + 1)] * 4] * 3))
        path = tmp_path / "e.jsonl"
        path.write_text(self.lines(specs), encoding="utf-8")
        stimuli = load_embeddings(path)
        assert stimuli.n_layers == 3 and stimuli.dim == 4
        assert len(stimuli.sets["X"]) == 2

    def test_ragged_layer_count(self, tmp_path):
        specs = [
            ("x0", "X", [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
            ("a0", "A", [[1.0, 0.0], [0.0, 1.0]]),
        ]
        path = tmp_path / "e.jsonl"
        path.write_text(self.lines(specs), encoding="utf-8")
        with pytest.raises(ValidationError, match="a0"):
            load_embeddings(path)

    def test_ragged_widths_within_item(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text(self.lines([("x0", "X", [[1.0, 0.0], [1.0]])]), encoding="utf-8")
        with pytest.raises(ValidationError, match="ragged"):
            load_embeddings(path)

    def test_empty_set_rejected(self, tmp_path):
        specs = [
            ("x0", "X", [[1.0, 0.0]]),
            ("y0", "Y", [[0.0, 1.0]]),
            ("a0", "A", [[1.0, 0.0]]),
        ]
        path = tmp_path / "e.jsonl"
        path.write_text(self.lines(specs), encoding="utf-8")
        with pytest.raises(ValidationError, match="'B'"):
            load_embeddings(path)

    def test_unknown_set_name(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text(self.lines([("x0", "Z", [[1.0, 0.0]])]), encoding="utf-8")
        with pytest.raises(ValidationError, match="'Z'"):
            load_embeddings(path)

    def test_round_trip_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(3)
        items = []
        for name in ("X", "Y", "A", "B"):
            for i in range(2):
                stack = [
                    [float(format(v, ".9g")) for v in rng.standard_normal(4)]
                    for _ in range(2)
                ]
                items.append((f"{name}{i}", name, stack))
        stimuli = StimulusEmbeddings.from_items(items)
        path = tmp_path / "e.jsonl"
        path.write_text(serialize_embeddings(stimuli), encoding="utf-8")
        first = path.read_bytes()
        assert serialize_embeddings(load_embeddings(path)).encode() == first


class TestLayerWeights:
    def test_happy_path(self, tmp_path):
        path = tmp_path / "w.json"
        path.write_text(
            json.dumps({"model_id": "m", "corpus_id": "c",
                        "folds": [[0.2, 0.8], [0.4, 0.6]]}),
            encoding="utf-8",
        )
        weights = load_layer_weights(path)
        assert weights.folds == ((0.2, 0.8), (0.4, 0.6))

    def test_single_fold_accepted(self):
        weights = LayerWeights("m", "c", ((0.25, 0.75),))
        assert weights.n_layers == 2

    def test_negative_entry(self, tmp_path):
        path = tmp_path / "w.json"
        path.write_text(
            json.dumps({"model_id": "m", "corpus_id": "c", "folds": [[0.2, -0.1]]}),
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match="negative"):
            load_layer_weights(path)

    def test_mixed_lengths(self):
        with pytest.raises(ValidationError, match="lengths"):
            LayerWeights("m", "c", ((0.2, 0.8), (1.0,)))

    def test_round_trip_is_byte_identical(self, tmp_path):
        weights = LayerWeights("m", "c", ((0.2, 0.8), (0.4, 0.6)))
        path = tmp_path / "w.json"
        path.write_text(serialize_layer_weights(weights), encoding="utf-8")
        first = path.read_bytes()
        assert serialize_layer_weights(load_layer_weights(path)).encode() == first


class TestCanonicalForm:
    def test_nine_significant_digits(self):
        assert format_float(1 / 3) == "0.333333333"
        assert format_float(1.0) == "1"
        assert format_float(-0.0) == "0"
        assert format_float(1e-9) == "1e-09"

    def test_formatting_is_idempotent(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            value = float(rng.standard_normal() * 10 ** int(rng.integers(-9, 9)))
            once = format_float(value)
            assert format_float(float(once)) == once

    def test_sorted_keys_and_compact_layout(self):
        doc = {"b": [1.0, 2], "a": {"z": None, "y": True}}
        assert canonical_json(doc) == '{"a":{"y":true,"z":null},"b":[1,2]}'

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            format_float(float("nan"))
