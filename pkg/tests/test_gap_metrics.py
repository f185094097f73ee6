import numpy as np
import pytest

from serbias.data_model import GroupPair, Valence
from serbias.errors import (
    GroupEmpty,
    MetricUndefined,
    MissingValenceTags,
    ValidationError,
)
from serbias.gap_metrics import (
    build_gap_report,
    corpus_gap,
    data_bias,
    emotion_gap,
    group_f1,
    macro_f1_gap,
    undefined_classes,
    valence_gap,
)
from serbias.synth_oracle import generate_predictions

from helpers import (
    flat,
    four_class_schema,
    hot,
    permute_fixture,
    random_prediction_spec,
    record,
)

PAIR = GroupPair()
N = 4
H, A, U, S = 0, 1, 2, 3  # Happiness, Anger, Surprise, Sadness


def happy_gap_records():
    """Females score F1=1 on Happiness, males F1=2/3 (one missed hit)."""
    return [
        record("f1", "female", hot(H, N), hot(H, N)),
        record("f2", "female", hot(H, N), hot(H, N)),
        record("m1", "male", hot(H, N), hot(H, N)),
        record("m2", "male", hot(H, N), flat(N)),
    ]


class TestGroupF1:
    def test_hand_computed_confusion(self):
        table = group_f1(happy_gap_records(), four_class_schema(), PAIR)
        female = table.scores["female"]["Happiness"]
        male = table.scores["male"]["Happiness"]
        assert female.f1 == pytest.approx(1.0)
        assert (female.gold_positives, female.predicted_positives, female.true_positives) == (2, 2, 2)
        assert male.precision == pytest.approx(1.0)
        assert male.recall == pytest.approx(0.5)
        assert male.f1 == pytest.approx(2 / 3)

    def test_identical_multisets_give_identical_rows(self):
        records = []
        for group in ("female", "male"):
            records.append(record(f"{group}-1", group, hot(H, N), hot(H, N)))
            records.append(record(f"{group}-2", group, hot(A, N), hot(S, N)))
        table = group_f1(records, four_class_schema(), PAIR)
        assert table.scores["female"] == table.scores["male"]

    def test_zero_predictions_with_gold_positives(self):
        records = [
            record("f1", "female", hot(H, N), flat(N)),
            record("m1", "male", hot(H, N), hot(H, N)),
        ]
        table = group_f1(records, four_class_schema(), PAIR)
        tally = table.scores["female"]["Happiness"]
        assert tally.precision is None
        assert tally.recall == 0.0
        assert tally.f1 == 0.0

    def test_zero_support_is_undefined(self):
        table = group_f1(happy_gap_records(), four_class_schema(), PAIR)
        assert table.scores["female"]["Sadness"].f1 is None

    def test_false_alarms_without_gold(self):
        records = [
            record("f1", "female", flat(N), hot(A, N)),
            record("m1", "male", hot(A, N), hot(A, N)),
        ]
        table = group_f1(records, four_class_schema(), PAIR)
        tally = table.scores["female"]["Anger"]
        assert tally.recall is None
        assert tally.precision == 0.0
        assert tally.f1 == 0.0

    def test_other_groups_ignored_with_count(self):
        records = happy_gap_records() + [record("x", "child", hot(H, N), hot(H, N))]
        table = group_f1(records, four_class_schema(), PAIR)
        assert table.ignored_records == 1

    def test_empty_group(self):
        records = [record("f1", "female", hot(H, N), hot(H, N))]
        with pytest.raises(GroupEmpty, match="male"):
            group_f1(records, four_class_schema(), PAIR)

    def test_record_without_pred(self):
        records = happy_gap_records() + [record("f9", "female", hot(H, N))]
        with pytest.raises(ValidationError, match="f9"):
            group_f1(records, four_class_schema(), PAIR)

    def test_macro_f1(self):
        table = group_f1(happy_gap_records(), four_class_schema(), PAIR)
        assert table.macro_f1["female"] == pytest.approx(1.0)
        assert table.macro_f1["male"] == pytest.approx(2 / 3)
        assert macro_f1_gap(table) == pytest.approx(1 / 3)

    def test_argmax_gold_rule(self):
        # Uniform gold binarizes empty under the 1/n rule but argmax
        # always activates its first maximum.
        uniform = (0.25, 0.25, 0.25, 0.25)
        records = [
            record("f1", "female", uniform, hot(H, N)),
            record("m1", "male", uniform, hot(H, N)),
        ]
        strict = group_f1(records, four_class_schema(), PAIR)
        assert strict.scores["female"]["Happiness"].gold_positives == 0
        argmax = group_f1(records, four_class_schema(), PAIR, gold_rule="argmax")
        assert argmax.scores["female"]["Happiness"].gold_positives == 1
        assert argmax.scores["female"]["Happiness"].f1 == pytest.approx(1.0)


class TestEmotionAndCorpusGap:
    def test_gap_from_hand_example(self):
        table = group_f1(happy_gap_records(), four_class_schema(), PAIR)
        gaps = emotion_gap(table)
        assert gaps["Happiness"] == pytest.approx(1 / 3)
        assert gaps["Sadness"] is None

    def test_equal_scores_give_zero(self):
        records = []
        for group in ("female", "male"):
            records.append(record(f"{group}-1", group, hot(H, N), hot(H, N)))
        gaps = emotion_gap(group_f1(records, four_class_schema(), PAIR))
        assert gaps["Happiness"] == 0.0

    def test_corpus_gap_mixed_signs(self):
        assert corpus_gap({"a": 0.2, "b": -0.1}) == pytest.approx(0.15)

    def test_corpus_gap_all_zero(self):
        assert corpus_gap({"a": 0.0, "b": 0.0}) == 0.0

    def test_corpus_gap_skips_undefined_and_reports(self):
        gaps = {"a": 0.3, "b": None, "c": -0.3}
        assert corpus_gap(gaps) == pytest.approx(0.3)
        assert undefined_classes(gaps) == ("b",)

    def test_corpus_gap_all_undefined(self):
        with pytest.raises(MetricUndefined):
            corpus_gap({"a": None})


def valence_fixture():
    """Planted components: d_Happiness=1/3, d_Anger=-1, Surprise splits into
    p+=0.6 with zero gap and p-=0.4 with gap -1. Sadness stays undefined."""
    return [
        # Happiness: female 1/1, male 1 hit 1 miss
        record("f-h1", "female", hot(H, N), hot(H, N)),
        record("m-h1", "male", hot(H, N), hot(H, N)),
        record("m-h2", "male", hot(H, N), flat(N)),
        # Anger: female total miss, male perfect
        record("f-a1", "female", hot(A, N), flat(N)),
        record("m-a1", "male", hot(A, N), hot(A, N)),
        # Surprise, positive-tagged: everyone perfect
        record("f-u1", "female", hot(U, N), hot(U, N), tag=Valence.POSITIVE),
        record("f-u2", "female", hot(U, N), hot(U, N), tag=Valence.POSITIVE),
        record("m-u1", "male", hot(U, N), hot(U, N), tag=Valence.POSITIVE),
        # Surprise, negative-tagged: female misses, male hits
        record("f-u3", "female", hot(U, N), flat(N), tag=Valence.NEGATIVE),
        record("m-u2", "male", hot(U, N), hot(U, N), tag=Valence.NEGATIVE),
    ]


class TestValenceGap:
    def test_hand_evaluated_mixture(self):
        result = valence_gap(valence_fixture(), four_class_schema(), PAIR)
        split = result.split["Surprise"]
        assert split.p_plus == pytest.approx(0.6)
        assert split.p_minus == pytest.approx(0.4)
        assert split.d_plus == pytest.approx(0.0)
        assert split.d_minus == pytest.approx(-1.0)
        # 1/3 - (-1) + (0.6 * 0 - 0.4 * -1)
        assert result.value == pytest.approx(1 / 3 + 1.0 + 0.4, abs=1e-9)
        assert result.excluded == ("Sadness",)

    def test_all_equal_scores_give_zero(self):
        records = []
        for group in ("female", "male"):
            records.append(record(f"{group}-h", group, hot(H, N), hot(H, N)))
            records.append(record(f"{group}-u", group, hot(U, N), hot(U, N),
                                  tag=Valence.POSITIVE))
        result = valence_gap(records, four_class_schema(), PAIR)
        assert result.value == 0.0

    def test_without_both_valence_class_third_term_vanishes(self):
        records = [
            record("f-h", "female", hot(H, N), hot(H, N)),
            record("m-h", "male", hot(H, N), flat(N)),
            record("f-a", "female", hot(A, N), flat(N)),
            record("m-a", "male", hot(A, N), hot(A, N)),
        ]
        result = valence_gap(records, four_class_schema(), PAIR)
        assert result.value == pytest.approx(1.0 - (-1.0))
        assert result.split == {}

    def test_missing_tags_raise(self):
        records = [
            record("f-u", "female", hot(U, N), hot(U, N)),
            record("m-u", "male", hot(U, N), hot(U, N)),
        ]
        with pytest.raises(MissingValenceTags, match="Surprise"):
            valence_gap(records, four_class_schema(), PAIR)

    def test_partially_tagged_proportions_use_tagged_only(self):
        records = [
            record("f-u1", "female", hot(U, N), hot(U, N), tag=Valence.POSITIVE),
            record("f-u2", "female", hot(U, N), hot(U, N), tag=Valence.NEGATIVE),
            record("f-u3", "female", hot(U, N), hot(U, N)),  # untagged
            record("m-u1", "male", hot(U, N), hot(U, N), tag=Valence.POSITIVE),
            record("m-u2", "male", hot(U, N), hot(U, N), tag=Valence.NEGATIVE),
        ]
        result = valence_gap(records, four_class_schema(), PAIR)
        split = result.split["Surprise"]
        assert split.p_plus + split.p_minus == pytest.approx(1.0)
        assert split.p_plus == pytest.approx(0.5)

    def test_one_sided_tag_subset_excluded_when_weighted(self):
        # Negative tag exists only for females; its restricted gap has no
        # male side, so the term is excluded and flagged.
        records = [
            record("f-u1", "female", hot(U, N), hot(U, N), tag=Valence.POSITIVE),
            record("m-u1", "male", hot(U, N), hot(U, N), tag=Valence.POSITIVE),
            record("f-u2", "female", hot(U, N), hot(U, N), tag=Valence.NEGATIVE),
        ]
        result = valence_gap(records, four_class_schema(), PAIR)
        assert "Surprise/negative" in result.excluded


class TestDataBias:
    def test_worked_example(self):
        schema = four_class_schema()
        female_mean = (0.2, 0.3, 0.4, 0.1)
        male_mean = (0.1, 0.2, 0.4, 0.3)
        records = [
            record("f1", "female", female_mean),
            record("f2", "female", female_mean),
            record("m1", "male", male_mean),
            record("m2", "male", male_mean),
        ]
        bias = data_bias(records, schema, PAIR)
        assert bias.values == pytest.approx((0.1, 0.1, 0.0, -0.2), abs=1e-9)

    def test_identical_means_give_zero(self):
        gold = (0.25, 0.25, 0.25, 0.25)
        records = [record("f", "female", gold), record("m", "male", gold)]
        bias = data_bias(records, four_class_schema(), PAIR)
        assert bias.values == (0.0, 0.0, 0.0, 0.0)

    def test_entries_sum_to_zero(self):
        rng = np.random.default_rng(23)
        schema = four_class_schema()
        for _ in range(100):
            records = []
            for group in ("female", "male"):
                for i in range(int(rng.integers(1, 6))):
                    gold = tuple(rng.dirichlet(np.ones(4)))
                    records.append(record(f"{group}{i}", group, gold))
            bias = data_bias(records, schema, PAIR)
            assert abs(sum(bias.values)) < 1e-9

    def test_empty_group(self):
        records = [record("f", "female", (0.5, 0.5, 0.0, 0.0))]
        with pytest.raises(GroupEmpty):
            data_bias(records, four_class_schema(), PAIR)


class TestInvariances:
    def test_group_swap_negates_signed_metrics(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            spec = random_prediction_spec(rng)
            fixture = generate_predictions(spec)
            fwd = build_gap_report(fixture.records, fixture.schema, fixture.pair)
            rev = build_gap_report(fixture.records, fixture.schema, fixture.pair.swapped())
            for name in fixture.schema.classes:
                if fwd.gaps[name] is None:
                    assert rev.gaps[name] is None
                else:
                    assert rev.gaps[name] == pytest.approx(-fwd.gaps[name], abs=1e-12)
            assert rev.corpus_gap == pytest.approx(fwd.corpus_gap, abs=1e-12)
            assert rev.valence_gap == pytest.approx(-fwd.valence_gap, abs=1e-12)
            fwd_bias = data_bias(fixture.training_records, fixture.schema, fixture.pair)
            rev_bias = data_bias(
                fixture.training_records, fixture.schema, fixture.pair.swapped()
            )
            assert rev_bias.values == pytest.approx(
                tuple(-v for v in fwd_bias.values), abs=1e-12
            )

    def test_class_permutation_equivariance(self):
        rng = np.random.default_rng(37)
        for _ in range(50):
            spec = random_prediction_spec(rng)
            fixture = generate_predictions(spec)
            order = list(rng.permutation(fixture.schema.n))
            permuted_records, permuted_schema = permute_fixture(
                fixture.records, fixture.schema, order
            )
            fwd = build_gap_report(fixture.records, fixture.schema, fixture.pair)
            perm = build_gap_report(permuted_records, permuted_schema, fixture.pair)
            for name in fixture.schema.classes:
                if fwd.gaps[name] is None:
                    assert perm.gaps[name] is None
                else:
                    assert perm.gaps[name] == pytest.approx(fwd.gaps[name], abs=1e-12)
            assert perm.corpus_gap == pytest.approx(fwd.corpus_gap, abs=1e-12)
            assert perm.valence_gap == pytest.approx(fwd.valence_gap, abs=1e-12)

    def test_duplicating_records_changes_nothing(self):
        rng = np.random.default_rng(41)
        for _ in range(30):
            spec = random_prediction_spec(rng)
            fixture = generate_predictions(spec)
            once = build_gap_report(fixture.records, fixture.schema, fixture.pair)
            doubled = list(fixture.records) + [
                record(r.utt_id + "-copy", r.group, r.gold, r.pred, r.valence_tag)
                for r in fixture.records
            ]
            twice = build_gap_report(doubled, fixture.schema, fixture.pair)
            for name in fixture.schema.classes:
                if once.gaps[name] is None:
                    assert twice.gaps[name] is None
                else:
                    assert twice.gaps[name] == pytest.approx(once.gaps[name], abs=1e-12)
            assert twice.corpus_gap == pytest.approx(once.corpus_gap, abs=1e-12)
            assert twice.valence_gap == pytest.approx(once.valence_gap, abs=1e-12)

    def test_metric_ranges(self):
        rng = np.random.default_rng(43)
        for _ in range(50):
            fixture = generate_predictions(random_prediction_spec(rng))
            report = build_gap_report(fixture.records, fixture.schema, fixture.pair)
            assert 0.0 <= report.corpus_gap <= 1.0
            for value in report.gaps.values():
                if value is not None:
                    assert -1.0 <= value <= 1.0
