"""Metric tests against a brute-force oracle that recounts from raw tuples."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from genlevel.corpus import SemanticTypeRegistry, record_from_obj
from genlevel.evaluation import (
    confusion_csv,
    confusion_matrix,
    evaluate,
    format_report,
    weighted_scores,
)

from conftest import record_obj


def toy_records(labels_and_selections):
    registry = SemanticTypeRegistry()
    records = []
    for i, (majority, all_levels) in enumerate(labels_and_selections):
        m = max(max(all_levels), majority)
        records.append(
            record_from_obj(
                record_obj(
                    rid=f"t{i}",
                    candidates=tuple(f"c{j}" for j in range(m)),
                    majority_level=majority,
                    all_levels=tuple(all_levels),
                ),
                registry,
            )
        )
    return records


def oracle_metrics(predictions, records):
    """Independent recount of every metric from raw (pred, majority, all) tuples."""
    n = len(records)
    mv = sum(1 for p, r in zip(predictions, records) if p == r.majority_level) / n
    asel = sum(1 for p, r in zip(predictions, records) if p in r.all_levels) / n
    levels = range(1, max(max(r.majority_level for r in records), max(predictions)) + 1)
    per = {}
    for lvl in levels:
        tp = sum(
            1
            for p, r in zip(predictions, records)
            if p == lvl and r.majority_level == lvl
        )
        fp = sum(
            1
            for p, r in zip(predictions, records)
            if p == lvl and r.majority_level != lvl
        )
        fn = sum(
            1
            for p, r in zip(predictions, records)
            if p != lvl and r.majority_level == lvl
        )
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per[lvl] = (prec, rec, f1, tp + fn)
    return mv, asel, per


@pytest.fixture
def toy_set():
    rng = np.random.default_rng(42)
    specs = []
    for _ in range(50):
        m = int(rng.integers(1, 5))
        majority = int(rng.integers(1, m + 1))
        extra = {int(rng.integers(1, m + 1))} if rng.random() < 0.4 else set()
        specs.append((majority, {majority} | extra))
    records = toy_records(specs)
    preds = [int(rng.integers(1, len(r.candidates) + 1)) for r in records]
    return preds, records


class TestEvaluate:
    def test_matches_brute_force_oracle(self, toy_set):
        preds, records = toy_set
        result = evaluate(preds, records)
        mv, asel, per = oracle_metrics(preds, records)
        assert result.majority_vote_acc == pytest.approx(mv, abs=1e-12)
        assert result.all_selections_acc == pytest.approx(asel, abs=1e-12)
        for lvl, (prec, rec, f1, support) in per.items():
            s = result.per_level[lvl]
            assert s.precision == pytest.approx(prec, abs=1e-12)
            assert s.recall == pytest.approx(rec, abs=1e-12)
            assert s.f1 == pytest.approx(f1, abs=1e-12)
            assert s.support == support

    def test_support_weighted_recall_equals_majority_accuracy(self, toy_set):
        preds, records = toy_set
        result = evaluate(preds, records)
        assert result.weighted_support[1] == pytest.approx(
            result.majority_vote_acc, abs=1e-12
        )

    def test_simple_counts(self):
        records = toy_records([(1, {1}), (1, {1}), (2, {2}), (2, {2})])
        result = evaluate([1, 1, 2, 1], records)
        assert result.majority_vote_acc == 0.75

    def test_all_selections_counts_any_annotator_choice(self):
        records = toy_records([(3, {1, 3})])
        result = evaluate([1], records)
        assert result.majority_vote_acc == 0.0
        assert result.all_selections_acc == 1.0

    def test_perfect_predictions(self, toy_set):
        _, records = toy_set
        preds = [r.majority_level for r in records]
        result = evaluate(preds, records)
        assert result.majority_vote_acc == 1.0
        assert result.all_selections_acc == 1.0
        diag = np.diag(result.confusion_counts)
        supports = [result.per_level[lvl].support for lvl in result.levels]
        assert diag.tolist() == supports

    def test_length_mismatch(self, toy_set):
        _, records = toy_set
        with pytest.raises(ValueError):
            evaluate([1], records)

    def test_permutation_invariance(self, toy_set):
        preds, records = toy_set
        result = evaluate(preds, records)
        order = np.random.default_rng(0).permutation(len(records))
        shuffled = evaluate([preds[i] for i in order], [records[i] for i in order])
        assert shuffled.majority_vote_acc == result.majority_vote_acc
        assert shuffled.weighted_support == result.weighted_support
        assert np.array_equal(shuffled.confusion_counts, result.confusion_counts)

    @given(st.integers(0, 2**32 - 1))
    def test_all_selections_dominates_majority_vote(self, seed):
        rng = np.random.default_rng(seed)
        specs = []
        for _ in range(20):
            m = int(rng.integers(1, 5))
            majority = int(rng.integers(1, m + 1))
            specs.append((majority, {majority, int(rng.integers(1, m + 1))}))
        records = toy_records(specs)
        preds = [int(rng.integers(1, len(r.candidates) + 1)) for r in records]
        result = evaluate(preds, records)
        assert result.all_selections_acc >= result.majority_vote_acc


class TestWeightedScores:
    def test_literal_vs_support_modes(self):
        per_level = {1: (0.8, 4), 2: (0.5, 2)}
        assert weighted_scores(per_level, "literal") == pytest.approx(0.45)
        assert weighted_scores(per_level, "support") == pytest.approx(0.70)

    def test_single_level(self):
        assert weighted_scores({1: (0.9, 3)}, "literal") == pytest.approx(0.3)
        assert weighted_scores({1: (0.9, 3)}, "support") == pytest.approx(0.9)

    def test_support_mode_is_convex(self):
        per_level = {1: (0.6, 5), 2: (0.6, 1), 3: (0.6, 7)}
        assert weighted_scores(per_level, "support") == pytest.approx(0.6)

    def test_zero_support_excluded(self):
        per_level = {1: (0.8, 4), 2: (0.5, 0)}
        assert weighted_scores(per_level, "literal") == pytest.approx(0.2)
        assert weighted_scores(per_level, "support") == pytest.approx(0.8)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            weighted_scores({1: (0.5, 1)}, "harmonic")


class TestConfusionMatrix:
    def test_perfect_is_identity_pattern(self):
        counts, rates = confusion_matrix([1, 2, 3], [1, 2, 3], 3)
        assert np.array_equal(rates, np.eye(3))

    def test_all_predicted_level_one(self):
        counts, rates = confusion_matrix([1, 1, 1], [1, 2, 3], 3)
        assert rates[0, 0] == 1.0
        assert np.all(rates[:, 1:] == 0.0)
        assert np.all(counts.sum(axis=1) == 1)

    def test_half_rate(self):
        counts, rates = confusion_matrix([2, 1], [2, 2], 2)
        assert rates[1, 1] == 0.5

    def test_zero_rows_stay_zero(self):
        counts, rates = confusion_matrix([1], [1], 3)
        assert np.all(rates[1] == 0.0)
        assert np.all(rates[2] == 0.0)

    def test_row_sums_equal_support(self, toy_set):
        preds, records = toy_set
        result = evaluate(preds, records)
        for lvl in result.levels:
            assert result.confusion_counts[lvl - 1].sum() == result.per_level[lvl].support

    def test_out_of_range_level(self):
        with pytest.raises(ValueError):
            confusion_matrix([4], [1], 3)


class TestReports:
    def test_text_report_contains_metrics(self, toy_set):
        preds, records = toy_set
        text = format_report(evaluate(preds, records), "Toy")
        assert "majority vote acc" in text
        assert "wavg" in text and "wlit" in text

    def test_csv_shape(self, toy_set):
        preds, records = toy_set
        result = evaluate(preds, records)
        csv = confusion_csv(result)
        lines = csv.strip().split("\n")
        assert len(lines) == len(result.levels) + 1
