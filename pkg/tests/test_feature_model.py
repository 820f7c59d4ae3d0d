import numpy as np
import pytest

from genlevel.feature_model import (
    DecisionTreeLevelClassifier,
    FoldingError,
    GradientBoostingLevelClassifier,
    MostFrequentLevelBaseline,
    RandomForestLevelClassifier,
    SoftmaxRegression,
    StackingLevelClassifier,
    Vocabulary,
    baseline_predict,
    design_matrix,
    load_model,
    model_from_dict,
    predict_level,
    restrict_to_candidates,
    save_model,
    stratified_folds,
    vectorize,
)
from genlevel.trees import entropy_impurity, gini_impurity
from genlevel.corpus import SemanticTypeRegistry, record_from_obj
from genlevel.synthetic import make_benchmark_records

from conftest import record_obj

XOR_X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
XOR_Y = np.array([1, 2, 2, 1])


def make_records(specs):
    registry = SemanticTypeRegistry()
    return [record_from_obj(record_obj(**spec), registry) for spec in specs]


class TestVectorize:
    def test_span_tokens_counted(self, datetime_record):
        vocab = Vocabulary({"august": 0, "22": 1, "1935": 2})
        vec = vectorize(datetime_record, vocab)
        assert vec[:3].tolist() == [1.0, 1.0, 1.0]
        assert vec[3] == datetime_record.semantic_type.code
        assert vec[4] == 3  # number of generalizations

    def test_out_of_vocab_tokens_dropped(self, datetime_record):
        vocab = Vocabulary({"nothing": 0})
        vec = vectorize(datetime_record, vocab)
        assert vec[0] == 0.0
        assert vec[1] == datetime_record.semantic_type.code
        assert vec[2] == 3

    def test_deterministic(self, datetime_record):
        vocab = Vocabulary.build([datetime_record])
        assert np.array_equal(
            vectorize(datetime_record, vocab), vectorize(datetime_record, vocab)
        )

    def test_vocabulary_built_from_training_only(self):
        records = make_records(
            [
                dict(rid="a", span_text="Alice", span=(0, 5)),
                dict(
                    rid="b",
                    text="Bobby went home.",
                    span=(0, 5),
                    span_text="Bobby",
                ),
            ]
        )
        vocab = Vocabulary.build(records)
        assert set(vocab.index) == {"alice", "bobby"}
        assert sorted(vocab.index.values()) == [0, 1]


class TestImpurity:
    def test_gini_balanced_pair(self):
        assert gini_impurity(np.array([0, 0, 1, 1]), 2) == pytest.approx(0.5)

    def test_entropy_balanced_pair_is_one_bit(self):
        assert entropy_impurity(np.array([0, 0, 1, 1]), 2) == pytest.approx(1.0)

    def test_pure_node_zero(self):
        assert gini_impurity(np.array([1, 1, 1]), 2) == 0.0
        assert entropy_impurity(np.array([1, 1, 1]), 2) == 0.0


class TestDecisionTree:
    def test_xor_depth1_at_chance(self):
        model = DecisionTreeLevelClassifier(max_depth=1, n_levels=2).fit(XOR_X, XOR_Y)
        acc = np.mean(model.predict(XOR_X) == XOR_Y)
        assert acc <= 0.5

    @pytest.mark.parametrize("criterion", ["gini", "entropy"])
    def test_xor_depth2_perfect(self, criterion):
        model = DecisionTreeLevelClassifier(
            criterion=criterion, max_depth=2, n_levels=2
        ).fit(XOR_X, XOR_Y)
        assert np.array_equal(model.predict(XOR_X), XOR_Y)

    def test_pure_labels_single_leaf(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([2, 2, 2])
        model = DecisionTreeLevelClassifier(max_depth=3, n_levels=2).fit(X, y)
        assert model.root_.is_leaf
        assert np.array_equal(model.predict(X), y)

    def test_leaf_probabilities_sum_to_one(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 3))
        y = rng.integers(1, 4, size=40)
        model = DecisionTreeLevelClassifier(max_depth=4, n_levels=3).fit(X, y)
        probs = model.predict_proba(X)
        assert probs.sum(axis=1) == pytest.approx(np.ones(40))

    def test_empty_data_rejected(self):
        with pytest.raises(ValueError):
            DecisionTreeLevelClassifier().fit(np.zeros((0, 2)), [])

    def test_invalid_criterion(self):
        with pytest.raises(ValueError, match="criterion"):
            DecisionTreeLevelClassifier(criterion="chi2").fit(XOR_X, XOR_Y)

    def test_serialization_round_trip(self):
        model = DecisionTreeLevelClassifier(max_depth=2, n_levels=2).fit(XOR_X, XOR_Y)
        clone = model_from_dict(model.to_dict())
        assert np.array_equal(clone.predict(XOR_X), model.predict(XOR_X))


class TestRandomForest:
    def test_single_tree_no_bootstrap_equals_tree(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(60, 4))
        y = rng.integers(1, 4, size=60)
        forest = RandomForestLevelClassifier(
            n_trees=1, bootstrap=False, max_depth=4, n_levels=3
        ).fit(X, y)
        tree = DecisionTreeLevelClassifier(max_depth=4, n_levels=3).fit(X, y)
        assert np.array_equal(forest.predict_proba(X), tree.predict_proba(X))
        assert np.array_equal(forest.predict(X), tree.predict(X))

    def test_seeded_determinism(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(50, 3))
        y = rng.integers(1, 3, size=50)
        a = RandomForestLevelClassifier(n_trees=5, seed=3, n_levels=2).fit(X, y)
        b = RandomForestLevelClassifier(n_trees=5, seed=3, n_levels=2).fit(X, y)
        assert np.array_equal(a.predict_proba(X), b.predict_proba(X))


class TestGradientBoosting:
    def test_lr_zero_predicts_prior(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(30, 2))
        y = np.array([1] * 20 + [2] * 10)
        model = GradientBoostingLevelClassifier(
            n_rounds=5, learning_rate=0.0, n_levels=2
        ).fit(X, y)
        probs = model.predict_proba(X)
        assert probs[:, 0] == pytest.approx(np.full(30, 2 / 3))
        assert np.all(model.predict(X) == 1)

    def test_learns_simple_split(self):
        X = np.linspace(0, 1, 40)[:, None]
        y = np.where(X[:, 0] < 0.5, 1, 2)
        model = GradientBoostingLevelClassifier(n_rounds=20, n_levels=2).fit(X, y)
        assert np.mean(model.predict(X) == y) == 1.0

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(25, 2))
        y = rng.integers(1, 3, size=25)
        model = GradientBoostingLevelClassifier(n_rounds=3, n_levels=2).fit(X, y)
        clone = model_from_dict(model.to_dict())
        assert np.allclose(clone.predict_proba(X), model.predict_proba(X))


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(80, 3))
    y = np.where(X[:, 0] + 0.3 * X[:, 1] > 0, 2, 1)
    return X, y


class TestStacking:
    def test_at_least_as_good_as_perfect_layer1(self, data):
        X, y = data
        perfect = DecisionTreeLevelClassifier(max_depth=6, n_levels=2)
        stack = StackingLevelClassifier(layer1=[perfect], n_folds=4, n_levels=2).fit(X, y)
        solo = DecisionTreeLevelClassifier(max_depth=6, n_levels=2).fit(X, y)
        assert np.mean(stack.predict(X) == y) >= np.mean(solo.predict(X) == y) - 1e-12

    def test_duplicated_layer1_matches_single(self, data):
        X, y = data
        proto = DecisionTreeLevelClassifier(max_depth=4, n_levels=2)
        one = StackingLevelClassifier(layer1=[proto], n_folds=4, n_levels=2, seed=1).fit(X, y)
        two = StackingLevelClassifier(
            layer1=[proto, proto], n_folds=4, n_levels=2, seed=1
        ).fit(X, y)
        assert np.array_equal(one.predict(X), two.predict(X))

    def test_seeded_determinism(self, data):
        X, y = data
        a = StackingLevelClassifier(n_folds=3, n_levels=2, seed=7).fit(X, y)
        b = StackingLevelClassifier(n_folds=3, n_levels=2, seed=7).fit(X, y)
        assert np.array_equal(a.predict_proba(X), b.predict_proba(X))

    def test_out_of_fold_meta_features_no_leakage(self, data):
        # perturbing one training label may only change the meta-features of
        # rows in OTHER folds (models that saw the label), never its own row's
        # source-fold models' view of itself
        X, y = data
        y = np.asarray(y).copy()
        folds = stratified_folds(y, 4, 0)
        stack = StackingLevelClassifier(
            layer1=[DecisionTreeLevelClassifier(max_depth=1, n_levels=2)],
            n_folds=4,
            n_levels=2,
            seed=0,
        ).fit(X, y, folds=folds)
        victim = folds[0][0]
        y2 = y.copy()
        y2[victim] = 3 - y2[victim]
        stack2 = StackingLevelClassifier(
            layer1=[DecisionTreeLevelClassifier(max_depth=1, n_levels=2)],
            n_folds=4,
            n_levels=2,
            seed=0,
        ).fit(X, y2, folds=folds)
        changed = np.any(
            stack.oof_meta_features_ != stack2.oof_meta_features_, axis=1
        )
        # the victim's own meta-feature row comes from a model that never saw
        # its label, so it must be unchanged
        assert not changed[victim]
        # rows in other folds are trained on the perturbed label
        assert changed[np.concatenate(folds[1:])].any()

    def test_missing_class_in_folds_errors(self):
        X = np.zeros((6, 1))
        y = np.array([1, 1, 1, 1, 1, 2])  # class 2 has one sample, 3 folds
        with pytest.raises(FoldingError):
            stratified_folds(y, 3, seed=0)

    def test_serialization_round_trip(self, data, tmp_path):
        X, y = data
        stack = StackingLevelClassifier(n_folds=3, n_levels=2, seed=2).fit(X, y)
        vocab = Vocabulary({"a": 0})
        path = tmp_path / "stack.json"
        save_model(path, stack, vocab)
        loaded, vocab2 = load_model(path)
        assert np.allclose(loaded.predict_proba(X), stack.predict_proba(X))
        assert vocab2.index == vocab.index


class TestPredictLevel:
    def test_renormalizes_away_high_levels(self):
        probs = np.array([0.2, 0.5, 0.3])
        assert restrict_to_candidates(probs, 2) == pytest.approx([0.2 / 0.7, 0.5 / 0.7])

    def test_argmax_after_restriction(self, datetime_record):
        class Fixed:
            def predict_proba(self, X):
                return np.array([[0.2, 0.5, 0.3]])

        vocab = Vocabulary({})
        # record has 3 candidates: full distribution applies
        assert predict_level(Fixed(), datetime_record, vocab) == 2

    def test_single_candidate_always_level_one(self):
        (rec,) = make_records(
            [dict(rid="s", candidates=("x",), majority_level=1, all_levels=(1,))]
        )

        class Fixed:
            def predict_proba(self, X):
                return np.array([[0.0, 1.0]])

        assert predict_level(Fixed(), rec, Vocabulary({})) == 1

    def test_uniform_breaks_tie_low(self, datetime_record):
        class Uniform:
            def predict_proba(self, X):
                return np.array([[1 / 3, 1 / 3, 1 / 3]])

        assert predict_level(Uniform(), datetime_record, Vocabulary({})) == 1

    def test_never_exceeds_candidate_count(self):
        records = make_benchmark_records(50, seed=20)
        vocab = Vocabulary.build(records)
        X = design_matrix(records, vocab)
        y = [r.majority_level for r in records]
        model = RandomForestLevelClassifier(n_trees=5, n_levels=3, seed=0).fit(X, y)
        for rec in records:
            assert predict_level(model, rec, vocab) <= len(rec.candidates)


class TestBaselines:
    def test_most_frequent_level(self):
        train = make_records(
            [
                dict(rid="a", majority_level=1, all_levels=(1,)),
                dict(rid="b", majority_level=1, all_levels=(1,)),
                dict(rid="c", majority_level=2, all_levels=(2,)),
            ]
        )
        preds = baseline_predict(train, "most_frequent_level", train)
        assert preds == [1, 1, 1]

    def test_first_candidate(self):
        records = make_records([dict(rid="a"), dict(rid="b")])
        assert baseline_predict(records, "first_candidate") == [1, 1]

    def test_constant_clipped_to_candidate_count(self):
        train = make_records(
            [
                dict(
                    rid=f"t{i}",
                    candidates=("a", "b", "c"),
                    majority_level=3,
                    all_levels=(3,),
                )
                for i in range(3)
            ]
        )
        test = make_records(
            [dict(rid="x", candidates=("a", "b"), majority_level=1, all_levels=(1,))]
        )
        assert baseline_predict(test, "most_frequent_level", train) == [2]

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            baseline_predict([], "magic")

    def test_baseline_estimator_round_trip(self):
        X = np.zeros((4, 1))
        y = [2, 2, 1, 2]
        model = MostFrequentLevelBaseline().fit(X, y)
        clone = model_from_dict(model.to_dict())
        assert np.array_equal(clone.predict(X), model.predict(X))


class TestSoftmaxRegression:
    def test_learns_linear_separation(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(100, 2))
        y = np.where(X[:, 0] > 0, 2, 1)
        model = SoftmaxRegression(n_levels=2).fit(X, y)
        assert np.mean(model.predict(X) == y) >= 0.95

    def test_get_params_sklearn_contract(self):
        model = SoftmaxRegression(n_levels=3, learning_rate=0.1)
        params = model.get_params()
        assert params["n_levels"] == 3
        assert params["learning_rate"] == 0.1
