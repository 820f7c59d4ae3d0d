"""Feature-based level prediction.

The structured input per record is (span word counts, semantic-type code,
number of generalizations). Models are sklearn-style estimators over a class
space of levels 1..n_levels; per-record candidate counts are respected at
prediction time by renormalizing probability mass away from levels above m.
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .corpus import PiiRecord
from .encoder import tokenize
from .trees import (
    TreeNode,
    grow_classification_tree,
    grow_regression_tree,
    tree_predict,
)


class Vocabulary:
    """Token -> column index map built from the training split only."""

    def __init__(self, index: dict[str, int], min_count: int = 1):
        self.index = index
        self.min_count = min_count

    @property
    def size(self) -> int:
        return len(self.index)

    @classmethod
    def build(cls, records: Sequence[PiiRecord], min_count: int = 1) -> "Vocabulary":
        counts: Counter[str] = Counter()
        for rec in records:
            counts.update(tokenize(rec.span_text))
        tokens = sorted(t for t, c in counts.items() if c >= min_count)
        return cls({t: i for i, t in enumerate(tokens)}, min_count)

    def to_dict(self) -> dict:
        return {"min_count": self.min_count, "index": self.index}

    @classmethod
    def from_dict(cls, obj: dict) -> "Vocabulary":
        return cls(dict(obj["index"]), obj["min_count"])


def vectorize(record: PiiRecord, vocab: Vocabulary) -> np.ndarray:
    """Dense feature row: token counts, then semantic-type code and #gen.
    Unseen tokens are dropped."""
    vec = np.zeros(vocab.size + 2, dtype=np.float64)
    for token in tokenize(record.span_text):
        col = vocab.index.get(token)
        if col is not None:
            vec[col] += 1.0
    vec[vocab.size] = record.semantic_type.code
    vec[vocab.size + 1] = len(record.candidates)
    return vec


def design_matrix(records: Sequence[PiiRecord], vocab: Vocabulary) -> np.ndarray:
    return np.stack([vectorize(r, vocab) for r in records])


def _check_X_y(X: np.ndarray, y: np.ndarray | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-dimensional, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if X.shape[0] == 0:
        raise ValueError("empty data")
    if y is not None and len(y) != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)} entries")
    return X


def _levels_to_classes(y: Sequence[int], n_levels: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if np.any(y < 1) or np.any(y > n_levels):
        raise ValueError(f"levels must lie in 1..{n_levels}")
    return y - 1


class DecisionTreeLevelClassifier(BaseEstimator, ClassifierMixin):
    """Single greedy tree split on entropy or the Gini coefficient."""

    def __init__(self, criterion: str = "gini", max_depth: int = 8, n_levels: int | None = None):
        self.criterion = criterion
        self.max_depth = max_depth
        self.n_levels = n_levels

    def fit(self, X, y):
        X = _check_X_y(X, y)
        self.n_levels_ = self.n_levels or int(np.max(y))
        classes = _levels_to_classes(y, self.n_levels_)
        self.root_ = grow_classification_tree(
            X, classes, self.n_levels_, self.criterion, self.max_depth
        )
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = _check_X_y(X)
        return tree_predict(self.root_, X)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1) + 1

    def to_dict(self) -> dict:
        return {
            "kind": "tree",
            "criterion": self.criterion,
            "max_depth": self.max_depth,
            "n_levels": self.n_levels_,
            "root": self.root_.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DecisionTreeLevelClassifier":
        model = cls(obj["criterion"], obj["max_depth"], obj["n_levels"])
        model.n_levels_ = obj["n_levels"]
        model.root_ = TreeNode.from_dict(obj["root"])
        return model


class RandomForestLevelClassifier(BaseEstimator, ClassifierMixin):
    """Bagged trees; probabilities are the average of per-tree leaf
    distributions. With one tree and bootstrap off this is exactly the
    single tree."""

    def __init__(
        self,
        n_trees: int = 50,
        criterion: str = "gini",
        max_depth: int = 8,
        bootstrap: bool = True,
        n_levels: int | None = None,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.criterion = criterion
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.n_levels = n_levels
        self.seed = seed

    def fit(self, X, y):
        X = _check_X_y(X, y)
        self.n_levels_ = self.n_levels or int(np.max(y))
        classes = _levels_to_classes(y, self.n_levels_)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xF0265]))
        n = X.shape[0]
        self.roots_ = []
        self.bootstrap_seeds_ = []
        for t in range(self.n_trees):
            if self.bootstrap:
                tree_seed = int(rng.integers(2**31))
                idx = np.random.default_rng(tree_seed).integers(0, n, size=n)
            else:
                tree_seed = None
                idx = np.arange(n)
            self.bootstrap_seeds_.append(tree_seed)
            self.roots_.append(
                grow_classification_tree(
                    X[idx], classes[idx], self.n_levels_, self.criterion, self.max_depth
                )
            )
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = _check_X_y(X)
        return np.mean([tree_predict(r, X) for r in self.roots_], axis=0)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1) + 1

    def to_dict(self) -> dict:
        return {
            "kind": "forest",
            "n_trees": self.n_trees,
            "criterion": self.criterion,
            "max_depth": self.max_depth,
            "bootstrap": self.bootstrap,
            "n_levels": self.n_levels_,
            "seed": self.seed,
            "bootstrap_seeds": self.bootstrap_seeds_,
            "roots": [r.to_dict() for r in self.roots_],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RandomForestLevelClassifier":
        model = cls(
            obj["n_trees"], obj["criterion"], obj["max_depth"], obj["bootstrap"],
            obj["n_levels"], obj["seed"],
        )
        model.n_levels_ = obj["n_levels"]
        model.bootstrap_seeds_ = obj["bootstrap_seeds"]
        model.roots_ = [TreeNode.from_dict(r) for r in obj["roots"]]
        return model


class GradientBoostingLevelClassifier(BaseEstimator, ClassifierMixin):
    """Multinomial gradient boosting: per-class regression trees fit to the
    softmax residual, added to per-class log-odds with a learning rate.
    At learning rate 0 the prediction is the training prior."""

    def __init__(
        self,
        n_rounds: int = 30,
        learning_rate: float = 0.1,
        max_depth: int = 3,
        n_levels: int | None = None,
    ):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.n_levels = n_levels

    def fit(self, X, y):
        X = _check_X_y(X, y)
        self.n_levels_ = self.n_levels or int(np.max(y))
        classes = _levels_to_classes(y, self.n_levels_)
        n, k = X.shape[0], self.n_levels_
        prior = np.bincount(classes, minlength=k) / n
        self.base_score_ = np.log(np.clip(prior, 1e-12, None))
        onehot = np.eye(k)[classes]
        scores = np.tile(self.base_score_, (n, 1))
        self.rounds_: list[list[TreeNode]] = []
        for _ in range(self.n_rounds):
            probs = _softmax_rows(scores)
            residual = onehot - probs
            round_trees = []
            for c in range(k):
                tree = grow_regression_tree(X, residual[:, c], self.max_depth)
                round_trees.append(tree)
                scores[:, c] += self.learning_rate * tree_predict(tree, X)
            self.rounds_.append(round_trees)
        return self

    def _raw_scores(self, X: np.ndarray) -> np.ndarray:
        scores = np.tile(self.base_score_, (X.shape[0], 1))
        for round_trees in self.rounds_:
            for c, tree in enumerate(round_trees):
                scores[:, c] += self.learning_rate * tree_predict(tree, X)
        return scores

    def predict_proba(self, X) -> np.ndarray:
        X = _check_X_y(X)
        return _softmax_rows(self._raw_scores(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1) + 1

    def to_dict(self) -> dict:
        return {
            "kind": "boosted",
            "n_rounds": self.n_rounds,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "n_levels": self.n_levels_,
            "base_score": self.base_score_.tolist(),
            "rounds": [[t.to_dict() for t in rd] for rd in self.rounds_],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GradientBoostingLevelClassifier":
        model = cls(obj["n_rounds"], obj["learning_rate"], obj["max_depth"], obj["n_levels"])
        model.n_levels_ = obj["n_levels"]
        model.base_score_ = np.array(obj["base_score"], dtype=np.float64)
        model.rounds_ = [[TreeNode.from_dict(t) for t in rd] for rd in obj["rounds"]]
        return model


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class SoftmaxRegression(BaseEstimator, ClassifierMixin):
    """Multinomial logistic regression by full-batch gradient descent;
    deterministic (zero init, fixed iteration count)."""

    def __init__(
        self,
        n_levels: int | None = None,
        learning_rate: float = 0.5,
        n_iter: int = 500,
        l2: float = 1e-4,
    ):
        self.n_levels = n_levels
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.l2 = l2

    def fit(self, X, y):
        X = _check_X_y(X, y)
        self.n_levels_ = self.n_levels or int(np.max(y))
        classes = _levels_to_classes(y, self.n_levels_)
        n, d = X.shape
        k = self.n_levels_
        onehot = np.eye(k)[classes]
        self.weights_ = np.zeros((d, k))
        self.bias_ = np.zeros(k)
        for _ in range(self.n_iter):
            probs = _softmax_rows(X @ self.weights_ + self.bias_)
            err = (probs - onehot) / n
            self.weights_ -= self.learning_rate * (X.T @ err + self.l2 * self.weights_)
            self.bias_ -= self.learning_rate * err.sum(axis=0)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = _check_X_y(X)
        return _softmax_rows(X @ self.weights_ + self.bias_)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1) + 1

    def to_dict(self) -> dict:
        return {
            "kind": "softmax",
            "n_levels": self.n_levels_,
            "learning_rate": self.learning_rate,
            "n_iter": self.n_iter,
            "l2": self.l2,
            "weights": self.weights_.tolist(),
            "bias": self.bias_.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SoftmaxRegression":
        model = cls(obj["n_levels"], obj["learning_rate"], obj["n_iter"], obj["l2"])
        model.n_levels_ = obj["n_levels"]
        model.weights_ = np.array(obj["weights"], dtype=np.float64)
        model.bias_ = np.array(obj["bias"], dtype=np.float64)
        return model


class FoldingError(ValueError):
    """Stratified folding could not place every class in every training fold."""


def stratified_folds(
    y: np.ndarray, n_folds: int, seed: int, max_retries: int = 5
) -> list[np.ndarray]:
    """Seeded stratified fold assignment; retries with fresh seeds until
    every class appears in every training portion, then raises."""
    y = np.asarray(y)
    for attempt in range(max_retries):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt, 0xF01D]))
        assignment = np.empty(len(y), dtype=int)
        offset = 0
        for cls in np.unique(y):
            idx = np.flatnonzero(y == cls)
            rng.shuffle(idx)
            assignment[idx] = (np.arange(len(idx)) + offset) % n_folds
            offset += len(idx)
        folds = [np.flatnonzero(assignment == f) for f in range(n_folds)]
        ok = all(
            set(np.unique(y)) <= set(np.unique(y[np.concatenate([folds[g] for g in range(n_folds) if g != f])]))
            for f in range(n_folds)
        )
        if ok:
            return folds
    raise FoldingError(
        f"could not stratify {n_folds} folds with every class in every training portion"
    )


class StackingLevelClassifier(BaseEstimator, ClassifierMixin):
    """Two-layer stack: layer-1 estimators produce out-of-fold class
    probabilities, a multinomial logistic meta-classifier consumes them.
    Layer-1 models are refit on the full data for inference."""

    def __init__(
        self,
        layer1: list[BaseEstimator] | None = None,
        n_folds: int = 5,
        n_levels: int | None = None,
        seed: int = 0,
    ):
        self.layer1 = layer1
        self.n_folds = n_folds
        self.n_levels = n_levels
        self.seed = seed

    def _default_layer1(self, n_levels: int) -> list[BaseEstimator]:
        return [
            RandomForestLevelClassifier(n_trees=30, max_depth=8, n_levels=n_levels, seed=self.seed),
            GradientBoostingLevelClassifier(n_rounds=20, max_depth=3, n_levels=n_levels),
            DecisionTreeLevelClassifier(criterion="entropy", max_depth=8, n_levels=n_levels),
        ]

    def fit(self, X, y, folds: list[np.ndarray] | None = None):
        from sklearn.base import clone

        X = _check_X_y(X, y)
        y = np.asarray(y, dtype=np.int64)
        self.n_levels_ = self.n_levels or int(np.max(y))
        base = self.layer1 if self.layer1 is not None else self._default_layer1(self.n_levels_)
        if folds is None:
            folds = stratified_folds(y, self.n_folds, self.seed)
        self.folds_ = folds

        n = X.shape[0]
        meta_X = np.zeros((n, len(base) * self.n_levels_))
        for f, held in enumerate(folds):
            train_idx = np.concatenate([folds[g] for g in range(self.n_folds) if g != f])
            for j, proto in enumerate(base):
                model = clone(proto).fit(X[train_idx], y[train_idx])
                cols = slice(j * self.n_levels_, (j + 1) * self.n_levels_)
                meta_X[held, cols] = model.predict_proba(X[held])

        self.meta_ = SoftmaxRegression(n_levels=self.n_levels_).fit(meta_X, y)
        self.fitted_layer1_ = [clone(proto).fit(X, y) for proto in base]
        self.oof_meta_features_ = meta_X
        return self

    def _meta_features(self, X: np.ndarray) -> np.ndarray:
        return np.hstack([m.predict_proba(X) for m in self.fitted_layer1_])

    def predict_proba(self, X) -> np.ndarray:
        X = _check_X_y(X)
        return self.meta_.predict_proba(self._meta_features(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1) + 1

    def to_dict(self) -> dict:
        return {
            "kind": "stacking",
            "n_folds": self.n_folds,
            "n_levels": self.n_levels_,
            "seed": self.seed,
            "meta": self.meta_.to_dict(),
            "layer1": [m.to_dict() for m in self.fitted_layer1_],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StackingLevelClassifier":
        model = cls(None, obj["n_folds"], obj["n_levels"], obj["seed"])
        model.n_levels_ = obj["n_levels"]
        model.meta_ = SoftmaxRegression.from_dict(obj["meta"])
        model.fitted_layer1_ = [model_from_dict(m) for m in obj["layer1"]]
        return model


class MostFrequentLevelBaseline(BaseEstimator, ClassifierMixin):
    """Predicts the most frequent training level everywhere (lowest wins ties)."""

    def fit(self, X, y):
        y = np.asarray(y, dtype=np.int64)
        levels, counts = np.unique(y, return_counts=True)
        self.level_ = int(levels[np.argmax(counts)])
        self.n_levels_ = int(np.max(y))
        return self

    def predict_proba(self, X) -> np.ndarray:
        probs = np.zeros((np.asarray(X).shape[0], self.n_levels_))
        probs[:, self.level_ - 1] = 1.0
        return probs

    def predict(self, X) -> np.ndarray:
        return np.full(np.asarray(X).shape[0], self.level_, dtype=np.int64)

    def to_dict(self) -> dict:
        return {"kind": "most_frequent", "level": self.level_, "n_levels": self.n_levels_}

    @classmethod
    def from_dict(cls, obj: dict) -> "MostFrequentLevelBaseline":
        model = cls()
        model.level_ = obj["level"]
        model.n_levels_ = obj["n_levels"]
        return model


_MODEL_KINDS = {
    "tree": DecisionTreeLevelClassifier,
    "forest": RandomForestLevelClassifier,
    "boosted": GradientBoostingLevelClassifier,
    "softmax": SoftmaxRegression,
    "stacking": StackingLevelClassifier,
    "most_frequent": MostFrequentLevelBaseline,
}


def model_from_dict(obj: dict) -> BaseEstimator:
    kind = obj.get("kind")
    if kind not in _MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    return _MODEL_KINDS[kind].from_dict(obj)


def save_model(path: str | Path, model: BaseEstimator, vocab: Vocabulary) -> None:
    obj = {"model": model.to_dict(), "vocabulary": vocab.to_dict()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> tuple[BaseEstimator, Vocabulary]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return model_from_dict(obj["model"]), Vocabulary.from_dict(obj["vocabulary"])


def restrict_to_candidates(probs: np.ndarray, num_candidates: int) -> np.ndarray:
    """Zero out levels above the record's candidate count and renormalize.
    If no mass remains the distribution over allowed levels is uniform."""
    allowed = probs[:num_candidates].copy()
    total = allowed.sum()
    if total > 0:
        return allowed / total
    return np.full(num_candidates, 1.0 / num_candidates)


def predict_level(model: BaseEstimator, record: PiiRecord, vocab: Vocabulary) -> int:
    """Argmax over class probabilities restricted to levels 1..m; ties break
    to the lowest level."""
    row = vectorize(record, vocab)[None, :]
    probs = model.predict_proba(row)[0]
    m = min(len(record.candidates), probs.shape[0])
    restricted = restrict_to_candidates(probs, m)
    return int(np.argmax(restricted)) + 1


def predict_levels(
    model: BaseEstimator, records: Sequence[PiiRecord], vocab: Vocabulary
) -> list[int]:
    return [predict_level(model, r, vocab) for r in records]


def baseline_predict(
    records: Sequence[PiiRecord],
    strategy: str,
    train_records: Sequence[PiiRecord] | None = None,
) -> list[int]:
    """Constant-strategy predictions, clipped to each record's candidate count.

    ``most_frequent_level`` uses the majority level of the training split;
    ``first_candidate`` always proposes level 1.
    """
    if strategy == "first_candidate":
        return [1 for _ in records]
    if strategy == "most_frequent_level":
        if not train_records:
            raise ValueError("most_frequent_level requires a training split")
        counts = Counter(r.majority_level for r in train_records)
        top = min(lvl for lvl, c in counts.items() if c == max(counts.values()))
        return [min(top, len(r.candidates)) for r in records]
    raise ValueError(f"unknown baseline strategy {strategy!r}")
