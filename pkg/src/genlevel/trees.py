"""Depth-limited decision trees built from scratch.

Splits are greedy: every (feature, midpoint-threshold) pair is scored and the
best impurity decrease wins, with deterministic tie-breaking to the lowest
feature index, then the lowest threshold. Impure nodes are split while depth
remains even when the best decrease is zero, so parity problems (XOR) are
solvable at sufficient depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def gini_impurity(labels: np.ndarray, n_classes: int) -> float:
    """Gini coefficient of a label vector (classes are 0-based ints)."""
    if labels.size == 0:
        return 0.0
    probs = np.bincount(labels, minlength=n_classes) / labels.size
    return float(1.0 - np.sum(probs * probs))


def entropy_impurity(labels: np.ndarray, n_classes: int) -> float:
    """Information entropy in bits."""
    if labels.size == 0:
        return 0.0
    probs = np.bincount(labels, minlength=n_classes) / labels.size
    probs = probs[probs > 0]
    return float(-np.sum(probs * np.log2(probs)))


_CRITERIA: dict[str, Callable[[np.ndarray, int], float]] = {
    "gini": gini_impurity,
    "entropy": entropy_impurity,
}


@dataclass
class TreeNode:
    """Internal node (feature/threshold set, children present) or leaf
    (value set: class-probability vector or regression mean)."""

    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: np.ndarray | float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            value = (
                self.value.tolist() if isinstance(self.value, np.ndarray) else self.value
            )
            return {"leaf": value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TreeNode":
        if "leaf" in obj:
            value = obj["leaf"]
            if isinstance(value, list):
                value = np.array(value, dtype=np.float64)
            return cls(value=value)
        return cls(
            feature=obj["feature"],
            threshold=obj["threshold"],
            left=cls.from_dict(obj["left"]),
            right=cls.from_dict(obj["right"]),
        )


def _candidate_thresholds(column: np.ndarray) -> np.ndarray:
    values = np.unique(column)
    if values.size < 2:
        return np.empty(0)
    return (values[:-1] + values[1:]) / 2.0


def _best_split(
    X: np.ndarray,
    score_split: Callable[[np.ndarray, np.ndarray], float],
    parent_score: float,
) -> tuple[int, float, float] | None:
    """Return (feature, threshold, decrease) maximizing the score decrease.

    Strictly-greater comparison over features/thresholds in ascending order
    yields the lowest-feature, lowest-threshold tie rule. Returns None when
    no split separates the data.
    """
    best: tuple[int, float, float] | None = None
    for feat in range(X.shape[1]):
        column = X[:, feat]
        for thr in _candidate_thresholds(column):
            left = column <= thr
            decrease = parent_score - score_split(left, ~left)
            if best is None or decrease > best[2]:
                best = (feat, float(thr), float(decrease))
    return best


def grow_classification_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    criterion: str = "gini",
    max_depth: int = 5,
) -> TreeNode:
    if criterion not in _CRITERIA:
        raise ValueError(f"criterion must be one of {sorted(_CRITERIA)}, got {criterion!r}")
    impurity = _CRITERIA[criterion]

    def leaf(labels: np.ndarray) -> TreeNode:
        dist = np.bincount(labels, minlength=n_classes) / labels.size
        return TreeNode(value=dist)

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        labels = y[idx]
        parent = impurity(labels, n_classes)
        if depth >= max_depth or parent == 0.0 or idx.size < 2:
            return leaf(labels)

        def score_split(left: np.ndarray, right: np.ndarray) -> float:
            nl, nr = left.sum(), right.sum()
            return (
                nl * impurity(labels[left], n_classes)
                + nr * impurity(labels[right], n_classes)
            ) / idx.size

        found = _best_split(X[idx], score_split, parent)
        if found is None:
            return leaf(labels)
        feat, thr, _ = found
        left_mask = X[idx, feat] <= thr
        node = TreeNode(feature=feat, threshold=thr)
        node.left = build(idx[left_mask], depth + 1)
        node.right = build(idx[~left_mask], depth + 1)
        return node

    return build(np.arange(X.shape[0]), 0)


def grow_regression_tree(
    X: np.ndarray, y: np.ndarray, max_depth: int = 3
) -> TreeNode:
    """Squared-error regression tree; leaves store the target mean."""

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        targets = y[idx]
        if depth >= max_depth or idx.size < 2 or np.all(targets == targets[0]):
            return TreeNode(value=float(targets.mean()))
        parent = float(np.var(targets))

        def score_split(left: np.ndarray, right: np.ndarray) -> float:
            return (
                left.sum() * np.var(targets[left])
                + right.sum() * np.var(targets[right])
            ) / idx.size

        found = _best_split(X[idx], score_split, parent)
        if found is None or found[2] <= 0.0:
            return TreeNode(value=float(targets.mean()))
        feat, thr, _ = found
        left_mask = X[idx, feat] <= thr
        node = TreeNode(feature=feat, threshold=thr)
        node.left = build(idx[left_mask], depth + 1)
        node.right = build(idx[~left_mask], depth + 1)
        return node

    return build(np.arange(X.shape[0]), 0)


def tree_apply(root: TreeNode, x: np.ndarray) -> np.ndarray | float:
    node = root
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.value


def tree_predict(root: TreeNode, X: np.ndarray) -> np.ndarray:
    """Stack leaf values over rows: (n, K) for classification trees,
    (n,) for regression trees."""
    out = [tree_apply(root, row) for row in X]
    return np.array(out) if out and np.isscalar(out[0]) else np.stack(out)
