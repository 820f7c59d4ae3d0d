"""Metrics and reports.

Two accuracies: majority-vote (prediction equals the level most annotators
chose) and all-selections (prediction matches any annotator's choice).
Weighted precision/recall/F1 come in two modes: the literal printed formula
sum_i Score_i / N_i, and the standard support-weighted sum_i (N_i/N) Score_i.
Both are reported; the support-weighted one is the default display.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import PiiRecord


@dataclass
class LevelScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalResult:
    n: int
    majority_vote_acc: float
    all_selections_acc: float
    per_level: dict[int, LevelScores]
    weighted_literal: tuple[float, float, float]
    weighted_support: tuple[float, float, float]
    confusion_counts: np.ndarray
    confusion_rates: np.ndarray
    levels: list[int] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "majority_vote_acc": self.majority_vote_acc,
            "all_selections_acc": self.all_selections_acc,
            "per_level": {
                str(lvl): {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for lvl, s in sorted(self.per_level.items())
            },
            "weighted_literal": {
                "precision": self.weighted_literal[0],
                "recall": self.weighted_literal[1],
                "f1": self.weighted_literal[2],
            },
            "weighted_support": {
                "precision": self.weighted_support[0],
                "recall": self.weighted_support[1],
                "f1": self.weighted_support[2],
            },
            "confusion_counts": self.confusion_counts.tolist(),
            "confusion_rates": self.confusion_rates.tolist(),
            "levels": self.levels,
        }


def confusion_matrix(
    predictions: Sequence[int], labels: Sequence[int], n_levels: int
) -> tuple[np.ndarray, np.ndarray]:
    """counts[i][j] = #(true level i+1, predicted level j+1); rates are
    row-normalized (zero rows stay zero)."""
    counts = np.zeros((n_levels, n_levels), dtype=np.int64)
    for pred, true in zip(predictions, labels):
        if not (1 <= true <= n_levels and 1 <= pred <= n_levels):
            raise ValueError(
                f"level out of range 1..{n_levels}: true={true}, predicted={pred}"
            )
        counts[true - 1, pred - 1] += 1
    row_sums = counts.sum(axis=1, keepdims=True)
    rates = np.divide(
        counts, row_sums, out=np.zeros_like(counts, dtype=np.float64),
        where=row_sums > 0,
    )
    return counts, rates


def weighted_scores(
    per_level: dict[int, tuple[float, int]], mode: str
) -> float:
    """Combine per-level scores given (score, support N_i) per level.

    ``literal`` computes sum_i Score_i / N_i (the formula as printed);
    ``support`` computes sum_i (N_i / N) Score_i. Zero-support levels are
    excluded from both sums.
    """
    if mode not in ("literal", "support"):
        raise ValueError(f"mode must be 'literal' or 'support', got {mode!r}")
    included = {lvl: (s, n) for lvl, (s, n) in per_level.items() if n >= 1}
    if not included:
        return 0.0
    if mode == "literal":
        return float(sum(s / n for s, n in included.values()))
    total = sum(n for _, n in included.values())
    return float(sum(s * n for s, n in included.values()) / total)


def evaluate(predictions: Sequence[int], records: Sequence[PiiRecord]) -> EvalResult:
    """Compute both accuracies, per-level P/R/F1 on majority labels, both
    weighted-score modes, and the confusion matrix."""
    if len(predictions) != len(records):
        raise ValueError(
            f"{len(predictions)} predictions for {len(records)} records"
        )
    n = len(records)
    majority = [r.majority_level for r in records]
    mv_correct = sum(p == t for p, t in zip(predictions, majority))
    as_correct = sum(
        p in r.all_levels for p, r in zip(predictions, records)
    )
    n_levels = max(
        [*majority, *predictions, 1]
    )
    counts, rates = confusion_matrix(predictions, majority, n_levels) if n else (
        np.zeros((1, 1), dtype=np.int64),
        np.zeros((1, 1)),
    )

    per_level: dict[int, LevelScores] = {}
    for lvl in range(1, n_levels + 1):
        i = lvl - 1
        tp = counts[i, i]
        support = int(counts[i].sum())
        pred_total = int(counts[:, i].sum())
        precision = tp / pred_total if pred_total else 0.0
        recall = tp / support if support else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        per_level[lvl] = LevelScores(float(precision), float(recall), float(f1), support)

    def combine(mode: str) -> tuple[float, float, float]:
        return tuple(
            weighted_scores(
                {
                    lvl: (getattr(s, name), s.support)
                    for lvl, s in per_level.items()
                },
                mode,
            )
            for name in ("precision", "recall", "f1")
        )

    return EvalResult(
        n=n,
        majority_vote_acc=mv_correct / n if n else 0.0,
        all_selections_acc=as_correct / n if n else 0.0,
        per_level=per_level,
        weighted_literal=combine("literal"),
        weighted_support=combine("support"),
        confusion_counts=counts,
        confusion_rates=rates,
        levels=list(range(1, n_levels + 1)),
    )


def format_report(result: EvalResult, title: str = "Evaluation") -> str:
    """Aligned text table: accuracies, per-level scores, weighted rows."""
    lines = [title, "=" * len(title), ""]
    lines.append(f"records:            {result.n}")
    lines.append(f"majority vote acc:  {result.majority_vote_acc:.4f}")
    lines.append(f"all selections acc: {result.all_selections_acc:.4f}")
    lines.append("")
    header = f"{'level':>5} {'precision':>10} {'recall':>10} {'f1':>10} {'support':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for lvl, s in sorted(result.per_level.items()):
        lines.append(
            f"{lvl:>5} {s.precision:>10.4f} {s.recall:>10.4f} {s.f1:>10.4f} {s.support:>8}"
        )
    lines.append("-" * len(header))
    wp, wr, wf = result.weighted_support
    lines.append(f"{'wavg':>5} {wp:>10.4f} {wr:>10.4f} {wf:>10.4f} {result.n:>8}")
    lp, lr, lf = result.weighted_literal
    lines.append(f"{'wlit':>5} {lp:>10.4f} {lr:>10.4f} {lf:>10.4f} {result.n:>8}")
    lines.append("")
    lines.append("confusion (row-normalized true-positive rates on diagonal):")
    for i, lvl in enumerate(result.levels):
        row = " ".join(f"{v:.3f}" for v in result.confusion_rates[i])
        lines.append(f"  true {lvl}: {row}")
    return "\n".join(lines) + "\n"


def confusion_csv(result: EvalResult, normalized: bool = True) -> str:
    matrix = result.confusion_rates if normalized else result.confusion_counts
    header = "true\\pred," + ",".join(str(l) for l in result.levels)
    rows = [header]
    for i, lvl in enumerate(result.levels):
        if normalized:
            rows.append(f"{lvl}," + ",".join(f"{v:.6f}" for v in matrix[i]))
        else:
            rows.append(f"{lvl}," + ",".join(str(int(v)) for v in matrix[i]))
    return "\n".join(rows) + "\n"


def write_report(result: EvalResult, path_json, path_txt=None, path_csv=None, title="Evaluation") -> None:
    with open(path_json, "w", encoding="utf-8") as fh:
        json.dump(result.to_json_obj(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    if path_txt is not None:
        with open(path_txt, "w", encoding="utf-8") as fh:
            fh.write(format_report(result, title))
    if path_csv is not None:
        with open(path_csv, "w", encoding="utf-8") as fh:
            fh.write(confusion_csv(result))
