"""Synthetic benchmark generator.

The correct level is the position of the candidate that keeps a token of
the original span, so the label is recoverable from the sentence plus the
candidate list but not from the span features alone. A configurable share
of records carries a span token that encodes the label ("clue<t>"), giving
the feature-based path partial signal above the constant baseline.
"""

from __future__ import annotations

import numpy as np

from .corpus import PiiRecord, SemanticType, SemanticTypeRegistry

_FIRST_TOKENS = [
    "amber", "birch", "cedar", "delta", "ember", "fjord", "grove", "heath",
    "inlet", "juniper", "knoll", "larch", "meadow", "nettle", "orchard",
]
_SECOND_TOKENS = [
    "harbor", "quarry", "ridge", "saddle", "terrace", "upland", "valley",
    "willow", "yonder", "zenith", "basin", "cliff", "dune", "estuary",
]
_DISTRACTORS = [
    "obsidian", "quartzite", "feldspar", "gypsum", "malachite", "pumice",
    "rhyolite", "schist", "travertine", "dolomite",
]
_PLACES = ["north", "south", "east", "west", "upper", "lower"]


def make_benchmark_records(
    n: int,
    seed: int = 0,
    span_hint_rate: float = 0.35,
    id_prefix: str = "syn",
) -> list[PiiRecord]:
    """Generate ``n`` records whose majority level depends on which candidate
    retains a span token. ``span_hint_rate`` is the fraction of records whose
    span leaks the label to span-only features."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5E11]))
    registry = SemanticTypeRegistry()
    sem = SemanticType("MISC", registry.code("MISC"))
    records = []
    for i in range(n):
        m = int(rng.integers(2, 4))
        target = int(rng.integers(1, m + 1))
        second = _SECOND_TOKENS[rng.integers(len(_SECOND_TOKENS))]
        if rng.random() < span_hint_rate:
            first = f"clue{target}"
        else:
            first = _FIRST_TOKENS[rng.integers(len(_FIRST_TOKENS))]
        span_text = f"{first} {second}"

        distractor_idx = rng.permutation(len(_DISTRACTORS))[: m - 1]
        candidates = [_DISTRACTORS[j] for j in distractor_idx]
        candidates.insert(target - 1, second)

        place = _PLACES[rng.integers(len(_PLACES))]
        prefix = "Record of "
        text = f"{prefix}{span_text} in the {place} district."
        span_start = len(prefix)
        span_end = span_start + len(span_text)

        all_levels = {target}
        if m > 1 and rng.random() < 0.25:
            extra = int(rng.integers(1, m + 1))
            all_levels.add(extra)

        records.append(
            PiiRecord(
                id=f"{id_prefix}{i:04d}",
                text=text,
                span_start=span_start,
                span_end=span_end,
                span_text=span_text,
                semantic_type=sem,
                candidates=tuple(candidates),
                majority_level=target,
                all_levels=frozenset(all_levels),
            )
        )
    return records


def make_separable_records(n: int = 50, seed: int = 7) -> list[PiiRecord]:
    """The shipped separable training set for overfit checks: no span hints,
    the label is only visible through the contextual input."""
    return make_benchmark_records(n, seed=seed, span_hint_rate=0.0, id_prefix="sep")
