"""Context input construction: pad candidate lists and splice candidates
into the original text to produce the generalized sentence set."""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import PAD_TOKEN, PiiRecord


@dataclass(frozen=True)
class ContextualExample:
    """A record's padded candidates plus the generalized sentence for each slot.

    ``pad_mask[i]`` is True for real candidates (positions 0..m-1) and False
    for padded slots. ``target_level`` stays 1-based and always points at a
    real slot.
    """

    record_id: str
    original_text: str
    padded_candidates: tuple[str, ...]
    generalized_sentences: tuple[str, ...]
    pad_mask: tuple[bool, ...]
    target_level: int
    all_levels: frozenset[int]

    @property
    def num_real(self) -> int:
        return sum(self.pad_mask)


def splice_candidate(record: PiiRecord, candidate: str) -> str:
    """Replace the annotated span with ``candidate``; pure string splice."""
    return (
        record.text[: record.span_start] + candidate + record.text[record.span_end :]
    )


def build_contextual_example(
    record: PiiRecord, max_candidates: int, pad_token: str = PAD_TOKEN
) -> ContextualExample:
    """Pad the candidate list to ``max_candidates`` and build one generalized
    sentence per slot (padded slots get the literal pad token spliced in)."""
    m = len(record.candidates)
    if m > max_candidates:
        raise ValueError(
            f"record {record.id!r} has {m} candidates, more than the cap "
            f"{max_candidates}; filter the dataset with filter_by_max_candidates first"
        )
    padded = tuple(record.candidates) + (pad_token,) * (max_candidates - m)
    sentences = tuple(splice_candidate(record, c) for c in padded)
    mask = (True,) * m + (False,) * (max_candidates - m)
    return ContextualExample(
        record_id=record.id,
        original_text=record.text,
        padded_candidates=padded,
        generalized_sentences=sentences,
        pad_mask=mask,
        target_level=record.majority_level,
        all_levels=record.all_levels,
    )
