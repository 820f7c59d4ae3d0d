"""Loading, validating, filtering and summarizing PII generalization datasets.

Dataset files are JSON Lines (UTF-8), one record per line:

    {"id": str, "text": str, "span_start": int, "span_end": int,
     "span_text": str, "semantic_type": str, "candidates": [str],
     "majority_level": int, "all_levels": [int]}

Offsets are Unicode code-point indices (end exclusive), never bytes.
Levels are 1-based: level i means the i-th candidate in the list.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

PAD_TOKEN = "[PAD]"

#: Default closed set of semantic-type labels (7 categories). Unknown labels
#: found in a dataset are appended to the registry with a warning.
DEFAULT_SEMANTIC_TYPES = (
    "CODE",
    "DATETIME",
    "DEM",
    "LOC",
    "MISC",
    "ORG",
    "PERSON",
)


class DatasetError(ValueError):
    """Malformed dataset file or record failing validation."""


class SemanticTypeRegistry:
    """Bijection between semantic-type labels and integer codes 0..K-1.

    Codes follow sorted-label order over the initial label set and are stable
    for the lifetime of the registry; labels appended later get the next free
    code.
    """

    def __init__(self, labels: Iterable[str] = DEFAULT_SEMANTIC_TYPES):
        self._codes: dict[str, int] = {}
        for label in sorted(set(labels)):
            self._codes[label] = len(self._codes)

    @property
    def size(self) -> int:
        return len(self._codes)

    @property
    def labels(self) -> list[str]:
        return sorted(self._codes, key=self._codes.__getitem__)

    def code(self, label: str) -> int:
        """Return the code for ``label``, registering it if unseen."""
        if label not in self._codes:
            logger.warning("unknown semantic type %r added to registry", label)
            self._codes[label] = len(self._codes)
        return self._codes[label]

    def __contains__(self, label: str) -> bool:
        return label in self._codes


@dataclass(frozen=True)
class SemanticType:
    label: str
    code: int


@dataclass(frozen=True)
class PiiRecord:
    """One PII span with its document text, candidates and annotator choices."""

    id: str
    text: str
    span_start: int
    span_end: int
    span_text: str
    semantic_type: SemanticType
    candidates: tuple[str, ...]
    majority_level: int
    all_levels: frozenset[int]

    @property
    def num_candidates(self) -> int:
        return len(self.candidates)

    def validate(self) -> None:
        rid = self.id
        if not (0 <= self.span_start <= self.span_end <= len(self.text)):
            raise DatasetError(
                f"record {rid!r}: span offsets [{self.span_start}, {self.span_end}) "
                f"out of bounds for text of length {len(self.text)}"
            )
        if self.text[self.span_start : self.span_end] != self.span_text:
            raise DatasetError(
                f"record {rid!r}: text[{self.span_start}:{self.span_end}] "
                f"= {self.text[self.span_start:self.span_end]!r} "
                f"does not equal span_text {self.span_text!r}"
            )
        m = len(self.candidates)
        if m < 1:
            raise DatasetError(f"record {rid!r}: empty candidate list")
        if any(c == PAD_TOKEN for c in self.candidates):
            raise DatasetError(f"record {rid!r}: candidate list contains {PAD_TOKEN}")
        if not 1 <= self.majority_level <= m:
            raise DatasetError(
                f"record {rid!r}: majority_level {self.majority_level} "
                f"out of range 1..{m}"
            )
        if not self.all_levels:
            raise DatasetError(f"record {rid!r}: all_levels is empty")
        if self.majority_level not in self.all_levels:
            raise DatasetError(
                f"record {rid!r}: majority_level {self.majority_level} "
                f"missing from all_levels {sorted(self.all_levels)}"
            )
        bad = [lv for lv in self.all_levels if not 1 <= lv <= m]
        if bad:
            raise DatasetError(
                f"record {rid!r}: all_levels entries {bad} out of range 1..{m}"
            )

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "span_start": self.span_start,
            "span_end": self.span_end,
            "span_text": self.span_text,
            "semantic_type": self.semantic_type.label,
            "candidates": list(self.candidates),
            "majority_level": self.majority_level,
            "all_levels": sorted(self.all_levels),
        }


@dataclass
class DatasetStats:
    record_count: int
    histogram_num_candidates: dict[int, int] = field(default_factory=dict)
    histogram_selected_level: dict[int, int] = field(default_factory=dict)
    coverage_at: dict[int, float] = field(default_factory=dict)


_REQUIRED_FIELDS = {
    "id": str,
    "text": str,
    "span_start": int,
    "span_end": int,
    "span_text": str,
    "semantic_type": str,
    "candidates": list,
    "majority_level": int,
    "all_levels": list,
}


def record_from_obj(obj: dict, registry: SemanticTypeRegistry) -> PiiRecord:
    """Build and validate a PiiRecord from a decoded JSON object."""
    for name, typ in _REQUIRED_FIELDS.items():
        if name not in obj:
            raise DatasetError(f"record {obj.get('id', '?')!r}: missing field {name!r}")
        if typ is int:
            if isinstance(obj[name], bool) or not isinstance(obj[name], int):
                raise DatasetError(
                    f"record {obj.get('id', '?')!r}: field {name!r} must be an integer"
                )
        elif not isinstance(obj[name], typ):
            raise DatasetError(
                f"record {obj.get('id', '?')!r}: field {name!r} has wrong type"
            )
    label = obj["semantic_type"]
    record = PiiRecord(
        id=obj["id"],
        text=obj["text"],
        span_start=obj["span_start"],
        span_end=obj["span_end"],
        span_text=obj["span_text"],
        semantic_type=SemanticType(label, registry.code(label)),
        candidates=tuple(obj["candidates"]),
        majority_level=obj["majority_level"],
        all_levels=frozenset(obj["all_levels"]),
    )
    record.validate()
    return record


def load_dataset(
    path: str | Path,
    split_tag: str = "train",
    registry: SemanticTypeRegistry | None = None,
) -> list[PiiRecord]:
    """Load a JSON Lines dataset, validating every record.

    Raises DatasetError naming the offending line number for malformed JSON
    and the record id for invariant violations. Blank lines are skipped.
    """
    if split_tag not in ("train", "test"):
        raise ValueError(f"split_tag must be 'train' or 'test', got {split_tag!r}")
    registry = registry if registry is not None else SemanticTypeRegistry()
    records: list[PiiRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            records.append(record_from_obj(obj, registry))
    return records


def save_dataset(records: Iterable[PiiRecord], path: str | Path) -> None:
    """Serialize records back to the JSON Lines schema (round-trips load)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_obj(), ensure_ascii=False) + "\n")


def filter_by_max_candidates(
    records: Sequence[PiiRecord], max_candidates: int
) -> list[PiiRecord]:
    """Keep records with at most ``max_candidates`` candidates, order preserved."""
    if max_candidates < 1:
        raise ValueError(f"max_candidates must be >= 1, got {max_candidates}")
    return [r for r in records if len(r.candidates) <= max_candidates]


def compute_stats(
    records: Sequence[PiiRecord], coverage_values: Sequence[int] = ()
) -> DatasetStats:
    """Histogram candidate counts and selected levels; coverage at each cap."""
    stats = DatasetStats(record_count=len(records))
    for rec in records:
        m = len(rec.candidates)
        stats.histogram_num_candidates[m] = stats.histogram_num_candidates.get(m, 0) + 1
        lvl = rec.majority_level
        stats.histogram_selected_level[lvl] = (
            stats.histogram_selected_level.get(lvl, 0) + 1
        )
    for cap in coverage_values:
        if records:
            covered = sum(1 for r in records if len(r.candidates) <= cap)
            stats.coverage_at[cap] = covered / len(records)
        else:
            stats.coverage_at[cap] = 0.0
    return stats
