"""Dataset reading, sentence construction and store export.

Sentence construction mirrors the prediction toolkit exactly: candidates
padded to length C with the pad token, each candidate (or pad token) spliced
into the original text at the annotated character span. Keys follow the
store contract: "<id>#orig" plus "<id>#cand<i>" for i = 1..C.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import DEFAULT_MODEL, make_encoder
from .store import write_store


@dataclass
class BridgeConfig:
    dataset: str
    max_candidates: int
    output: str
    pad_token: str = "[PAD]"
    encoder: str = "hf"
    model_id: str = DEFAULT_MODEL
    max_length: int = 512
    pooling: str = "mean"
    dim: int = 768  # used by the hashed encoder; hf reports its own


@dataclass
class DatasetRow:
    record_id: str
    text: str
    span_start: int
    span_end: int
    candidates: list[str]

    def validate(self, line_no: int) -> None:
        if not (0 <= self.span_start <= self.span_end <= len(self.text)):
            raise ValueError(f"line {line_no}: span offsets out of bounds")
        if len(self.candidates) < 1:
            raise ValueError(f"line {line_no}: empty candidate list")


def read_dataset(path: str | Path) -> list[DatasetRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            row = DatasetRow(
                record_id=obj["id"],
                text=obj["text"],
                span_start=obj["span_start"],
                span_end=obj["span_end"],
                candidates=list(obj["candidates"]),
            )
            row.validate(line_no)
            rows.append(row)
    return rows


def build_sentences(row: DatasetRow, max_candidates: int, pad_token: str) -> list[str]:
    """The original sentence followed by one generalized sentence per padded
    candidate slot (index i is slot i, 1-based downstream)."""
    if len(row.candidates) > max_candidates:
        raise ValueError(
            f"record {row.record_id!r} has {len(row.candidates)} candidates, "
            f"more than the cap {max_candidates}; filter the dataset first"
        )
    padded = row.candidates + [pad_token] * (max_candidates - len(row.candidates))
    prefix = row.text[: row.span_start]
    suffix = row.text[row.span_end :]
    return [row.text] + [prefix + cand + suffix for cand in padded]


def export_embeddings(config: BridgeConfig) -> dict[str, int]:
    """Encode every sentence and write the store. Returns summary counts."""
    rows = read_dataset(config.dataset)
    encoder = make_encoder(
        config.encoder, config.model_id, config.max_length, config.pooling, config.dim
    )

    keys: list[str] = []
    sentences: list[str] = []
    for row in rows:
        built = build_sentences(row, config.max_candidates, config.pad_token)
        keys.append(f"{row.record_id}#orig")
        sentences.append(built[0])
        for i, sentence in enumerate(built[1:], start=1):
            keys.append(f"{row.record_id}#cand{i}")
            sentences.append(sentence)

    vectors = encoder.encode(sentences)
    if vectors.shape != (len(keys), encoder.dim):
        raise RuntimeError(
            f"encoder returned shape {vectors.shape}, "
            f"expected ({len(keys)}, {encoder.dim})"
        )
    store = {key: np.asarray(vec) for key, vec in zip(keys, vectors)}
    write_store(config.output, encoder.dim, store)
    return {"records": len(rows), "keys": len(keys), "dim": encoder.dim}
