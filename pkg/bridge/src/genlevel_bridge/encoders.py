"""Sentence encoders for the export bridge.

The default is a multilingual BERT-class transformer run in inference mode
(dropout off) with mean or first-token pooling over final-layer states,
truncated to a maximum sequence length. A deterministic hash-based encoder
is included for tests and offline runs; it produces vectors of any requested
dimension without model weights.
"""

from __future__ import annotations

import hashlib

import numpy as np

DEFAULT_MODEL = "bert-base-multilingual-uncased"


class HashEncoder:
    """Deterministic stand-in encoder: token hashes scattered into a fixed-
    dimension signed bag, L2-normalized. No external weights."""

    def __init__(self, dim: int = 768):
        self.dim = dim

    def encode(self, sentences: list[str]) -> np.ndarray:
        out = np.zeros((len(sentences), self.dim), dtype=np.float64)
        for row, sentence in enumerate(sentences):
            for token in sentence.lower().split():
                digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
                h = int.from_bytes(digest, "little")
                sign = 1.0 if h >> 63 else -1.0
                out[row, h % self.dim] += sign
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out


class TransformerEncoder:
    """Frozen transformer encoder; pooling over final hidden states."""

    def __init__(
        self,
        model_id: str = DEFAULT_MODEL,
        max_length: int = 512,
        pooling: str = "mean",
        batch_size: int = 16,
    ):
        if pooling not in ("mean", "first"):
            raise ValueError(f"pooling must be 'mean' or 'first', got {pooling!r}")
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise RuntimeError(
                "transformers/torch not installed; install the [hf] extra "
                "or use --encoder hashed"
            ) from exc
        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModel.from_pretrained(model_id)
        self.model.eval()
        self.max_length = max_length
        self.pooling = pooling
        self.batch_size = batch_size
        self.dim = int(self.model.config.hidden_size)

    def encode(self, sentences: list[str]) -> np.ndarray:
        torch = self._torch
        chunks = []
        with torch.no_grad():
            for start in range(0, len(sentences), self.batch_size):
                batch = sentences[start : start + self.batch_size]
                inputs = self.tokenizer(
                    batch,
                    padding=True,
                    truncation=True,
                    max_length=self.max_length,
                    return_tensors="pt",
                )
                states = self.model(**inputs).last_hidden_state
                if self.pooling == "first":
                    pooled = states[:, 0, :]
                else:
                    attn = inputs["attention_mask"].unsqueeze(-1).to(states.dtype)
                    pooled = (states * attn).sum(dim=1) / attn.sum(dim=1).clamp(min=1)
                chunks.append(pooled.cpu().numpy().astype(np.float64))
        return np.concatenate(chunks) if chunks else np.zeros((0, self.dim))


def make_encoder(kind: str, model_id: str, max_length: int, pooling: str, dim: int):
    if kind == "hashed":
        return HashEncoder(dim)
    if kind == "hf":
        return TransformerEncoder(model_id, max_length, pooling)
    raise ValueError(f"unknown encoder kind {kind!r}")
