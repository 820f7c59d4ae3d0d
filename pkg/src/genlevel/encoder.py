"""Sentence embedding providers.

Two providers sit behind the same contract: a deterministic hashed
character-n-gram embedder (self-contained, no model weights) and a read-only
store of precomputed vectors loaded from the PIEM binary format.

PIEM format (little-endian): magic "PIEM", u32 version (=1), u32 dim,
u64 count, then per record: u32 key_len, key bytes (UTF-8), dim * f32.
Keys are "<record_id>#orig" and "<record_id>#cand<i>" with i 1-based over
the padded candidate list.
"""

from __future__ import annotations

import re
import struct
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

PIEM_MAGIC = b"PIEM"
PIEM_VERSION = 1

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class StoreFormatError(ValueError):
    """PIEM file fails header or payload validation."""


class KeyNotFound(KeyError):
    """Requested embedding key absent from the store."""


class EmbeddingProvider(Protocol):
    """Contract shared by all providers: a fixed dimension and a pure,
    deterministic text -> vector map."""

    @property
    def dim(self) -> int: ...

    def embed(self, text: str) -> np.ndarray: ...

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation (word characters kept)."""
    return _TOKEN_RE.findall(text.lower())


def hashed_embed(text: str, dim: int, ngram_n: int = 3) -> np.ndarray:
    """Deterministic hashed bag-of-features sentence embedding.

    Each token and each of its character n-grams is FNV-1a hashed; the hash's
    top bit picks a sign added at index (hash mod dim). The accumulator is
    L2-normalized. Empty or whitespace-only text yields the zero vector.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        features = [token]
        features.extend(
            token[i : i + ngram_n] for i in range(len(token) - ngram_n + 1)
        )
        for feat in features:
            h = _fnv1a64(feat.encode("utf-8"))
            sign = 1.0 if h >> 63 else -1.0
            vec[h % dim] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


class HashedNgramEmbedder:
    """Self-contained provider for tests and desk-scale runs."""

    def __init__(self, dim: int = 768, ngram_n: int = 3):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self._dim = dim
        self.ngram_n = ngram_n

    @property
    def dim(self) -> int:
        return self._dim

    def embed(self, text: str) -> np.ndarray:
        return hashed_embed(text, self._dim, self.ngram_n)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self.embed(t) for t in texts]) if texts else np.zeros(
            (0, self._dim)
        )


def write_store(path: str | Path, dim: int, vectors: Mapping[str, np.ndarray]) -> None:
    """Write key -> vector pairs to a PIEM file. Values stored as f32."""
    with open(path, "wb") as fh:
        fh.write(PIEM_MAGIC)
        fh.write(struct.pack("<IIQ", PIEM_VERSION, dim, len(vectors)))
        for key, vec in vectors.items():
            arr = np.asarray(vec, dtype="<f4")
            if arr.shape != (dim,):
                raise StoreFormatError(
                    f"vector for key {key!r} has shape {arr.shape}, expected ({dim},)"
                )
            key_bytes = key.encode("utf-8")
            fh.write(struct.pack("<I", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(arr.tobytes())


class EmbeddingStore:
    """File-backed store of precomputed embeddings, keyed by record id."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray]):
        self._dim = dim
        self._vectors = vectors

    @property
    def dim(self) -> int:
        return self._dim

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, key: str) -> bool:
        return key in self._vectors

    def keys(self) -> Iterable[str]:
        return self._vectors.keys()

    def lookup(self, key: str) -> np.ndarray:
        try:
            return self._vectors[key]
        except KeyError:
            raise KeyNotFound(key) from None

    @classmethod
    def load(cls, path: str | Path, expected_dim: int | None = None) -> "EmbeddingStore":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != PIEM_MAGIC:
                raise StoreFormatError(f"{path}: bad magic {magic!r}")
            header = fh.read(16)
            if len(header) != 16:
                raise StoreFormatError(f"{path}: truncated header")
            version, dim, count = struct.unpack("<IIQ", header)
            if version != PIEM_VERSION:
                raise StoreFormatError(f"{path}: unsupported version {version}")
            if expected_dim is not None and dim != expected_dim:
                raise StoreFormatError(
                    f"{path}: store dim {dim} does not match expected {expected_dim}"
                )
            vectors: dict[str, np.ndarray] = {}
            for _ in range(count):
                raw = fh.read(4)
                if len(raw) != 4:
                    raise StoreFormatError(f"{path}: truncated record")
                (key_len,) = struct.unpack("<I", raw)
                key = fh.read(key_len).decode("utf-8")
                payload = fh.read(4 * dim)
                if len(payload) != 4 * dim:
                    raise StoreFormatError(f"{path}: truncated vector for key {key!r}")
                vectors[key] = np.frombuffer(payload, dtype="<f4").astype(np.float64)
        return cls(dim, vectors)


def orig_key(record_id: str) -> str:
    return f"{record_id}#orig"


def cand_key(record_id: str, level: int) -> str:
    """Key for the 1-based padded candidate position ``level``."""
    return f"{record_id}#cand{level}"
