"""Embedding export bridge: runs a frozen sentence encoder over a dataset's
original and generalized sentences and writes a PIEM store for the
prediction toolkit."""

from .export import BridgeConfig, build_sentences, export_embeddings
from .store import write_store

__all__ = ["BridgeConfig", "build_sentences", "export_embeddings", "write_store"]
