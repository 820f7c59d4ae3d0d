"""Toolkit for predicting the best generalization level of PII spans."""

from .corpus import (
    DatasetError,
    DatasetStats,
    PiiRecord,
    SemanticType,
    SemanticTypeRegistry,
    compute_stats,
    filter_by_max_candidates,
    load_dataset,
    save_dataset,
)
from .contextual import ContextualExample, build_contextual_example, splice_candidate
from .encoder import (
    EmbeddingStore,
    HashedNgramEmbedder,
    KeyNotFound,
    StoreFormatError,
    hashed_embed,
    write_store,
)
from .context_model import (
    ContextModelConfig,
    Prediction,
    TransformParams,
    forward,
    loss_and_grad,
    predict,
    train,
)
from .evaluation import EvalResult, confusion_matrix, evaluate, weighted_scores

__version__ = "0.1.0"

__all__ = [
    "ContextModelConfig",
    "ContextualExample",
    "DatasetError",
    "DatasetStats",
    "EmbeddingStore",
    "EvalResult",
    "HashedNgramEmbedder",
    "KeyNotFound",
    "PiiRecord",
    "Prediction",
    "SemanticType",
    "SemanticTypeRegistry",
    "StoreFormatError",
    "TransformParams",
    "build_contextual_example",
    "compute_stats",
    "confusion_matrix",
    "evaluate",
    "filter_by_max_candidates",
    "forward",
    "hashed_embed",
    "load_dataset",
    "loss_and_grad",
    "predict",
    "save_dataset",
    "splice_candidate",
    "train",
    "weighted_scores",
    "write_store",
]
