"""Context-aware candidate scorer.

Pipeline per record: embed the original sentence and the C generalized
sentences, apply elementwise affine transforms to both sides, score each
candidate by the mean squared difference of the transformed vectors, mask
padded slots, softmax over the real slots, pick the argmax level.

Training minimizes softmax cross entropy on the majority level with AdamW
(decoupled weight decay) and exact analytic gradients.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .contextual import ContextualExample, build_contextual_example
from .corpus import PAD_TOKEN, PiiRecord
from .encoder import EmbeddingProvider, EmbeddingStore, cand_key, orig_key


@dataclass
class TransformParams:
    """Learnable elementwise affine parameters, one V-vector each."""

    w0: np.ndarray
    b0: np.ndarray
    w1: np.ndarray
    b1: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "TransformParams":
        return cls(
            w0=np.ones(dim),
            b0=np.zeros(dim),
            w1=np.ones(dim),
            b1=np.zeros(dim),
        )

    @classmethod
    def zeros(cls, dim: int) -> "TransformParams":
        return cls(
            w0=np.zeros(dim),
            b0=np.zeros(dim),
            w1=np.zeros(dim),
            b1=np.zeros(dim),
        )

    @property
    def dim(self) -> int:
        return self.w0.shape[0]

    def copy(self) -> "TransformParams":
        return TransformParams(
            self.w0.copy(), self.b0.copy(), self.w1.copy(), self.b1.copy()
        )

    def arrays(self) -> list[np.ndarray]:
        return [self.w0, self.b0, self.w1, self.b1]

    def validate(self) -> None:
        for name, arr in zip(("W0", "b0", "W1", "b1"), self.arrays()):
            if arr.shape != (self.dim,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({self.dim},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")


@dataclass
class ContextModelConfig:
    """Hyperparameters; defaults follow the published training setup
    (batch size 2, 20 epochs, lr 1e-6, weight decay 1e-4, AdamW).

    The 1e-6 learning rate presumes encoder-scale training; with the hashed
    provider use lr around 1e-2 (the CLI switches the default accordingly).
    """

    max_candidates: int = 7
    dim: int = 768
    pad_token: str = PAD_TOKEN
    batch_size: int = 2
    max_epochs: int = 20
    learning_rate: float = 1e-6
    weight_decay: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    logit_sign: int = -1
    early_stop_patience: int = 3
    val_fraction: float = 0.1
    leave_one_out: bool = False
    seed: int = 0


@dataclass
class Prediction:
    """Per-candidate scores and probabilities for one record."""

    scores: np.ndarray
    masked_logits: np.ndarray
    probabilities: np.ndarray
    predicted_level: int


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    monitor_accuracy: float
    is_best: bool


@dataclass
class TrainingLog:
    epochs: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False


def forward(
    params: TransformParams,
    h_x: np.ndarray,
    h_generalized: np.ndarray,
    mask: np.ndarray,
    logit_sign: int = -1,
) -> Prediction:
    """Score all C candidate slots for one record.

    ``h_generalized`` is (C, V); ``mask`` is (C,) boolean with at least one
    True. Padded slots get a -inf logit, exactly zero probability and a
    zeroed display score. Ties in probability break to the lowest level.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask has no real candidate positions")
    if not (np.all(np.isfinite(h_x)) and np.all(np.isfinite(h_generalized))):
        raise ValueError("non-finite embedding input")
    if logit_sign not in (1, -1):
        raise ValueError(f"logit_sign must be +1 or -1, got {logit_sign}")

    a = params.w0 * h_x + params.b0
    g = params.w1 * h_generalized + params.b1
    diff = g - a
    scores = np.mean(diff * diff, axis=1)

    logits = np.where(mask, logit_sign * scores, -np.inf)
    real = logits[mask]
    shifted = real - real.max()
    exp = np.exp(shifted)
    probs_real = exp / exp.sum()
    probabilities = np.zeros_like(logits)
    probabilities[mask] = probs_real

    predicted_level = int(np.argmax(probabilities)) + 1
    return Prediction(
        scores=np.where(mask, scores, 0.0),
        masked_logits=logits,
        probabilities=probabilities,
        predicted_level=predicted_level,
    )


def loss_and_grad(
    params: TransformParams,
    batch: Sequence[tuple[np.ndarray, np.ndarray, np.ndarray, int]],
    logit_sign: int = -1,
) -> tuple[float, TransformParams]:
    """Mean cross-entropy loss over a batch and its exact analytic gradients.

    Batch items are (h_x, h_generalized, mask, target_level) with the target
    1-based and pointing at a real slot. Padded slots contribute nothing to
    loss or gradients.
    """
    if not batch:
        raise ValueError("empty batch")
    dim = params.dim
    grads = TransformParams.zeros(dim)
    total_loss = 0.0
    scale = 1.0 / len(batch)

    for h_x, h_gen, mask, target_level in batch:
        mask = np.asarray(mask, dtype=bool)
        t = target_level - 1
        if not (0 <= t < mask.shape[0]) or not mask[t]:
            raise ValueError(f"target level {target_level} is not a real position")

        a = params.w0 * h_x + params.b0
        g = params.w1 * h_gen + params.b1
        diff = g - a
        scores = np.mean(diff * diff, axis=1)

        logits = np.where(mask, logit_sign * scores, -np.inf)
        real = logits[mask]
        shifted = real - real.max()
        log_z = math.log(np.exp(shifted).sum())
        log_probs = np.full_like(logits, -np.inf)
        log_probs[mask] = shifted - log_z
        total_loss += -log_probs[t] * scale

        probs = np.zeros_like(logits)
        probs[mask] = np.exp(log_probs[mask])

        # dL/ds_i = sign * (p_i - 1{i=t}); ds_i/d(g_i) = (2/V) diff_i,
        # ds_i/d(a) = -(2/V) diff_i, then chain through the affine maps.
        dl_ds = logit_sign * probs
        dl_ds[t] -= logit_sign
        dl_ds = np.where(mask, dl_ds, 0.0)

        coeff = (2.0 / dim) * dl_ds[:, None] * diff
        grads.w1 += scale * np.sum(coeff * h_gen, axis=0)
        grads.b1 += scale * np.sum(coeff, axis=0)
        da = -np.sum(coeff, axis=0)
        grads.w0 += scale * da * h_x
        grads.b0 += scale * da

    return float(total_loss), grads


class _AdamWState:
    """Moment buffers for decoupled-weight-decay Adam over the four vectors."""

    def __init__(self, dim: int):
        self.m = TransformParams.zeros(dim)
        self.v = TransformParams.zeros(dim)
        self.t = 0

    def step(
        self, params: TransformParams, grads: TransformParams, cfg: ContextModelConfig
    ) -> None:
        self.t += 1
        b1, b2 = cfg.adam_beta1, cfg.adam_beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for p, g, m, v in zip(
            params.arrays(), grads.arrays(), self.m.arrays(), self.v.arrays()
        ):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)
            p -= cfg.learning_rate * cfg.weight_decay * p


class RecordEmbedder:
    """Turns records into (h_x, h_generalized, mask, target) tuples via a
    text provider or a precomputed store."""

    def __init__(
        self,
        config: ContextModelConfig,
        provider: EmbeddingProvider | None = None,
        store: EmbeddingStore | None = None,
    ):
        if (provider is None) == (store is None):
            raise ValueError("exactly one of provider / store must be given")
        if provider is not None and provider.dim != config.dim:
            raise ValueError(
                f"provider dim {provider.dim} does not match config dim {config.dim}"
            )
        if store is not None and store.dim != config.dim:
            raise ValueError(
                f"store dim {store.dim} does not match config dim {config.dim}"
            )
        self.config = config
        self.provider = provider
        self.store = store

    def example(self, record: PiiRecord) -> ContextualExample:
        return build_contextual_example(
            record, self.config.max_candidates, self.config.pad_token
        )

    def vectors(self, record: PiiRecord) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ex = self.example(record)
        cap = self.config.max_candidates
        if self.provider is not None:
            h_x = self.provider.embed(ex.original_text)
            h_gen = self.provider.embed_batch(list(ex.generalized_sentences))
        else:
            h_x = self.store.lookup(orig_key(record.id))
            h_gen = np.stack(
                [self.store.lookup(cand_key(record.id, i)) for i in range(1, cap + 1)]
            )
        return h_x, h_gen, np.array(ex.pad_mask, dtype=bool)


def _split_indices(
    n: int, cfg: ContextModelConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    order = rng.permutation(n)
    if cfg.leave_one_out:
        return order[1:], order[:1]
    n_val = int(round(n * cfg.val_fraction))
    if n_val == 0:
        return order, np.array([], dtype=int)
    return order[n_val:], order[:n_val]


def train(
    records: Sequence[PiiRecord],
    config: ContextModelConfig,
    provider: EmbeddingProvider | None = None,
    store: EmbeddingStore | None = None,
) -> tuple[TransformParams, TrainingLog]:
    """Fit the transform parameters; returns the best-validation snapshot.

    Starts from the identity transform. Embeddings are computed once up
    front (the encoder is frozen). Early stopping monitors majority-vote
    accuracy on a seeded hold-out (or the training set when val_fraction
    is 0), with the configured patience. Bit-reproducible given the seed
    and provider.
    """
    if not records:
        raise ValueError("empty training set")
    if config.leave_one_out:
        return _train_leave_one_out(records, config, provider, store)

    embedder = RecordEmbedder(config, provider=provider, store=store)
    data = []
    for rec in records:
        h_x, h_gen, mask = embedder.vectors(rec)
        data.append((h_x, h_gen, mask, rec.majority_level))

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5B117]))
    train_idx, val_idx = _split_indices(len(data), config, rng)
    monitor_idx = val_idx if len(val_idx) else train_idx

    params = TransformParams.identity(config.dim)
    opt = _AdamWState(config.dim)
    log = TrainingLog()
    best = params.copy()
    best_acc = -1.0
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        rng.shuffle(train_idx)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(train_idx), config.batch_size):
            batch = [data[i] for i in train_idx[start : start + config.batch_size]]
            loss, grads = loss_and_grad(params, batch, config.logit_sign)
            opt.step(params, grads, config)
            epoch_loss += loss
            n_batches += 1

        correct = sum(
            forward(params, *data[i][:3], config.logit_sign).predicted_level
            == data[i][3]
            for i in monitor_idx
        )
        acc = correct / len(monitor_idx)
        improved = acc > best_acc
        if improved:
            best_acc = acc
            best = params.copy()
            log.best_epoch = epoch
            stale = 0
        else:
            stale += 1
        log.epochs.append(
            EpochLog(
                epoch=epoch,
                train_loss=epoch_loss / max(n_batches, 1),
                monitor_accuracy=acc,
                is_best=improved,
            )
        )
        if config.early_stop_patience and stale >= config.early_stop_patience:
            log.stopped_early = True
            break

    return best, log


def _train_leave_one_out(
    records: Sequence[PiiRecord],
    config: ContextModelConfig,
    provider: EmbeddingProvider | None,
    store: EmbeddingStore | None,
) -> tuple[TransformParams, TrainingLog]:
    """True leave-one-out: train n single-holdout models, keep the parameters
    with the best held-out accuracy. Only sensible for small datasets."""
    n = len(records)
    best_params = TransformParams.identity(config.dim)
    best_correct = -1
    combined = TrainingLog()
    inner = replace(config, leave_one_out=False, val_fraction=0.0)
    for held_out in range(n):
        fold = [r for i, r in enumerate(records) if i != held_out]
        cfg = replace(inner, seed=config.seed + held_out)
        params, _ = train(fold, cfg, provider=provider, store=store)
        pred = predict(params, records[held_out], config, provider=provider, store=store)
        correct = int(pred.predicted_level == records[held_out].majority_level)
        if correct > best_correct:
            best_correct = correct
            best_params = params
            combined.best_epoch = held_out
    return best_params, combined


def predict(
    params: TransformParams,
    record: PiiRecord,
    config: ContextModelConfig,
    provider: EmbeddingProvider | None = None,
    store: EmbeddingStore | None = None,
) -> Prediction:
    embedder = RecordEmbedder(config, provider=provider, store=store)
    h_x, h_gen, mask = embedder.vectors(record)
    return forward(params, h_x, h_gen, mask, config.logit_sign)


def save_checkpoint(
    path: str | Path, params: TransformParams, config: ContextModelConfig
) -> None:
    obj = {
        "version": 1,
        "V": params.dim,
        "C": config.max_candidates,
        "logit_sign": config.logit_sign,
        "W0": params.w0.tolist(),
        "b0": params.b0.tolist(),
        "W1": params.w1.tolist(),
        "b1": params.b1.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path: str | Path) -> tuple[TransformParams, int, int]:
    """Returns (params, max_candidates, logit_sign)."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("version") != 1:
        raise ValueError(f"{path}: unsupported checkpoint version {obj.get('version')}")
    params = TransformParams(
        w0=np.array(obj["W0"], dtype=np.float64),
        b0=np.array(obj["b0"], dtype=np.float64),
        w1=np.array(obj["W1"], dtype=np.float64),
        b1=np.array(obj["b1"], dtype=np.float64),
    )
    params.validate()
    if params.dim != obj["V"]:
        raise ValueError(f"{path}: parameter length does not match V={obj['V']}")
    return params, int(obj["C"]), int(obj["logit_sign"])
