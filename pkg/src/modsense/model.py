"""Stacked-LSTM classifier: training protocol, inference, evaluation, sweeps.

Training uses minibatch Adam with per-epoch seeded shuffling. Variable-length
data is bucketed by exact sequence length and every minibatch is drawn from a
single bucket, so no padding is ever needed. The SNR floor filter applies to
training data only; evaluation always covers the full grid.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nncore
from .errors import ConfigurationError, ShapeError
from .features import psd_features, psd_from_frame, raw_iq_features, to_amp_phase
from .sigsynth import Dataset

CHECKPOINT_MAGIC = b"MSC1"


@dataclass(frozen=True)
class ClassifierConfig:
    depth: int = 2
    cells: int = 128
    input_dim: int = 2          # 2 for amp-phase / raw IQ, 1 for PSD
    n_classes: int = 11
    keep_prob: float = 0.8
    seed: int = 0


@dataclass(frozen=True)
class TrainConfig:
    minibatch: int = 400
    epochs: int = 70
    lr: float = 0.001
    snr_min_train: float | None = -10.0
    shuffle_seed: int = 0
    grad_clip: float | None = None  # global-norm clip; None disables
    lr_final: float | None = None   # cosine-decay target; None = constant lr
    weight_decay: float = 0.0       # L2 penalty added to the gradient


@dataclass
class SequenceDataset:
    """Feature sequences with labels, SNRs, and a train/test split."""
    sequences: list          # each (T_i, input_dim) float array
    labels: np.ndarray       # int class indices
    snrs: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    class_names: tuple
    feature_kind: str = "amp_phase"

    @property
    def input_dim(self) -> int:
        return self.sequences[0].shape[1]

    def __len__(self) -> int:
        return len(self.sequences)


def _build(ds: Dataset, fn, kind: str) -> SequenceDataset:
    schemes = sorted(ds.spec.schemes)
    index_of = {s: i for i, s in enumerate(schemes)}
    seqs = [fn(f) for f in ds.frames]
    labels = np.array([index_of[f.label] for f in ds.frames])
    snrs = np.array([f.snr_db for f in ds.frames])
    return SequenceDataset(sequences=seqs, labels=labels, snrs=snrs,
                           train_idx=ds.train_idx.copy(),
                           test_idx=ds.test_idx.copy(),
                           class_names=tuple(schemes), feature_kind=kind)


def amp_phase_dataset(ds: Dataset) -> SequenceDataset:
    return _build(ds, to_amp_phase, "amp_phase")


def raw_iq_dataset(ds: Dataset) -> SequenceDataset:
    return _build(ds, raw_iq_features, "raw_iq")


def psd_dataset(ds: Dataset, fft_size: int | None = None,
                avg_factor: int = 1) -> SequenceDataset:
    def fn(frame):
        return psd_features(psd_from_frame(frame, fft_size, avg_factor))
    return _build(ds, fn, "psd")


@dataclass
class TrainedModel:
    config: ClassifierConfig
    layers: list
    dense: nncore.DenseParams
    history: list = field(default_factory=list)  # per-epoch dicts
    provenance: dict = field(default_factory=dict)


def _length_buckets(indices: np.ndarray, sequences) -> dict:
    buckets: dict[int, list] = {}
    for i in indices:
        buckets.setdefault(len(sequences[int(i)]), []).append(int(i))
    return {k: np.array(v) for k, v in buckets.items()}


def train(data: SequenceDataset, cfg: ClassifierConfig,
          tcfg: TrainConfig) -> TrainedModel:
    """Train with minibatch Adam; minibatches never mix sequence lengths."""
    if data.input_dim != cfg.input_dim:
        raise ShapeError(
            f"dataset features are {data.input_dim}-dim, model expects "
            f"{cfg.input_dim}")
    train_idx = data.train_idx
    if tcfg.snr_min_train is not None:
        train_idx = train_idx[data.snrs[train_idx] >= tcfg.snr_min_train]
    if len(train_idx) == 0:
        raise ConfigurationError("no training frames left after SNR filtering")

    layers, dense = nncore.init_params(cfg.depth, cfg.cells, cfg.input_dim,
                                       cfg.n_classes, cfg.seed)
    params = nncore.param_arrays(layers, dense)
    state = nncore.AdamState(lr=tcfg.lr)
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed & (2**63 - 1), tcfg.shuffle_seed]))
    buckets = _length_buckets(train_idx, data.sequences)

    history = []
    for epoch in range(tcfg.epochs):
        if tcfg.lr_final is not None and tcfg.epochs > 1:
            frac = epoch / (tcfg.epochs - 1)
            state.lr = tcfg.lr_final + 0.5 * (tcfg.lr - tcfg.lr_final) * (
                1.0 + np.cos(np.pi * frac))
        batches = []
        for idx in buckets.values():
            perm = idx[rng.permutation(len(idx))]
            for s in range(0, len(perm), tcfg.minibatch):
                batches.append(perm[s:s + tcfg.minibatch])
        order = rng.permutation(len(batches))

        losses, correct, seen = [], 0, 0
        for bi in order:
            batch = batches[bi]
            x = np.stack([data.sequences[i] for i in batch]).astype(np.float32)
            y = data.labels[batch]
            h, caches = nncore.lstm_forward(
                x, layers, keep_prob=cfg.keep_prob, rng=rng, training=True)
            logits = nncore.dense_forward(h, dense)
            loss, grad_logits = nncore.softmax_cross_entropy(logits, y)
            lg, dg = nncore.bptt(caches, layers, dense, grad_logits)
            grads = nncore.param_arrays(lg, dg)
            if tcfg.weight_decay > 0.0:
                grads = [g + tcfg.weight_decay * p
                         for g, p in zip(grads, params)]
            if tcfg.grad_clip is not None:
                norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
                if norm > tcfg.grad_clip:
                    scale = tcfg.grad_clip / norm
                    grads = [g * scale for g in grads]
            nncore.adam_update(params, grads, state)
            losses.append(loss)
            correct += int(np.sum(np.argmax(logits, axis=1) == y))
            seen += len(batch)
        history.append({"loss": float(np.mean(losses)),
                        "accuracy": correct / seen})

    prov = {"n_train": int(len(train_idx)),
            "feature_kind": data.feature_kind,
            "classes": list(data.class_names),
            "train_config": asdict(tcfg)}
    return TrainedModel(config=cfg, layers=layers, dense=dense,
                        history=history, provenance=prov)


def predict(model: TrainedModel, seq: np.ndarray) -> np.ndarray:
    """Class probability vector for one sequence of any length."""
    seq = np.asarray(seq)
    if seq.ndim != 2 or seq.shape[1] != model.config.input_dim:
        raise ShapeError(
            f"expected (T, {model.config.input_dim}) sequence, got {seq.shape}")
    h, _ = nncore.lstm_forward(seq, model.layers)
    return nncore.softmax(nncore.dense_forward(h, model.dense))


def predict_batch(model: TrainedModel, sequences: list) -> np.ndarray:
    """Argmax class indices for many sequences, batched per length bucket."""
    preds = np.empty(len(sequences), dtype=int)
    buckets = _length_buckets(np.arange(len(sequences)), sequences)
    for idx in buckets.values():
        for s in range(0, len(idx), 512):
            chunk = idx[s:s + 512]
            x = np.stack([sequences[i] for i in chunk]).astype(np.float32)
            h, _ = nncore.lstm_forward(x, model.layers)
            logits = nncore.dense_forward(h, model.dense)
            preds[chunk] = np.argmax(logits, axis=1)
    return preds


@dataclass
class EvalReport:
    class_names: tuple
    snr_grid: np.ndarray
    acc_per_snr: np.ndarray       # same order as snr_grid
    overall_accuracy: float
    confusion: np.ndarray         # row-normalized, rows = truth
    counts: np.ndarray            # raw K x K counts

    def accuracy_at(self, snr_min: float) -> float:
        """Mean accuracy over grid points with SNR >= snr_min."""
        sel = self.snr_grid >= snr_min
        return float(np.mean(self.acc_per_snr[sel]))


def evaluate(model: TrainedModel, data: SequenceDataset,
             indices: np.ndarray | None = None,
             predictions: np.ndarray | None = None) -> EvalReport:
    """Per-SNR accuracy table and row-normalized confusion matrix."""
    if indices is None:
        indices = data.test_idx
    seqs = [data.sequences[int(i)] for i in indices]
    truth = data.labels[indices]
    snrs = data.snrs[indices]
    if predictions is None:
        predictions = predict_batch(model, seqs)

    k = len(data.class_names)
    counts = np.zeros((k, k), dtype=int)
    np.add.at(counts, (truth, predictions), 1)
    row_sums = counts.sum(axis=1, keepdims=True)
    confusion = np.divide(counts, row_sums, where=row_sums > 0,
                          out=np.zeros((k, k)))

    snr_grid = np.unique(snrs)
    acc = np.array([np.mean(predictions[snrs == s] == truth[snrs == s])
                    for s in snr_grid])
    overall = float(np.mean(predictions == truth))
    return EvalReport(class_names=data.class_names, snr_grid=snr_grid,
                      acc_per_snr=acc, overall_accuracy=overall,
                      confusion=confusion, counts=counts)


def sweep(depths: list, cells_list: list, data: SequenceDataset,
          tcfg: TrainConfig, base_cfg: ClassifierConfig | None = None,
          snr_min: float = 12.0) -> list:
    """Train one model per (depth, cells) pair; report high-SNR accuracy."""
    if not depths or not cells_list:
        raise ConfigurationError("sweep grids must be non-empty")
    if base_cfg is None:
        base_cfg = ClassifierConfig(input_dim=data.input_dim,
                                    n_classes=len(data.class_names))
    rows = []
    for depth in depths:
        for cells in cells_list:
            cfg = ClassifierConfig(
                depth=depth, cells=cells, input_dim=base_cfg.input_dim,
                n_classes=base_cfg.n_classes, keep_prob=base_cfg.keep_prob,
                seed=base_cfg.seed)
            m = train(data, cfg, tcfg)
            rep = evaluate(m, data)
            rows.append({"depth": depth, "cells": cells,
                         "accuracy": rep.accuracy_at(snr_min)})
    return rows


# -- checkpoint I/O --------------------------------------------------------

def save_model(model: TrainedModel, path) -> None:
    """JSON manifest + float32 parameter blob (see nncore blob order)."""
    blob = nncore.params_to_blob(model.layers, model.dense)
    manifest = {
        "config": asdict(model.config),
        "history": model.history,
        "provenance": model.provenance,
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
    }
    header = json.dumps(manifest, sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(blob)


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ShapeError(f"{path}: not a model checkpoint (bad magic)")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(hlen).decode("utf-8"))
        blob = fh.read()
    if hashlib.sha256(blob).hexdigest() != manifest["blob_sha256"]:
        raise ShapeError(f"{path}: parameter blob checksum mismatch")
    cfg = ClassifierConfig(**manifest["config"])
    layers, dense = nncore.params_from_blob(
        blob, cfg.depth, cfg.cells, cfg.input_dim, cfg.n_classes)
    return TrainedModel(config=cfg, layers=layers, dense=dense,
                        history=manifest["history"],
                        provenance=manifest["provenance"])
