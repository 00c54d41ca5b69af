"""Unbalanced-autoencoder pre-training, encoder+softmax fine-tuning and detection."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .data import MultiLabelDataset, ScalerModel, scaler_from_dict
from .errors import ArgumentError, ContractViolation, DataError, ShapeError
from .labels import PowersetCodec, set_key
from .nn import (
    FORMAT_VERSION,
    Checkpoint,
    MlpSpec,
    ModelParams,
    TrainConfig,
    forward,
    init_mlp,
    load_checkpoint,
    save_checkpoint,
    train_steps,
)
from .wgan import AugmentedDataset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AeSpec:
    encoder: MlpSpec
    decoder: MlpSpec

    def __post_init__(self):
        if self.encoder.out_dim != self.decoder.in_dim:
            raise ArgumentError("encoder output width must equal decoder input width")
        if self.decoder.out_dim != self.encoder.in_dim:
            raise ArgumentError("decoder must reconstruct the encoder's input width")
        if self.decoder.output_activation != "sigmoid":
            raise ArgumentError("decoder output must be sigmoid for the BCE reconstruction loss")
        if self.encoder.n_params <= self.decoder.n_params:
            raise ArgumentError("encoder must hold more parameters than the decoder")

    @classmethod
    def from_widths(cls, encoder, decoder):
        return cls(MlpSpec.parse(encoder, "leaky_relu"), MlpSpec.parse(decoder, "sigmoid"))

    @classmethod
    def unsw(cls):
        return cls.from_widths("42-512-256-128-64", "64-42")

    @classmethod
    def andmal(cls):
        return cls.from_widths("64-1024-512-256-128", "128-64")


def _features(data):
    if isinstance(data, AugmentedDataset):
        return data.features
    if hasattr(data, "features"):
        return np.asarray(data.features, dtype=float)
    return np.asarray(data, dtype=float)


def _check_unit_range(X):
    bad = np.argwhere((X < 0) | (X > 1) | ~np.isfinite(X))
    if len(bad):
        r, c = bad[0]
        raise DataError(f"feature outside [0, 1] at row {r}, column {c}: {X[r, c]}")


def reconstruction_loss(params, x):
    encoder, decoder = params
    logits = forward(decoder, forward(encoder, x), apply_output=False)
    return F.binary_cross_entropy_with_logits(logits, x)


def pretrain_ae(pool, spec: AeSpec, cfg: TrainConfig) -> Checkpoint:
    """Unsupervised BCE reconstruction training; returns the encoder checkpoint.

    The per-epoch loss history is kept in ``checkpoint.extra["history"]``.
    """
    X = _features(pool)
    if X.ndim != 2 or X.shape[1] != spec.encoder.in_dim:
        raise ShapeError(f"pre-training data width {X.shape} does not match encoder input {spec.encoder.in_dim}")
    _check_unit_range(X)
    enc = init_mlp(spec.encoder, cfg.seed)
    dec = init_mlp(spec.decoder, cfg.seed + 1)
    (enc, dec), history = train_steps([enc, dec], reconstruction_loss, cfg, torch.as_tensor(X), name="pretrain")
    return Checkpoint(spec.encoder, enc, FORMAT_VERSION, enc.digest(),
                      {"history": history, "decoder": dec})


def bce_floor(row):
    """Lowest achievable mean BCE when reconstructing a constant ``row``."""
    p = np.clip(np.asarray(row, dtype=float), 1e-300, 1.0)
    q = np.clip(1.0 - np.asarray(row, dtype=float), 1e-300, 1.0)
    return float(np.mean(-(row * np.log(p) + (1 - row) * np.log(q))))


# --------------------------------------------------------------- classifier


@dataclass
class MldClassifier:
    encoder: ModelParams
    head: ModelParams
    codec: PowersetCodec
    pretrained_from: str | None = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.head.spec.out_dim != len(self.codec):
            raise ShapeError(f"head width {self.head.spec.out_dim} != {len(self.codec)} codec classes")
        if self.head.spec.in_dim != self.encoder.spec.out_dim:
            raise ShapeError("head input width must equal encoder output width")

    @property
    def in_dim(self):
        return self.encoder.spec.in_dim

    def logits(self, X):
        return forward(self.head, forward(self.encoder, X), apply_output=False)

    def probabilities(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.in_dim) if not isinstance(X, torch.Tensor) else X
        with torch.no_grad():
            return forward(self.head, forward(self.encoder, X)).numpy()

    def predict_ids(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ShapeError(f"expected samples of width {self.in_dim}, got {X.shape}")
        if len(X) == 0:
            return np.zeros(0, dtype=int)
        return np.argmax(self.probabilities(X), axis=1)

    def save(self, directory, scaler: ScalerModel | None = None, config=None, pretrained: Checkpoint | None = None):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        enc = save_checkpoint(self.encoder.spec, self.encoder, d / "encoder.npz")
        head = save_checkpoint(self.head.spec, self.head, d / "head.npz")
        self.codec.save(d / "codec.json")
        if scaler is not None:
            (d / "scaler.json").write_text(json.dumps(scaler.to_dict()))
        if pretrained is not None:
            save_checkpoint(pretrained.spec, pretrained.params, d / "pretrained_encoder.npz")
        manifest = {
            "format_version": FORMAT_VERSION,
            "encoder_digest": enc.content_digest,
            "head_digest": head.content_digest,
            "pretrained_from": self.pretrained_from,
            "n_classes": len(self.codec),
            "config": config or {},
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2))

    @classmethod
    def load(cls, directory):
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        enc = load_checkpoint(d / "encoder.npz")
        head = load_checkpoint(d / "head.npz")
        if enc.content_digest != manifest["encoder_digest"] or head.content_digest != manifest["head_digest"]:
            raise ContractViolation(f"{d}: checkpoint digests differ from the manifest")
        pre = d / "pretrained_encoder.npz"
        if manifest.get("pretrained_from") and pre.exists():
            if load_checkpoint(pre).content_digest != manifest["pretrained_from"]:
                raise ContractViolation(f"{d}: pre-trained encoder does not match recorded digest")
        return cls(enc.params, head.params, PowersetCodec.load(d / "codec.json"), manifest.get("pretrained_from"))


def load_scaler(directory):
    p = Path(directory) / "scaler.json"
    return scaler_from_dict(json.loads(p.read_text())) if p.exists() else None


def _reject_generated(train):
    if isinstance(train, AugmentedDataset):
        raise ContractViolation("generated data is only used for pre-training, not fine-tuning")
    prov = getattr(train, "metadata", {}).get("provenance")
    if prov is not None and any(p == "generated" for p in prov):
        raise ContractViolation("generated-provenance rows present in the fine-tuning set")


def build_and_finetune(encoder_ckpt: Checkpoint | None, train: MultiLabelDataset, codec: PowersetCodec,
                       cfg: TrainConfig, *, encoder_spec: MlpSpec | None = None,
                       weighting="unique", track_subsetacc=True) -> MldClassifier:
    """Stack the (pre-trained) encoder and a softmax head; train all of it with cross-entropy.

    Each unique sample counts once unless ``weighting="multiplicity"``. With
    ``track_subsetacc`` the training-set subset accuracy is logged per epoch.
    """
    _reject_generated(train)
    y = torch.as_tensor(codec.encode_many(train.labels), dtype=torch.long)
    if encoder_ckpt is not None:
        encoder = encoder_ckpt.params.clone()
        pretrained_from = encoder_ckpt.content_digest
    else:
        if encoder_spec is None:
            raise ArgumentError("encoder_spec is required when no pre-trained encoder is given")
        encoder = init_mlp(encoder_spec, cfg.seed)
        pretrained_from = None
    if encoder.spec.in_dim != train.dim:
        raise ShapeError(f"training features have width {train.dim}, encoder expects {encoder.spec.in_dim}")
    head = init_mlp(MlpSpec((encoder.spec.out_dim, len(codec)), "softmax"), cfg.seed + 2)
    X = torch.as_tensor(np.asarray(train.features, dtype=float))
    if weighting == "unique":
        w = torch.ones(len(train), dtype=torch.float64)
    elif weighting == "multiplicity":
        w = torch.as_tensor(train.totals, dtype=torch.float64)
    else:
        raise ArgumentError(f"unknown weighting {weighting!r}")

    def loss_fn(params, xb, yb, wb):
        enc, hd = params
        logits = forward(hd, forward(enc, xb), apply_output=False)
        ce = F.cross_entropy(logits, yb, reduction="none")
        return (ce * wb).sum() / wb.sum()

    def on_epoch(epoch, params):
        if not track_subsetacc:
            return None
        with torch.no_grad():
            pred = forward(params[1], forward(params[0], X), apply_output=False).argmax(dim=1)
        return {"subsetacc_train": float((pred == y).double().mean())}

    (encoder, head), history = train_steps([encoder, head], loss_fn, cfg, (X, y, w), on_epoch=on_epoch, name="finetune")
    return MldClassifier(encoder, head, codec, pretrained_from, history)


def epochs_to_threshold(history, threshold, key="subsetacc_train"):
    """First epoch whose ``key`` reaches ``threshold``, or None."""
    for rec in history:
        if rec.get(key) is not None and rec[key] >= threshold:
            return rec["epoch"]
    return None


def predict(model: MldClassifier, samples):
    return [model.codec.decode(i) for i in model.predict_ids(samples)]


def detect_report(model: MldClassifier, unknown):
    X = np.asarray(unknown, dtype=float).reshape(-1, model.in_dim)
    sets = predict(model, X)
    set_counts = Counter(";".join(set_key(y)) for y in sets)
    label_counts = Counter(lab for y in sets for lab in y)
    return {
        "n": len(sets),
        "rows": [list(set_key(y)) for y in sets],
        "set_counts": dict(sorted(set_counts.items())),
        "label_counts": dict(sorted(label_counts.items())),
    }
