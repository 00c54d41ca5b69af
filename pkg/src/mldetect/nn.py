"""Dense-network substrate shared by the GAN, the autoencoder and the classifier.

Parameters are plain float64 torch tensors held in :class:`ModelParams`; torch's
autograd supplies exact gradients, including the second-order terms needed when a
loss contains input-gradients of a network.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import (
    ArgumentError,
    CheckpointCorruptError,
    CheckpointVersionError,
    DivergedTrainingError,
    ShapeError,
)

log = logging.getLogger(__name__)

DTYPE = torch.float64
FORMAT_VERSION = 1
OUTPUT_ACTIVATIONS = ("identity", "sigmoid", "softmax", "leaky_relu")


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple
    output_activation: str = "identity"
    negative_slope: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 2 or min(self.layer_widths) < 1:
            raise ArgumentError(f"need at least two positive widths, got {self.layer_widths}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ArgumentError(f"unknown output activation {self.output_activation!r}")

    @property
    def in_dim(self):
        return self.layer_widths[0]

    @property
    def out_dim(self):
        return self.layer_widths[-1]

    @property
    def n_weights(self):
        w = self.layer_widths
        return sum(a * b for a, b in zip(w[:-1], w[1:]))

    @property
    def n_params(self):
        return self.n_weights + sum(self.layer_widths[1:])

    def to_dict(self):
        d = asdict(self)
        d["layer_widths"] = list(self.layer_widths)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["layer_widths"]), d.get("output_activation", "identity"),
                   d.get("negative_slope", 0.01))

    @classmethod
    def parse(cls, text, output_activation="identity"):
        """Build from a dash-separated width string such as ``"42-512-256"``."""
        return cls(tuple(int(t) for t in str(text).split("-")), output_activation)


@dataclass
class ModelParams:
    spec: MlpSpec
    weights: list
    biases: list
    init_seed: int | None = None

    def __post_init__(self):
        w = self.spec.layer_widths
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if tuple(W.shape) != (w[i], w[i + 1]) or tuple(b.shape) != (w[i + 1],):
                raise ShapeError(f"layer {i}: shapes {tuple(W.shape)}, {tuple(b.shape)} do not match {w}")
        if len(self.weights) != len(w) - 1:
            raise ShapeError("layer count does not match spec")

    def tensors(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def clone(self, requires_grad=False):
        def c(t):
            return t.detach().clone().requires_grad_(requires_grad)

        return ModelParams(self.spec, [c(W) for W in self.weights], [c(b) for b in self.biases], self.init_seed)

    def arrays(self):
        return [t.detach().numpy().copy() for t in self.tensors()]

    def equal(self, other):
        return self.spec == other.spec and all(
            torch.equal(a.detach(), b.detach()) for a, b in zip(self.tensors(), other.tensors())
        )

    def digest(self):
        return _digest(self.arrays())


def init_mlp(spec: MlpSpec, seed: int) -> ModelParams:
    """Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)); zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(torch.tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), dtype=DTYPE))
        biases.append(torch.zeros(fan_out, dtype=DTYPE))
    return ModelParams(spec, weights, biases, seed)


def as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x if x.dtype == DTYPE else x.to(DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def _activate(z, name, slope):
    if name == "identity":
        return z
    if name == "sigmoid":
        return torch.sigmoid(z)
    if name == "softmax":
        return torch.softmax(z, dim=-1)
    return torch.nn.functional.leaky_relu(z, slope)


def forward(params: ModelParams, batch, *, apply_output=True):
    """Affine-then-activation through every layer.

    With ``apply_output=False`` the last layer's pre-activation is returned
    (logits), which is what the numerically stable losses consume.
    """
    x = as_tensor(batch)
    if x.ndim != 2 or x.shape[1] != params.spec.in_dim:
        raise ShapeError(f"expected batch of width {params.spec.in_dim}, got {tuple(x.shape)}")
    spec = params.spec
    last = len(params.weights) - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        x = x @ W + b
        if i < last:
            x = torch.nn.functional.leaky_relu(x, spec.negative_slope)
        elif apply_output:
            x = _activate(x, spec.output_activation, spec.negative_slope)
    return x


def forward_numpy(params, batch):
    with torch.no_grad():
        return forward(params, batch).numpy()


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 100
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ArgumentError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ArgumentError("epochs must be >= 0")

    def to_dict(self):
        return asdict(self)


def make_adam(tensors, config: TrainConfig):
    return torch.optim.Adam(tensors, lr=config.learning_rate,
                            betas=(config.beta1, config.beta2), eps=config.eps)


def train_steps(params, loss_fn, config: TrainConfig, data, *, on_epoch=None, name="train"):
    """Minimise ``loss_fn`` with Adam over shuffled mini-batches.

    ``params`` is a ModelParams or a list of them (trained jointly); ``data`` an
    array or tuple of arrays sharing their first axis. ``loss_fn(params, *batch)``
    must return a scalar tensor. ``on_epoch(epoch, params)`` may return a dict of
    extra values to record. Returns ``(trained_params, history)``; the inputs are
    not modified.
    """
    single = isinstance(params, ModelParams)
    work = [p.clone(requires_grad=True) for p in ([params] if single else params)]
    target = work[0] if single else work
    arrays = data if isinstance(data, tuple) else (data,)
    arrays = tuple(a if isinstance(a, torch.Tensor) else torch.as_tensor(np.asarray(a)) for a in arrays)
    n = len(arrays[0])
    opt = make_adam([t for p in work for t in p.tensors()], config)
    gen = torch.Generator().manual_seed(int(config.seed))
    history = []
    step = 0
    for epoch in range(config.epochs):
        perm = torch.randperm(n, generator=gen)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = perm[start:start + config.batch_size]
            loss = loss_fn(target, *(a[idx] for a in arrays))
            value = float(loss.detach())
            if not math.isfinite(value):
                raise DivergedTrainingError(epoch + 1, b + 1, value)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += value * len(idx)
            step += 1
        record = {"epoch": epoch + 1, "step": step, "loss": total / max(n, 1)}
        if on_epoch is not None:
            record.update(on_epoch(epoch + 1, target) or {})
        log.info("%s epoch %d loss %.6f", name, epoch + 1, record["loss"])
        history.append(record)
    done = [p.clone(requires_grad=False) for p in work]
    return (done[0] if single else done), history


# ----------------------------------------------------------------- checkpoints


def _digest(arrays):
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(f"{a.dtype.str}{a.shape}".encode())
        h.update(a.tobytes())
    return h.hexdigest()


@dataclass
class Checkpoint:
    spec: MlpSpec
    params: ModelParams
    format_version: int = FORMAT_VERSION
    content_digest: str = ""
    extra: dict = field(default_factory=dict)


def save_checkpoint(spec: MlpSpec, params: ModelParams, path, extra=None) -> Checkpoint:
    arrays = params.arrays()
    digest = _digest(arrays)
    meta = {
        "format_version": FORMAT_VERSION,
        "spec": spec.to_dict(),
        "init_seed": params.init_seed,
        "content_digest": digest,
        "extra": extra or {},
    }
    payload = {f"p{i}": a for i, a in enumerate(arrays)}
    payload["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **payload)
    Path(path).write_bytes(buf.getvalue())
    return Checkpoint(spec, params, FORMAT_VERSION, digest, extra or {})


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(bytes(z["meta"]).decode())
            n = len(meta["spec"]["layer_widths"]) - 1
            arrays = [z[f"p{i}"] for i in range(2 * n)]
    except FileNotFoundError:
        raise
    except (zipfile.BadZipFile, ValueError, KeyError, EOFError, OSError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"{path}: unreadable checkpoint ({exc})") from exc
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: format_version {version}, expected {FORMAT_VERSION}")
    if _digest(arrays) != meta.get("content_digest"):
        raise CheckpointCorruptError(f"{path}: content digest mismatch")
    spec = MlpSpec.from_dict(meta["spec"])
    tensors = [torch.from_numpy(a.copy()) for a in arrays]
    params = ModelParams(spec, tensors[0::2], tensors[1::2], meta.get("init_seed"))
    return Checkpoint(spec, params, version, meta["content_digest"], meta.get("extra", {}))
