"""Per-category WGAN-GP with a penalty on the critic's score for other categories.

The critic for category ``i`` minimises

    mean D(fake) - mean D(real) + lambda_gp * GP + lambda_other * mean D(other)

where ``other`` is real data from every sample not carrying label ``i``. The
last term pushes other categories' data towards low critic scores, so the
generator is steered away from them.

Because the three score terms carry unequal total weight (1 against
1 + lambda_other), the objective is not translation invariant in the critic's
input coordinates. Left in raw [0, 1] coordinates the critic learns a slope
towards the origin and the sigmoid generator collapses into that corner. The
critic therefore sees inputs centred on the mean of the training data
(``center_critic_inputs``); the loss as a function of the critic is unchanged.
"""

from __future__ import annotations

import hashlib
import json
import logging
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import MultiLabelDataset
from .errors import ArgumentError, DataError, DivergedTrainingError, ShapeError
from .nn import (
    FORMAT_VERSION,
    Checkpoint,
    MlpSpec,
    ModelParams,
    TrainConfig,
    as_tensor,
    forward,
    init_mlp,
    load_checkpoint,
    make_adam,
    save_checkpoint,
)

log = logging.getLogger(__name__)


@dataclass
class WganConfig:
    generator_spec: MlpSpec
    critic_spec: MlpSpec
    lambda_gp: float = 10.0
    lambda_other: float = 1.0
    noise_dim: int = 100
    critic_steps_per_gen: int = 5
    center_critic_inputs: bool = True
    train: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=64, epochs=200))

    def __post_init__(self):
        if self.lambda_gp < 0 or self.lambda_other < 0:
            raise ArgumentError("penalty weights must be non-negative")
        if self.noise_dim < 1 or self.critic_steps_per_gen < 1:
            raise ArgumentError("noise_dim and critic_steps_per_gen must be >= 1")
        if self.generator_spec.in_dim != self.noise_dim:
            raise ArgumentError("generator input width must equal noise_dim")
        if self.generator_spec.out_dim != self.critic_spec.in_dim or self.critic_spec.out_dim != 1:
            raise ArgumentError("critic must map generator outputs to a single score")

    @classmethod
    def from_widths(cls, generator, critic, **kw):
        g = MlpSpec.parse(generator, "sigmoid")
        return cls(g, MlpSpec.parse(critic, "identity"), noise_dim=g.in_dim, **kw)

    @classmethod
    def unsw(cls, **kw):
        return cls.from_widths("100-64-128-256-42", "42-64-32-24-1", **kw)

    @classmethod
    def andmal(cls, **kw):
        return cls.from_widths("100-128-256-512-64", "64-128-64-24-1", **kw)

    def to_dict(self):
        d = asdict(self)
        d["generator_spec"] = self.generator_spec.to_dict()
        d["critic_spec"] = self.critic_spec.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        g = MlpSpec.from_dict(d.pop("generator_spec"))
        c = MlpSpec.from_dict(d.pop("critic_spec"))
        t = TrainConfig(**d.pop("train", {}))
        return cls(g, c, train=t, **d)

    def digest(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def category_seed(seed, category):
    return (int(seed) + zlib.crc32(str(category).encode())) % (2**31)


# ------------------------------------------------------------------- losses


def critic_scores(critic: ModelParams, batch, center=None):
    x = as_tensor(batch)
    return forward(critic, x if center is None else x - center)


def gradient_penalty(critic: ModelParams, real_batch, fake_batch, seed=0, center=None):
    """Mean squared deviation of the critic's input-gradient norm from 1.

    Evaluated at per-row interpolates ``eps * real + (1 - eps) * fake``. The
    result stays differentiable with respect to the critic's parameters.
    ``seed`` may be an int or a ``torch.Generator``.
    """
    real = as_tensor(real_batch).detach()
    fake = as_tensor(fake_batch).detach()
    if real.shape != fake.shape or real.ndim != 2 or real.shape[0] < 1:
        raise ShapeError(f"real {tuple(real.shape)} and fake {tuple(fake.shape)} batches must match")
    gen = seed if isinstance(seed, torch.Generator) else torch.Generator().manual_seed(int(seed))
    eps = torch.rand((real.shape[0], 1), generator=gen, dtype=real.dtype)
    mixed = (eps * real + (1.0 - eps) * fake).requires_grad_(True)
    scores = critic_scores(critic, mixed, center)
    (grad,) = torch.autograd.grad(scores.sum(), mixed, create_graph=True)
    return ((torch.linalg.vector_norm(grad, dim=1) - 1.0) ** 2).mean()


def wgan_gp_loss(critic_on_fake, critic_on_real, gp, lambda_gp=10.0):
    """Plain WGAN-GP critic loss."""
    return critic_on_fake.mean() - critic_on_real.mean() + lambda_gp * gp


def critic_loss(critic_on_fake, critic_on_real, critic_on_other, gp, cfg):
    """Critic objective with the other-category penalty; reduces to
    :func:`wgan_gp_loss` exactly when ``lambda_other`` is zero."""
    lam_gp, lam_other = cfg.lambda_gp, cfg.lambda_other
    fake, real = _vec(critic_on_fake), _vec(critic_on_real)
    if fake.numel() == 0 or real.numel() == 0:
        raise ArgumentError("critic score vectors must be non-empty")
    loss = wgan_gp_loss(fake, real, gp, lam_gp)
    if lam_other != 0:
        other = _vec(critic_on_other)
        if other.numel() == 0:
            raise ArgumentError("other-category batch is empty but lambda_other > 0")
        loss = loss + lam_other * other.mean()
    return loss


def _vec(x):
    if x is None:
        return torch.zeros(0, dtype=torch.float64)
    return x.reshape(-1) if isinstance(x, torch.Tensor) else torch.as_tensor(np.asarray(x, dtype=float)).reshape(-1)


def generator_loss(critic: ModelParams, fake_batch, center=None):
    return -critic_scores(critic, fake_batch, center).mean()


# ----------------------------------------------------------------- training


@dataclass
class CategoryGenerator:
    category: str
    generator: Checkpoint
    fitted_feature_dim: int
    seed: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.generator.spec.out_dim != self.fitted_feature_dim:
            raise ShapeError("generator output width must equal fitted_feature_dim")

    @property
    def params(self):
        return self.generator.params

    def save(self, path):
        return save_checkpoint(self.generator.spec, self.params, path,
                               extra={"category": self.category, "seed": self.seed})

    @classmethod
    def load(cls, path):
        ck = load_checkpoint(path)
        return cls(ck.extra["category"], ck, ck.spec.out_dim, ck.extra.get("seed", 0))


def _in_memory_checkpoint(params):
    return Checkpoint(params.spec, params, FORMAT_VERSION, params.digest())


def category_pools(data: MultiLabelDataset, category):
    mask = np.array([category in y for y in data.labels], dtype=bool)
    return data.features[mask], data.features[~mask]


def train_category_wgan(data: MultiLabelDataset, category, cfg: WganConfig, seed=None) -> CategoryGenerator:
    real_np, other_np = category_pools(data, category)
    bs = cfg.train.batch_size
    if len(real_np) < bs:
        raise DataError(f"category {category!r} has {len(real_np)} samples, fewer than batch size {bs}")
    if real_np.shape[1] != cfg.critic_spec.in_dim:
        raise ShapeError(f"features have width {real_np.shape[1]}, critic expects {cfg.critic_spec.in_dim}")
    if cfg.lambda_other > 0 and len(other_np) == 0:
        raise DataError(f"no samples outside category {category!r} for the other-category penalty")
    seed = category_seed(cfg.train.seed, category) if seed is None else int(seed)
    real = torch.as_tensor(real_np)
    other = torch.as_tensor(other_np)
    center = torch.as_tensor(np.asarray(data.features, dtype=float).mean(axis=0)) if cfg.center_critic_inputs else None

    def score(x):
        return critic_scores(D, x, center)

    G = init_mlp(cfg.generator_spec, seed).clone(requires_grad=True)
    D = init_mlp(cfg.critic_spec, seed + 1).clone(requires_grad=True)
    opt_g = make_adam(G.tensors(), cfg.train)
    opt_d = make_adam(D.tensors(), cfg.train)
    gen = torch.Generator().manual_seed(seed)
    z_eval = torch.randn((min(len(real), 512), cfg.noise_dim), generator=gen, dtype=torch.float64)

    history = []
    critic_steps = 0
    for epoch in range(cfg.train.epochs):
        perm = torch.randperm(len(real), generator=gen)
        d_total = g_total = 0.0
        d_count = g_count = 0
        for b, start in enumerate(range(0, len(real) - bs + 1, bs)):
            real_b = real[perm[start:start + bs]]
            z = torch.randn((bs, cfg.noise_dim), generator=gen, dtype=torch.float64)
            with torch.no_grad():
                fake_b = forward(G, z)
            other_b = other[torch.randint(len(other), (bs,), generator=gen)] if len(other) else None
            gp = gradient_penalty(D, real_b, fake_b, gen, center)
            loss = critic_loss(score(fake_b), score(real_b),
                               score(other_b) if other_b is not None else None, gp, cfg)
            value = float(loss.detach())
            if not np.isfinite(value):
                raise DivergedTrainingError(epoch + 1, b + 1, value)
            opt_d.zero_grad()
            loss.backward()
            opt_d.step()
            d_total += value
            d_count += 1
            critic_steps += 1
            if critic_steps % cfg.critic_steps_per_gen == 0:
                z = torch.randn((bs, cfg.noise_dim), generator=gen, dtype=torch.float64)
                g_loss = generator_loss(D, forward(G, z), center)
                opt_g.zero_grad()
                g_loss.backward()
                opt_g.step()
                g_total += float(g_loss.detach())
                g_count += 1
        with torch.no_grad():
            gap = float(score(real).mean() - score(forward(G, z_eval)).mean())
        record = {
            "epoch": epoch + 1,
            "critic_loss": d_total / max(d_count, 1),
            "generator_loss": g_total / g_count if g_count else None,
            "critic_gap": gap,
        }
        history.append(record)
        log.debug("wgan[%s] epoch %d critic %.4f gap %.4f", category, epoch + 1, record["critic_loss"], gap)
    params = G.clone(requires_grad=False)
    return CategoryGenerator(category, _in_memory_checkpoint(params), cfg.generator_spec.out_dim, seed, history)


def train_generators(data: MultiLabelDataset, cfg: WganConfig, categories=None, exclude=(), skip_insufficient=False):
    """Train one generator per category (default: every category present in ``data``)."""
    if categories is None:
        categories = [c for c in data.label_vocabulary if any(c in y for y in data.labels)]
    out = []
    for cat in categories:
        if cat in exclude:
            continue
        try:
            out.append(train_category_wgan(data, cat, cfg))
        except DataError:
            if not skip_insufficient:
                raise
            log.warning("skipping generator for %s: too few samples", cat)
    return out


def generate(gen: CategoryGenerator, n, seed=0):
    if n < 1:
        raise ArgumentError("n must be >= 1")
    g = torch.Generator().manual_seed(int(seed))
    z = torch.randn((int(n), gen.params.spec.in_dim), generator=g, dtype=torch.float64)
    with torch.no_grad():
        return forward(gen.params, z).numpy()


@dataclass
class AugmentedDataset:
    """Feature rows of the real data plus generated rows, with provenance per row."""

    features: np.ndarray
    provenance: np.ndarray     # "real" / "generated"
    source: list               # generating category, or None for real rows

    def __len__(self):
        return len(self.provenance)

    @property
    def n_generated(self):
        return int((self.provenance == "generated").sum())

    def real_only(self):
        return self.features[self.provenance == "real"]


def build_augmented(raw: MultiLabelDataset, generators, per_category, seed=0) -> AugmentedDataset:
    feats = [np.asarray(raw.features, dtype=float)]
    prov = ["real"] * len(raw)
    source = [None] * len(raw)
    if per_category > 0:
        for gen in generators:
            if gen.fitted_feature_dim != raw.dim:
                raise ShapeError(f"generator for {gen.category} emits width {gen.fitted_feature_dim}, data has {raw.dim}")
            rows = generate(gen, per_category, category_seed(seed, gen.category))
            feats.append(rows)
            prov += ["generated"] * len(rows)
            source += [gen.category] * len(rows)
    return AugmentedDataset(np.concatenate(feats), np.asarray(prov), source)


def write_generated_pool(aug: AugmentedDataset, real: MultiLabelDataset, path, scaler=None):
    """Write the augmented pool in the canonical row format with a provenance column.

    Real rows keep their label sets and counts; generated rows carry only the
    generating category (as provenance, not as a training label).
    """
    import pandas as pd

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(aug.features, columns=list(real.feature_names))
    n = len(real)
    df["labels"] = [";".join(sorted(y)) for y in real.labels] + [str(s) for s in aug.source[n:]]
    df["counts"] = [";".join(f"{k}:{v}" for k, v in sorted(m.items())) for m in real.multiplicity] + \
        [f"{s}:1" for s in aug.source[n:]]
    df["provenance"] = aug.provenance
    df.to_csv(path, index=False, float_format="%.17g")
    sidecar = {"label_vocabulary": list(real.label_vocabulary), "n_real": n, "n_generated": aug.n_generated,
               "scaler": scaler.to_dict() if scaler is not None else None}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def full_scale_per_category(n_categories, total=300_000):
    return total // n_categories


def write_generator_bundle(generators, cfg: WganConfig, per_category, seed, out_dir):
    """Persist generator checkpoints plus a JSON manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for gen in generators:
        fname = f"generator_{gen.category}.npz"
        ck = gen.save(out_dir / fname)
        manifest.append({"category": gen.category, "count": per_category, "seed": gen.seed,
                         "config_digest": cfg.digest(), "checkpoint": fname,
                         "content_digest": ck.content_digest})
    (out_dir / "generators.json").write_text(json.dumps(manifest, indent=2))
    return manifest
