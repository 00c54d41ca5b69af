"""Run configuration, corpus preparation and the experiment runners behind the CLI.

A run is: prepare the corpus (load or synthesize, encode, multilabelize,
split), then for every evaluation unit (one train/test split, or k folds of
the training corpus) fit the scaler and codec on the training part only,
train, and evaluate. Reports are JSON and carry the config digest and seed;
every field except the phase timings is reproducible from the config.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .baselines import STRATEGIES, LEARNERS, BaseLearnerSpec, fit_baseline, predict_baseline
from .data import (
    UNSW_CATEGORICAL,
    MultiLabelDataset,
    RawDataset,
    ScalerChain,
    apply_scaler,
    cross_split_duplicates,
    encode_features,
    fit_scaler,
    kfold_indices,
    load_csv_corpus,
    multilabelize,
    split,
)
from .errors import ArgumentError, ComparisonError, InputError, MldError, UsageError
from .labels import fit_codec
from .metrics import METRIC_FIELDS, evaluate, lcard, ldiv
from .model import AeSpec, build_and_finetune, epochs_to_threshold, predict, pretrain_ae
from .nn import TrainConfig, save_checkpoint
from .synth import SynthGroundTruth, SynthSpec, synth_generate
from .wgan import WganConfig, build_augmented, train_generators, write_generated_pool, write_generator_bundle

log = logging.getLogger(__name__)

PRETRAIN_SOURCES = ("none", "raw", "augmented")
DATASET_KINDS = ("synth", "unsw-nb15", "andmal-2020", "generic")
# metrics where lower is better
LOWER_IS_BETTER = {"hloss"}


# ---------------------------------------------------------------- configuration


@dataclass
class DatasetConfig:
    kind: str = "synth"
    paths: list = field(default_factory=list)
    test_paths: list = field(default_factory=list)
    synth: dict = field(default_factory=dict)
    categorical_columns: list | None = None
    pca_dim: int | None = None
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise UsageError(f"unknown dataset kind {self.kind!r}; choose from {DATASET_KINDS}")
        if self.kind != "synth" and not self.paths:
            raise UsageError(f"dataset kind {self.kind!r} needs at least one path")
        if not 0 < self.test_fraction < 1:
            raise UsageError("test_fraction must be in (0, 1)")
        self.paths = [str(p) for p in self.paths]
        self.test_paths = [str(p) for p in self.test_paths]


@dataclass
class PipelineConfig:
    augment: bool = True
    pretrain: str = "augmented"
    per_category: int = 1000
    exclude_categories: list = field(default_factory=list)
    folds: int = 0
    weighting: str = "unique"
    # training Subsetacc for epochs-to-threshold; None means 0.9 x the Bayes
    # reference on the training part (synthetic corpora only)
    threshold: float | None = None

    def __post_init__(self):
        if self.pretrain not in PRETRAIN_SOURCES:
            raise UsageError(f"pretrain must be one of {PRETRAIN_SOURCES}, got {self.pretrain!r}")
        if self.pretrain == "augmented" and not self.augment:
            raise UsageError("pretrain=augmented needs augment enabled")
        if self.per_category < 0:
            raise UsageError("per_category must be >= 0")
        if self.folds < 0 or self.folds == 1:
            raise UsageError("folds must be 0 (single split) or >= 2")
        if self.weighting not in ("unique", "multiplicity"):
            raise UsageError(f"unknown weighting {self.weighting!r}")


def _train_cfg(d, **defaults):
    if isinstance(d, TrainConfig):
        return d
    merged = dict(defaults)
    merged.update(d or {})
    try:
        return TrainConfig(**merged)
    except TypeError as exc:
        raise UsageError(f"bad training section: {exc}") from None


@dataclass
class NetworkConfig:
    generator: str = "100-64-64-8"
    critic: str = "8-64-32-1"
    encoder: str = "8-128-64-32"
    decoder: str = "32-8"
    lambda_gp: float = 10.0
    lambda_other: float = 1.0
    critic_steps_per_gen: int = 5
    center_critic_inputs: bool = True
    wgan_train: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=64, epochs=200))
    pretrain_train: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=256, epochs=50))
    finetune_train: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=256, epochs=100))

    def __post_init__(self):
        self.wgan_train = _train_cfg(self.wgan_train, batch_size=64, epochs=200)
        self.pretrain_train = _train_cfg(self.pretrain_train, batch_size=256, epochs=50)
        self.finetune_train = _train_cfg(self.finetune_train, batch_size=256, epochs=100)
        self.ae_spec()
        self.wgan_config(0)

    def ae_spec(self):
        return AeSpec.from_widths(self.encoder, self.decoder)

    def wgan_config(self, seed):
        return WganConfig.from_widths(
            self.generator, self.critic, lambda_gp=self.lambda_gp, lambda_other=self.lambda_other,
            critic_steps_per_gen=self.critic_steps_per_gen, center_critic_inputs=self.center_critic_inputs,
            train=dataclasses.replace(self.wgan_train, seed=seed),
        )


@dataclass
class BaselineConfig:
    strategy: str = "mlknn"
    learner: str | None = None
    hyperparameters: dict = field(default_factory=dict)
    k: int = 10
    s: float = 1.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES + ("mlknn",):
            raise UsageError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES + ('mlknn',)}")
        if self.strategy != "mlknn":
            if self.learner is None:
                raise UsageError(f"strategy {self.strategy!r} needs a base learner")
            if self.learner not in LEARNERS:
                raise UsageError(f"unknown base learner {self.learner!r}; choose from {LEARNERS}")

    @property
    def name(self):
        return "mlknn" if self.strategy == "mlknn" else f"{self.strategy}/{self.learner}"


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    seed: int = 0
    out: str = "runs/default"

    def to_dict(self):
        return json.loads(json.dumps(dataclasses.asdict(self)))

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        sections = {"dataset": DatasetConfig, "pipeline": PipelineConfig,
                    "network": NetworkConfig, "baseline": BaselineConfig}
        unknown = set(d) - set(sections) - {"seed", "out"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for key, klass in sections.items():
            try:
                kw[key] = klass(**(d.get(key) or {}))
            except TypeError as exc:
                raise UsageError(f"bad [{key}] section: {exc}") from None
        return cls(seed=int(d.get("seed", 0)), out=str(d.get("out", "runs/default")), **kw)

    def digest(self):
        """Hash of everything that affects results (the output directory does not)."""
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def replace(self, **kw):
        d = self.to_dict()
        for key, value in kw.items():
            section, _, name = key.partition(".")
            if name:
                d[section][name] = value
            else:
                d[key] = value
        return RunConfig.from_dict(d)

    def to_yaml(self, path=None):
        text = yaml.safe_dump(self.to_dict(), sort_keys=False)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_yaml(cls, path):
        p = Path(path)
        if not p.exists():
            raise InputError(p)
        try:
            d = yaml.safe_load(p.read_text())
        except yaml.YAMLError as exc:
            raise UsageError(f"{p}: not valid YAML ({exc})") from None
        if d is not None and not isinstance(d, dict):
            raise UsageError(f"{p}: top level must be a mapping")
        return cls.from_dict(d)

    # presets

    @classmethod
    def desk(cls, seed=0, **pipeline):
        """Synthetic corpus: 5 categories x 400 points, 10% pairwise overlap."""
        synth = {"n_categories": 5, "samples_per_category": 400, "overlap": 0.1, "spread": 0.12,
                 "grid_resolution": 50, "dim": 8}
        return cls(DatasetConfig("synth", synth=synth), PipelineConfig(**pipeline), seed=seed,
                   out=f"runs/desk-{seed}")

    @classmethod
    def unsw(cls, train_paths, test_paths, generated_total=300_000, seed=0):
        net = NetworkConfig("100-64-128-256-42", "42-64-32-24-1", "42-512-256-128-64", "64-42")
        return cls(DatasetConfig("unsw-nb15", list(train_paths), list(test_paths)),
                   PipelineConfig(per_category=generated_total // 10), net, seed=seed, out="runs/unsw-nb15")

    @classmethod
    def andmal(cls, paths, generated_total=300_000, seed=0):
        net = NetworkConfig("100-128-256-512-64", "64-128-64-24-1", "64-1024-512-256-128", "128-64")
        return cls(DatasetConfig("andmal-2020", list(paths), pca_dim=64),
                   PipelineConfig(per_category=generated_total // 15), net, seed=seed, out="runs/andmal-2020")


def synth_spec_from(cfg: DatasetConfig, seed) -> SynthSpec:
    d = dict(cfg.synth)
    d.setdefault("seed", seed)
    overlap = d.pop("overlap", None)
    n = int(d.get("n_categories", 5))
    if overlap is not None and "overlap_matrix" not in d:
        P = np.full((n, n), float(overlap))
        np.fill_diagonal(P, 1.0)
        d["overlap_matrix"] = P.tolist()
    try:
        return SynthSpec(**d)
    except TypeError as exc:
        raise UsageError(f"bad synth section: {exc}") from None


# ------------------------------------------------------------------- corpus


@dataclass
class PreparedCorpus:
    train: MultiLabelDataset
    test: MultiLabelDataset
    digest: str
    stats: dict
    ground_truth: SynthGroundTruth | None = None


def dataset_digest(*parts):
    h = hashlib.sha256()
    for data in parts:
        X = np.ascontiguousarray(data.features, dtype=np.float64)
        h.update(f"{X.shape}".encode())
        h.update(X.tobytes())
        h.update(json.dumps([sorted(y) for y in data.labels]).encode())
        h.update(json.dumps(data.multiplicity, sort_keys=True).encode())
    return h.hexdigest()


def _multilabel_split(ml, cfg: RunConfig):
    return split(ml, cfg.dataset.test_fraction, cfg.seed)


def prepare_corpus(cfg: RunConfig) -> PreparedCorpus:
    ds = cfg.dataset
    truth = None
    stats = {"kind": ds.kind}
    if ds.kind == "synth":
        raw = synth_generate(synth_spec_from(ds, cfg.seed))
        truth = raw.metadata["ground_truth"]
        ml = multilabelize(raw)
        train, test = _multilabel_split(ml, cfg)
        stats.update(source_rows=len(raw), expected_lcard=truth.expected_lcard())
    elif ds.kind == "unsw-nb15":
        cats = ds.categorical_columns if ds.categorical_columns is not None else list(UNSW_CATEGORICAL)
        raw_tr = load_csv_corpus(ds.paths, "unsw-nb15")
        if ds.test_paths:
            raw_te = load_csv_corpus(ds.test_paths, "unsw-nb15")
            # ordinal codes are fitted on both files so the split cannot hit unseen values
            both = RawDataset(np.vstack([raw_tr.features, raw_te.features]), list(raw_tr.labels) + list(raw_te.labels),
                              raw_tr.label_vocabulary, raw_tr.feature_names)
            vocab = encode_features(both, cats).metadata["encodings"]
            train = multilabelize(encode_features(raw_tr, cats, vocab))
            test = multilabelize(encode_features(raw_te, cats, vocab))
            stats.update(source_rows=len(raw_tr) + len(raw_te))
        else:
            ml = multilabelize(encode_features(raw_tr, cats))
            train, test = _multilabel_split(ml, cfg)
            stats.update(source_rows=len(raw_tr))
    else:
        raw = load_csv_corpus(ds.paths, ds.kind)
        if ds.categorical_columns:
            raw = encode_features(raw, ds.categorical_columns)
        if ds.test_paths:
            raw_te = load_csv_corpus(ds.test_paths, ds.kind)
            if ds.categorical_columns:
                raw_te = encode_features(raw_te, ds.categorical_columns, raw.metadata["encodings"])
            train, test = multilabelize(raw), multilabelize(raw_te)
            stats.update(source_rows=len(raw) + len(raw_te))
        else:
            train, test = _multilabel_split(multilabelize(raw), cfg)
            stats.update(source_rows=len(raw))
    dup = cross_split_duplicates(train, test)
    if dup:
        log.warning("%d test samples also occur in the training split", dup)
    stats.update(
        n_train=len(train), n_test=len(test), dim=train.dim, cross_split_duplicates=dup,
        lcard_train=lcard(train), ldiv_train=ldiv(train), lcard_test=lcard(test), ldiv_test=ldiv(test),
    )
    return PreparedCorpus(train, test, dataset_digest(train, test), stats, truth)


def fit_unit_scaler(cfg: DatasetConfig, train: MultiLabelDataset):
    """MinMax to [0, 1], preceded by PCA when ``pca_dim`` is set. Fitted on ``train`` only."""
    if cfg.pca_dim:
        pca = fit_scaler(train, "pca", cfg.pca_dim)
        mm = fit_scaler(apply_scaler(pca, train.features), "minmax")
        return ScalerChain([pca, mm])
    return fit_scaler(train, "minmax")


@dataclass
class Unit:
    name: str
    train: MultiLabelDataset
    evals: dict          # name -> MultiLabelDataset (unscaled)


def evaluation_units(corpus: PreparedCorpus, folds, seed):
    if not folds:
        return [Unit("split", corpus.train, {"test": corpus.test})]
    out = []
    parts = kfold_indices(len(corpus.train), folds, seed)
    for k, held in enumerate(parts):
        rest = np.sort(np.concatenate([p for j, p in enumerate(parts) if j != k]))
        out.append(Unit(f"fold{k}", corpus.train.subset(rest),
                        {"heldout": corpus.train.subset(held), "test": corpus.test}))
    return out


def bayes_subsetacc(truth: SynthGroundTruth, data: MultiLabelDataset):
    return evaluate(truth.bayes_predict(data.features), data.labels).subsetacc


# ---------------------------------------------------------------- MLD runner


class _Clock:
    def __init__(self):
        self.timings = {}

    def time(self, phase):
        clock = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                clock.timings[phase] = clock.timings.get(phase, 0.0) + time.perf_counter() - self.t0

        return _Ctx()


def train_unit_generators(cfg: RunConfig, train_scaled, seed):
    if not cfg.pipeline.augment:
        return []
    return train_generators(train_scaled, cfg.network.wgan_config(seed),
                            exclude=cfg.pipeline.exclude_categories, skip_insufficient=True)


def run_mld_unit(cfg: RunConfig, unit: Unit, seed, *, truth=None, generators=None, bundle_dir=None):
    """Multi-labelize, augment, pre-train, fine-tune and evaluate one unit. ``generators`` lets ablations share one WGAN run."""
    clock = _Clock()
    pipe, net = cfg.pipeline, cfg.network
    scaler = fit_unit_scaler(cfg.dataset, unit.train)
    train = apply_scaler(scaler, unit.train)
    codec = fit_codec(train)
    ae = net.ae_spec()

    aug = None
    if pipe.augment:
        with clock.time("augment"):
            if generators is None:
                generators = train_unit_generators(cfg, train, seed)
            aug = build_augmented(train, generators, pipe.per_category, seed)
    pretrained = None
    with clock.time("pretrain"):
        tc = dataclasses.replace(net.pretrain_train, seed=seed)
        if pipe.pretrain == "raw":
            pretrained = pretrain_ae(train, ae, tc)
        elif pipe.pretrain == "augmented":
            pretrained = pretrain_ae(aug, ae, tc)
    with clock.time("finetune"):
        model = build_and_finetune(pretrained, train, codec, dataclasses.replace(net.finetune_train, seed=seed),
                                   encoder_spec=ae.encoder, weighting=pipe.weighting)

    record = {"name": unit.name, "n_train": len(unit.train), "n_classes": len(codec), "metrics": {},
              "unseen_label_sets": {}}
    with clock.time("detect"):
        for name, data in unit.evals.items():
            record["metrics"][name] = evaluate(predict(model, apply_scaler(scaler, data).features),
                                               data.labels).to_dict()
            record["unseen_label_sets"][name] = sum(y not in codec for y in data.labels)
    history = [h["subsetacc_train"] for h in model.history]
    threshold = pipe.threshold
    if truth is not None:
        record["bayes_subsetacc"] = {name: bayes_subsetacc(truth, d) for name, d in unit.evals.items()}
        record["bayes_subsetacc"]["train"] = bayes_subsetacc(truth, unit.train)
        if threshold is None:
            threshold = 0.9 * record["bayes_subsetacc"]["train"]
    record.update(
        pretrain=pipe.pretrain,
        final_train_subsetacc=history[-1] if history else None,
        threshold=threshold,
        epochs_to_threshold=epochs_to_threshold(model.history, threshold) if threshold is not None else None,
        train_subsetacc_history=history,
        pretrain_loss_history=[h["loss"] for h in pretrained.extra["history"]] if pretrained else [],
        n_generated=aug.n_generated if aug is not None else 0,
        generators=[{"category": g.category, "seed": g.seed,
                     "final_critic_gap": g.history[-1]["critic_gap"] if g.history else None}
                    for g in (generators or [])],
        timings=clock.timings,
    )
    if bundle_dir is not None:
        bundle = Path(bundle_dir)
        model.save(bundle, scaler, cfg.to_dict(), pretrained)
        if generators:
            write_generator_bundle(generators, net.wgan_config(seed), pipe.per_category, seed, bundle / "generators")
    return record, model


def _summaries(units, key):
    vals = {f: [u["metrics"][key][f] for u in units] for f in METRIC_FIELDS}
    ddof = 1 if len(units) > 1 else 0
    return {
        "mean": {f: float(np.mean(v)) for f, v in vals.items()},
        "std": {f: float(np.std(v, ddof=ddof)) for f, v in vals.items()},
        "std_ddof": ddof,
    }


def strip_timings(obj):
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k not in ("timings", "report_digest")}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


def report_digest(report):
    """Digest of every report field except timings."""
    return hashlib.sha256(json.dumps(strip_timings(report), sort_keys=True).encode()).hexdigest()


def _assemble(kind, name, cfg: RunConfig, corpus: PreparedCorpus, units):
    primary = "heldout" if cfg.pipeline.folds else "test"
    report = {
        "kind": kind,
        "name": name,
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "config": cfg.to_dict(),
        "dataset": {"digest": corpus.digest, **corpus.stats},
        "primary": primary,
        "folds": units,
        "summary": _summaries(units, primary),
    }
    if cfg.pipeline.folds:
        report["test_summary"] = _summaries(units, "test")
    timings = {}
    for u in units:
        for k, v in u.get("timings", {}).items():
            timings[k] = timings.get(k, 0.0) + v
    report["timings"] = timings
    report["report_digest"] = report_digest(report)
    return report


def run_mld(cfg: RunConfig, out_dir=None, save_models=True):
    corpus = prepare_corpus(cfg)
    records = []
    for i, unit in enumerate(evaluation_units(corpus, cfg.pipeline.folds, cfg.seed)):
        bundle = Path(out_dir) / "models" / unit.name if (out_dir and save_models) else None
        try:
            rec, _ = run_mld_unit(cfg, unit, cfg.seed + i, truth=corpus.ground_truth, bundle_dir=bundle)
        except MldError as exc:
            exc.args = (f"[{unit.name}] {exc}",) + exc.args[1:]
            raise
        records.append(rec)
    report = _assemble("mld", f"mld[pretrain={cfg.pipeline.pretrain}]", cfg, corpus, records)
    if out_dir is not None:
        write_report(report, Path(out_dir) / "report.json")
    return report


# ----------------------------------------------------------- baseline runner


def run_baseline(cfg: RunConfig, out_dir=None):
    corpus = prepare_corpus(cfg)
    b = cfg.baseline
    records = []
    for i, unit in enumerate(evaluation_units(corpus, cfg.pipeline.folds, cfg.seed)):
        clock = _Clock()
        scaler = fit_unit_scaler(cfg.dataset, unit.train)
        train = apply_scaler(scaler, unit.train)
        learner = BaseLearnerSpec(b.learner, b.hyperparameters, cfg.seed + i) if b.learner else None
        with clock.time("fit"):
            model = fit_baseline(b.strategy, train, learner, k=b.k, s=b.s, seed=cfg.seed + i)
        rec = {"name": unit.name, "n_train": len(unit.train), "metrics": {}}
        with clock.time("detect"):
            for name, data in unit.evals.items():
                pred = predict_baseline(model, apply_scaler(scaler, data).features)
                rec["metrics"][name] = evaluate(pred, data.labels).to_dict()
        if learner is not None:
            rec["learner"] = learner.manifest()
        else:
            rec["learner"] = {"kind": "mlknn", "k": b.k, "s": b.s}
        if corpus.ground_truth is not None:
            rec["bayes_subsetacc"] = {name: bayes_subsetacc(corpus.ground_truth, d) for name, d in unit.evals.items()}
        rec["timings"] = clock.timings
        records.append(rec)
    report = _assemble("baseline", f"baseline[{b.name}]", cfg, corpus, records)
    if out_dir is not None:
        write_report(report, Path(out_dir) / "report.json")
    return report


# ----------------------------------------------------- augment / pretrain verbs


def run_augment(cfg: RunConfig, out_dir):
    """Train per-category generators on the training split and write the augmented pool."""
    if not cfg.pipeline.augment:
        raise UsageError("augment is disabled in this config")
    corpus = prepare_corpus(cfg)
    scaler = fit_unit_scaler(cfg.dataset, corpus.train)
    train = apply_scaler(scaler, corpus.train)
    gens = train_unit_generators(cfg, train, cfg.seed)
    out = Path(out_dir)
    manifest = write_generator_bundle(gens, cfg.network.wgan_config(cfg.seed), cfg.pipeline.per_category,
                                      cfg.seed, out / "generators")
    aug = build_augmented(train, gens, cfg.pipeline.per_category, cfg.seed)
    write_generated_pool(aug, train, out / "augmented.csv", scaler)
    summary = {"config_digest": cfg.digest(), "dataset_digest": corpus.digest, "n_real": len(train),
               "n_generated": aug.n_generated, "generators": manifest}
    (out / "augment.json").write_text(json.dumps(summary, indent=2))
    return summary


def run_pretrain(cfg: RunConfig, out_dir):
    """Pre-train the unbalanced AE on the configured source and save the encoder."""
    if cfg.pipeline.pretrain == "none":
        raise UsageError("pretrain=none: nothing to pre-train")
    corpus = prepare_corpus(cfg)
    scaler = fit_unit_scaler(cfg.dataset, corpus.train)
    train = apply_scaler(scaler, corpus.train)
    source = train
    if cfg.pipeline.pretrain == "augmented":
        gens = train_unit_generators(cfg, train, cfg.seed)
        source = build_augmented(train, gens, cfg.pipeline.per_category, cfg.seed)
    ae = cfg.network.ae_spec()
    ck = pretrain_ae(source, ae, dataclasses.replace(cfg.network.pretrain_train, seed=cfg.seed))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    saved = save_checkpoint(ae.encoder, ck.params, out / "encoder.npz")
    save_checkpoint(ae.decoder, ck.extra["decoder"], out / "decoder.npz")
    summary = {"config_digest": cfg.digest(), "dataset_digest": corpus.digest, "source": cfg.pipeline.pretrain,
               "encoder_digest": saved.content_digest,
               "loss_history": [h["loss"] for h in ck.extra["history"]]}
    (out / "pretrain.json").write_text(json.dumps(summary, indent=2))
    return summary


# ----------------------------------------------------------------- ablation


def run_ablation(cfg: RunConfig, seeds, sources=PRETRAIN_SOURCES):
    """For each seed, one generator run shared by all pre-training sources.

    Returns ``{seed: {source: unit record}}``; single split only.
    """
    results = {}
    for seed in seeds:
        base = cfg.replace(seed=seed, **{"pipeline.folds": 0})
        corpus = prepare_corpus(base)
        unit = evaluation_units(corpus, 0, seed)[0]
        gens = None
        if "augmented" in sources:
            scaled = apply_scaler(fit_unit_scaler(base.dataset, unit.train), unit.train)
            gens = train_unit_generators(base.replace(**{"pipeline.augment": True}), scaled, seed)
        results[seed] = {}
        for src in sources:
            run_cfg = base.replace(**{"pipeline.pretrain": src, "pipeline.augment": src == "augmented"})
            rec, _ = run_mld_unit(run_cfg, unit, seed, truth=corpus.ground_truth,
                                  generators=gens if src == "augmented" else None)
            results[seed][src] = rec
    return results


# -------------------------------------------------------------- comparison


def write_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2))


def load_report(path):
    p = Path(path)
    if not p.exists():
        raise InputError(p)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}: not a JSON report ({exc})") from None


def compare_reports(reports, names=None):
    """Aligned metric table over reports of the same corpus; best value per column flagged."""
    if len(reports) < 2:
        raise ArgumentError("comparison needs at least two reports")
    digests = {r["dataset"]["digest"] for r in reports}
    if len(digests) != 1:
        raise ComparisonError("reports were produced on different corpora (dataset digests differ)")
    key = "test_summary" if all("test_summary" in r for r in reports) else "summary"
    rows = []
    for i, r in enumerate(reports):
        rows.append({"name": names[i] if names else r["name"], "kind": r["kind"],
                     "config_digest": r["config_digest"], **{f: r[key]["mean"][f] for f in METRIC_FIELDS}})
    best = {}
    for f in METRIC_FIELDS:
        vals = [row[f] for row in rows]
        target = min(vals) if f in LOWER_IS_BETTER else max(vals)
        best[f] = [row["name"] for row in rows if row[f] == target]
    ref = rows[0]["f1"]
    for row in rows:
        row["f1_gap_points"] = 100.0 * (ref - row["f1"])
    return {"summary_key": key, "dataset_digest": digests.pop(), "columns": list(METRIC_FIELDS),
            "rows": rows, "best": best}


def render_table(table):
    cols = table["columns"]
    head = ["method"] + cols
    lines = []
    body = []
    for row in table["rows"]:
        cells = [row["name"]]
        for f in cols:
            mark = "*" if row["name"] in table["best"][f] else " "
            cells.append(f"{row[f]:.4f}{mark}")
        body.append(cells)
    widths = [max(len(r[j]) for r in [head] + body) for j in range(len(head))]
    fmt = lambda cells: "  ".join(c.ljust(w) if j == 0 else c.rjust(w) for j, (c, w) in enumerate(zip(cells, widths)))
    lines.append(fmt(head))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend(fmt(r) for r in body)
    lines.append("")
    lines.append("* best per column (lowest for hloss)")
    return "\n".join(lines) + "\n"
