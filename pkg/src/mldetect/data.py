"""Corpus loading, feature encoding, scaling and exact-duplicate multi-labelization."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import (
    ArgumentError,
    DataError,
    EncodingError,
    InputError,
    SchemaError,
    ShapeError,
    VocabularyError,
)

log = logging.getLogger(__name__)

UNSW_COLUMNS = (
    "id", "dur", "proto", "service", "state", "spkts", "dpkts", "sbytes", "dbytes",
    "rate", "sttl", "dttl", "sload", "dload", "sloss", "dloss", "sinpkt", "dinpkt",
    "sjit", "djit", "swin", "stcpb", "dtcpb", "dwin", "tcprtt", "synack", "ackdat",
    "smean", "dmean", "trans_depth", "response_body_len", "ct_srv_src",
    "ct_state_ttl", "ct_dst_ltm", "ct_src_dport_ltm", "ct_dst_sport_ltm",
    "ct_dst_src_ltm", "is_ftp_login", "ct_ftp_cmd", "ct_flw_http_mthd",
    "ct_src_ltm", "ct_srv_dst", "is_sm_ips_ports", "attack_cat", "label",
)
UNSW_DROP = ("id", "attack_cat", "label")
UNSW_CATEGORICAL = ("proto", "service", "state")
UNSW_LABELS = (
    "Analysis", "Backdoor", "DoS", "Exploits", "Fuzzers", "Generic", "Normal",
    "Reconnaissance", "Shellcode", "Worms",
)
UNSW_LABEL_ALIASES = {"Backdoors": "Backdoor", "": "Normal"}

ANDMAL_LABELS = (
    "Adware", "Backdoor", "Banker", "Benign", "Dropper", "FileInfector", "NoCategory",
    "PUA", "Ransomware", "Riskware", "SMS", "Scareware", "Spy", "Trojan", "Zeroday",
)
ANDMAL_DIM = 9503
ANDMAL_ID_COLUMNS = ("Hash", "hash", "Category", "category", "Family", "family", "Label", "label", "Class")

SCHEMAS = ("unsw-nb15", "andmal-2020", "generic")


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    raw_label: str


@dataclass(frozen=True)
class MultiLabeledSample:
    features: np.ndarray
    labels: frozenset
    multiplicity: dict


@dataclass
class RawDataset:
    """Rows of (feature vector, raw label) in file order.

    ``features`` is an ``(n, d)`` array. Before :func:`encode_features` it may
    hold strings (object dtype) in categorical columns.
    """

    features: np.ndarray
    labels: list
    label_vocabulary: tuple
    feature_names: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features)
        if self.features.ndim != 2:
            self.features = self.features.reshape(len(self.labels), -1)
        self.labels = list(self.labels)
        self.label_vocabulary = tuple(self.label_vocabulary)
        self.feature_names = tuple(self.feature_names)
        if len(self.labels) != self.features.shape[0]:
            raise ShapeError(f"{self.features.shape[0]} feature rows but {len(self.labels)} labels")
        if len(self.feature_names) != self.features.shape[1]:
            raise ShapeError(f"{len(self.feature_names)} feature names for width {self.features.shape[1]}")
        vocab = set(self.label_vocabulary)
        unknown = {lab for lab in self.labels if lab not in vocab}
        if unknown:
            raise VocabularyError(f"labels outside vocabulary: {sorted(unknown)}")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return Sample(self.features[i], self.labels[i])

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def is_numeric(self):
        return self.features.dtype.kind in "fiub"

    def with_features(self, features, feature_names=None, **meta):
        md = dict(self.metadata)
        md.update(meta)
        return RawDataset(
            features, self.labels, self.label_vocabulary,
            feature_names if feature_names is not None else self.feature_names, md,
        )


@dataclass
class MultiLabelDataset:
    """De-duplicated samples, each with a non-empty label set and per-label counts."""

    features: np.ndarray
    labels: list
    multiplicity: list
    label_vocabulary: tuple
    feature_names: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = [frozenset(y) for y in self.labels]
        self.multiplicity = [dict(m) for m in self.multiplicity]
        self.label_vocabulary = tuple(self.label_vocabulary)
        if not self.feature_names:
            self.feature_names = tuple(f"f{j}" for j in range(self.features.shape[1]))
        self.feature_names = tuple(self.feature_names)
        n = self.features.shape[0]
        if len(self.labels) != n or len(self.multiplicity) != n:
            raise ShapeError("features, labels and multiplicity must have equal length")
        vocab = set(self.label_vocabulary)
        for y, m in zip(self.labels, self.multiplicity):
            if not y:
                raise DataError("empty label set")
            if not y <= vocab:
                raise VocabularyError(f"labels outside vocabulary: {sorted(y - vocab)}")
            if set(m) != y or min(m.values()) < 1:
                raise DataError(f"multiplicity {m} inconsistent with labels {sorted(y)}")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return MultiLabeledSample(self.features[i], self.labels[i], self.multiplicity[i])

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def totals(self):
        return np.array([sum(m.values()) for m in self.multiplicity], dtype=int)

    def subset(self, indices):
        idx = np.asarray(indices, dtype=int)
        return MultiLabelDataset(
            self.features[idx],
            [self.labels[i] for i in idx],
            [self.multiplicity[i] for i in idx],
            self.label_vocabulary,
            self.feature_names,
            dict(self.metadata),
        )

    def with_features(self, features, feature_names=None, **meta):
        md = dict(self.metadata)
        md.update(meta)
        names = feature_names
        if names is None and np.shape(features)[1] == self.dim:
            names = self.feature_names
        return MultiLabelDataset(
            features, self.labels, self.multiplicity, self.label_vocabulary, names or (), md,
        )


# --------------------------------------------------------------------- loading


def _read_csv(path):
    path = Path(path)
    if not path.exists():
        raise InputError(path)
    try:
        return pd.read_csv(path, low_memory=False, skipinitialspace=True, float_precision="round_trip")
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{path}: no header row") from exc


def _load_unsw(paths):
    frames = []
    for p in paths:
        df = _read_csv(p)
        df.columns = [str(c).strip() for c in df.columns]
        if len(df.columns) != len(UNSW_COLUMNS):
            raise SchemaError(
                f"{p}: expected {len(UNSW_COLUMNS)} columns, found {len(df.columns)}"
            )
        missing = {"attack_cat", "label"} - set(df.columns)
        if missing:
            raise SchemaError(f"{p}: missing columns {sorted(missing)}")
        frames.append(df)
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=UNSW_COLUMNS)
    cats = df["attack_cat"].fillna("").astype(str).str.strip()
    labels = [UNSW_LABEL_ALIASES.get(c, c) for c in cats]
    bad = sorted(set(labels) - set(UNSW_LABELS))
    if bad:
        raise VocabularyError(f"unknown UNSW-NB15 attack categories: {bad}")
    feats = df.drop(columns=[c for c in UNSW_DROP if c in df.columns])
    names = tuple(feats.columns)
    values = np.empty(feats.shape, dtype=object)
    for j, col in enumerate(names):
        values[:, j] = feats[col].to_numpy()
    return RawDataset(values, labels, UNSW_LABELS, names, {"schema": "unsw-nb15"})


def _andmal_category(path, df):
    for col in ("Category", "category"):
        if col in df.columns:
            return [str(v).strip() for v in df[col]]
    stem = Path(path).stem.lower()
    if stem.startswith("ben"):
        return ["Benign"] * len(df)
    for lab in sorted(ANDMAL_LABELS, key=len, reverse=True):
        if stem.startswith(lab.lower()):
            return [lab] * len(df)
    raise VocabularyError(f"{path}: cannot infer AndMal-2020 category from file name")


def _load_andmal(paths, expected_dim, dtype):
    feats, labels, names = [], [], None
    for p in paths:
        df = _read_csv(p)
        cats = _andmal_category(p, df)
        x = df.drop(columns=[c for c in ANDMAL_ID_COLUMNS if c in df.columns])
        if x.shape[1] != expected_dim:
            raise SchemaError(f"{p}: expected {expected_dim} feature columns, found {x.shape[1]}")
        if names is None:
            names = tuple(str(c) for c in x.columns)
        elif tuple(str(c) for c in x.columns) != names:
            raise SchemaError(f"{p}: feature columns differ from {paths[0]}")
        feats.append(x.to_numpy(dtype=dtype))
        labels.extend(cats)
    bad = sorted(set(labels) - set(ANDMAL_LABELS))
    if bad:
        raise VocabularyError(f"unknown AndMal-2020 categories: {bad}")
    if names is None:
        names = tuple(f"f{j}" for j in range(expected_dim))
    X = np.concatenate(feats) if feats else np.zeros((0, expected_dim), dtype=dtype)
    return RawDataset(X, labels, ANDMAL_LABELS, names, {"schema": "andmal-2020"})


def _load_generic(paths):
    frames = [_read_csv(p) for p in paths]
    for p, df in zip(paths, frames):
        if "label" not in df.columns:
            raise SchemaError(f"{p}: generic schema requires a 'label' column")
    df = pd.concat(frames, ignore_index=True)
    labels = df["label"].astype(str).tolist()
    x = df.drop(columns=["label"])
    vocab = tuple(sorted(set(labels)))
    return RawDataset(x.to_numpy(dtype=float), labels, vocab, tuple(x.columns), {"schema": "generic"})


def load_csv_corpus(paths, schema, *, expected_dim=None, dtype=np.float64):
    """Read one corpus from CSV files, preserving row order across ``paths``.

    ``unsw-nb15`` keeps 42 features (identifier and binary label dropped, the
    three categorical columns left as strings for :func:`encode_features`).
    ``andmal-2020`` reads per-category static-feature files. ``generic`` reads
    numeric columns plus a ``label`` column (the synthetic corpus format).
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    paths = [Path(p) for p in paths]
    for p in paths:
        if not p.exists():
            raise InputError(p)
    if schema == "unsw-nb15":
        return _load_unsw(paths)
    if schema == "andmal-2020":
        return _load_andmal(paths, expected_dim or ANDMAL_DIM, dtype)
    if schema == "generic":
        return _load_generic(paths)
    raise ArgumentError(f"unknown schema {schema!r}; expected one of {SCHEMAS}")


def write_raw_csv(raw: RawDataset, path):
    df = pd.DataFrame(raw.features, columns=list(raw.feature_names))
    df["label"] = raw.labels
    df.to_csv(path, index=False, float_format="%.17g")


# -------------------------------------------------------------------- encoding


def encode_features(raw: RawDataset, categorical_columns: Sequence[str] = (), vocabularies=None):
    """Replace categorical columns by their index in the column's sorted vocabulary.

    Pass ``vocabularies`` (e.g. ``train.metadata["encodings"]``) to reuse a
    fitted mapping on a test split; unseen values then raise EncodingError.
    """
    names = list(raw.feature_names)
    missing = [c for c in categorical_columns if c not in names]
    if missing:
        raise ArgumentError(f"categorical columns not in features: {missing}")
    X = raw.features
    out = np.empty(X.shape, dtype=float)
    encodings = {}
    cat_idx = {names.index(c): c for c in categorical_columns}
    for j in range(X.shape[1]):
        if j not in cat_idx:
            try:
                out[:, j] = X[:, j].astype(float)
            except (TypeError, ValueError) as exc:
                raise DataError(f"column {names[j]!r} is not numeric") from exc
            continue
        col = cat_idx[j]
        values = [str(v) for v in X[:, j]]
        if vocabularies is not None and col in vocabularies:
            vocab = list(vocabularies[col])
        else:
            vocab = sorted(set(values))
        index = {v: i for i, v in enumerate(vocab)}
        try:
            out[:, j] = [index[v] for v in values]
        except KeyError as exc:
            raise EncodingError(col, exc.args[0]) from None
        encodings[col] = vocab
    if not np.isfinite(out).all():
        raise DataError("non-finite feature values after encoding")
    return raw.with_features(out, encodings=encodings)


# --------------------------------------------------------------------- scaling


@dataclass
class ScalerModel:
    kind: str
    fitted_dim: int
    minimum: np.ndarray | None = None
    maximum: np.ndarray | None = None
    mean: np.ndarray | None = None
    components: np.ndarray | None = None

    @property
    def out_dim(self):
        return self.fitted_dim if self.kind == "minmax" else self.components.shape[0]

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.fitted_dim:
            raise ArgumentError(f"expected width {self.fitted_dim}, got {X.shape}")
        if self.kind == "minmax":
            span = self.maximum - self.minimum
            safe = np.where(span > 0, span, 1.0)
            Z = np.where(span > 0, (X - self.minimum) / safe, 0.0)
            return np.clip(Z, 0.0, 1.0)
        return (X - self.mean) @ self.components.T

    def inverse_transform(self, Z):
        Z = np.asarray(Z, dtype=float)
        if self.kind == "minmax":
            return Z * (self.maximum - self.minimum) + self.minimum
        return Z @ self.components + self.mean

    def to_dict(self):
        d = {"kind": self.kind, "fitted_dim": self.fitted_dim}
        for key in ("minimum", "maximum", "mean", "components"):
            val = getattr(self, key)
            if val is not None:
                d[key] = val.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        kw = {k: np.asarray(d[k], dtype=float) for k in ("minimum", "maximum", "mean", "components") if k in d}
        return cls(kind=d["kind"], fitted_dim=int(d["fitted_dim"]), **kw)


@dataclass
class ScalerChain:
    """Scalers applied in order, e.g. PCA to 64 dimensions then MinMax."""

    steps: list

    @property
    def kind(self):
        return "+".join(s.kind for s in self.steps)

    @property
    def fitted_dim(self):
        return self.steps[0].fitted_dim

    @property
    def out_dim(self):
        return self.steps[-1].out_dim

    def transform(self, X):
        for s in self.steps:
            X = s.transform(X)
        return X

    def to_dict(self):
        return {"kind": "chain", "steps": [s.to_dict() for s in self.steps]}


def scaler_from_dict(d):
    if d["kind"] == "chain":
        return ScalerChain([ScalerModel.from_dict(s) for s in d["steps"]])
    return ScalerModel.from_dict(d)


def _pca_components(Xc, k, seed=0):
    n, d = Xc.shape
    if k < d // 4 and n * d > 5_000_000:
        from sklearn.utils.extmath import randomized_svd

        _, _, vt = randomized_svd(Xc, k, n_iter=7, random_state=seed)
    else:
        _, _, vt = np.linalg.svd(Xc, full_matrices=False)
        if vt.shape[0] < k:
            # fewer samples than requested components: complete the basis
            q, _ = np.linalg.qr(np.vstack([vt, np.eye(d)]).T)
            vt = q.T[:k]
    vt = vt[:k]
    pivot = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(k), pivot])
    signs[signs == 0] = 1.0
    return vt * signs[:, None]


def fit_scaler(data, kind="minmax", k=None):
    X = np.asarray(data.features if hasattr(data, "features") else data, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ArgumentError("cannot fit a scaler on an empty dataset")
    d = X.shape[1]
    if kind == "minmax":
        return ScalerModel("minmax", d, minimum=X.min(axis=0), maximum=X.max(axis=0))
    if kind == "pca":
        k = d if k is None else int(k)
        if not 1 <= k <= d:
            raise ArgumentError(f"pca target dimension {k} must be in [1, {d}]")
        mean = X.mean(axis=0)
        return ScalerModel("pca", d, mean=mean, components=_pca_components(X - mean, k))
    raise ArgumentError(f"unknown scaler kind {kind!r}")


def apply_scaler(model: ScalerModel | ScalerChain, data):
    """Transform a dataset (or bare array); labels and multiplicities pass through."""
    if not hasattr(data, "features"):
        return model.transform(data)
    Z = model.transform(data.features)
    names = data.feature_names if Z.shape[1] == data.dim and "pca" not in model.kind else tuple(f"pc{j}" for j in range(Z.shape[1]))
    return data.with_features(Z, names)


# ---------------------------------------------------------- multi-labelization


def _row_keys(X):
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64) + 0.0)  # folds -0.0 into 0.0
    return X.view(np.dtype((np.void, X.dtype.itemsize * X.shape[1]))).ravel()


def duplicate_groups(X):
    """Group identical rows: returns (first-occurrence index per group, group id per row)."""
    keys = _row_keys(X)
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return first[order], rank[inverse.ravel()]


def multilabelize(raw: RawDataset) -> MultiLabelDataset:
    """Merge exact-duplicate rows into one sample carrying the union of their labels."""
    if len(raw) == 0:
        raise ArgumentError("cannot multilabelize an empty dataset")
    if not raw.is_numeric:
        raise DataError("features must be numerically encoded before multilabelization")
    X = np.asarray(raw.features, dtype=float)
    if not np.isfinite(X).all():
        raise DataError("non-finite feature values")
    first, group = duplicate_groups(X)
    counts = [Counter() for _ in range(len(first))]
    for g, lab in zip(group, raw.labels):
        counts[g][lab] += 1
    md = dict(raw.metadata)
    md["source_rows"] = len(raw)
    return MultiLabelDataset(
        X[first] + 0.0,
        [frozenset(c) for c in counts],
        [dict(sorted(c.items())) for c in counts],
        raw.label_vocabulary,
        raw.feature_names,
        md,
    )


def cross_split_duplicates(a: MultiLabelDataset, b: MultiLabelDataset) -> int:
    """Number of samples of ``b`` whose feature vector also occurs in ``a``."""
    return int(np.isin(_row_keys(b.features), _row_keys(a.features)).sum())


@dataclass
class OverlapReport:
    lcard: float
    ldiv: int
    groups: list

    def to_dict(self):
        return {"lcard": self.lcard, "ldiv": self.ldiv, "groups": self.groups}


def overlap_report(data: MultiLabelDataset, top_k=5) -> OverlapReport:
    from .metrics import lcard, ldiv

    if top_k < 1:
        raise ArgumentError("top_k must be >= 1")
    totals = data.totals
    order = np.argsort(-totals, kind="stable")[:top_k]
    groups = [
        {"total": int(totals[i]), "per_category": {lab: int(data.multiplicity[i].get(lab, 0)) for lab in data.label_vocabulary}}
        for i in order
    ]
    return OverlapReport(lcard(data), ldiv(data), groups)


# ----------------------------------------------------------------- splitting


def split(data: MultiLabelDataset, test_fraction=0.2, seed=0):
    if not 0 < test_fraction < 1:
        raise ArgumentError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(data)
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    return data.subset(np.sort(perm[n_test:])), data.subset(np.sort(perm[:n_test]))


def kfold_indices(n, folds, seed=0):
    """Disjoint index arrays covering range(n), one per fold."""
    if folds < 2 or folds > n:
        raise ArgumentError(f"cannot make {folds} folds from {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


# -------------------------------------------------------------------- file io


def _format_counts(m):
    return ";".join(f"{k}:{v}" for k, v in sorted(m.items()))


def write_multilabel(data: MultiLabelDataset, path, *, provenance=None, scaler=None):
    """Write the canonical one-row-per-unique-sample CSV plus its JSON sidecar."""
    path = Path(path)
    df = pd.DataFrame(data.features, columns=list(data.feature_names))
    df["labels"] = [";".join(sorted(y)) for y in data.labels]
    df["counts"] = [_format_counts(m) for m in data.multiplicity]
    if provenance is not None:
        df["provenance"] = provenance
    df.to_csv(path, index=False, float_format="%.17g")
    sidecar = {
        "label_vocabulary": list(data.label_vocabulary),
        "encodings": data.metadata.get("encodings", {}),
        "scaler": scaler.to_dict() if scaler is not None else None,
        "n_samples": len(data),
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def read_multilabel(path) -> MultiLabelDataset:
    path = Path(path)
    if not path.exists():
        raise InputError(path)
    df = pd.read_csv(path, keep_default_na=False, float_precision="round_trip")
    sidecar_path = path.with_suffix(".json")
    sidecar = json.loads(sidecar_path.read_text()) if sidecar_path.exists() else {}
    for col in ("labels", "counts"):
        if col not in df.columns:
            raise SchemaError(f"{path}: missing column {col!r}")
    feat_cols = [c for c in df.columns if c not in ("labels", "counts", "provenance")]
    labels = [frozenset(s.split(";")) for s in df["labels"]]
    mult = [{k: int(v) for k, v in (kv.split(":") for kv in s.split(";"))} for s in df["counts"]]
    vocab = sidecar.get("label_vocabulary") or sorted(set().union(*labels))
    md = {"encodings": sidecar.get("encodings", {})}
    if "provenance" in df.columns:
        md["provenance"] = df["provenance"].tolist()
    return MultiLabelDataset(df[feat_cols].to_numpy(dtype=float), labels, mult, vocab, tuple(feat_cols), md)
