"""Comparison methods: BR, CLR and CC problem transformations over scikit-learn
base learners, plus ML-KNN."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from sklearn.base import clone
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.neighbors import NearestNeighbors
from sklearn.svm import SVC
from sklearn.tree import DecisionTreeClassifier

from .data import MultiLabelDataset
from .errors import ArgumentError, ShapeError, UsageError

log = logging.getLogger(__name__)

LEARNERS = ("naive-bayes", "logistic-regression", "decision-tree", "random-forest", "svm")
STRATEGIES = ("br", "clr", "cc")


@dataclass
class BaseLearnerSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in LEARNERS:
            raise UsageError(f"unknown base learner {self.kind!r}; choose from {LEARNERS}")

    def make(self):
        hp = dict(self.hyperparameters)
        if self.kind == "naive-bayes":
            return GaussianNB(**hp)
        if self.kind == "logistic-regression":
            hp.setdefault("max_iter", 1000)
            return LogisticRegression(random_state=self.seed, **hp)
        if self.kind == "decision-tree":
            return DecisionTreeClassifier(random_state=self.seed, **hp)
        if self.kind == "random-forest":
            return RandomForestClassifier(random_state=self.seed, **hp)
        hp.setdefault("probability", True)
        return SVC(random_state=self.seed, **hp)

    def manifest(self):
        """Effective hyperparameters, recorded verbatim in run reports."""
        params = self.make().get_params()
        return {"kind": self.kind, "seed": self.seed,
                "params": {k: v if isinstance(v, (int, float, str, bool, type(None))) else repr(v)
                           for k, v in sorted(params.items())}}


class ConstantModel:
    """Stand-in for a binary problem whose targets never vary."""

    def __init__(self, p):
        self.p = float(p)

    def positive_proba(self, X):
        return np.full(len(X), self.p)


class BinaryModel:
    def __init__(self, estimator):
        self.estimator = estimator

    def positive_proba(self, X):
        proba = self.estimator.predict_proba(X)
        classes = list(self.estimator.classes_)
        return proba[:, classes.index(1)] if 1 in classes else np.zeros(len(X))


def _fit_binary(learner: BaseLearnerSpec, X, y, what):
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        log.info("%s: no training samples, using constant 0.5", what)
        return ConstantModel(0.5)
    if y.min() == y.max():
        log.info("%s: single-class targets, using constant %d", what, y[0])
        return ConstantModel(y[0])
    est = clone(learner.make())
    est.fit(X, y)
    return BinaryModel(est)


def label_matrix(data: MultiLabelDataset, labels):
    return np.array([[lab in y for lab in labels] for y in data.labels], dtype=int).reshape(len(data), len(labels))


@dataclass
class TransformModel:
    strategy: str
    labels: tuple
    models: list
    learner: BaseLearnerSpec
    pairs: list = field(default_factory=list)
    calibration: list = field(default_factory=list)
    chain_order: list = field(default_factory=list)
    in_dim: int = 0

    @property
    def n_models(self):
        return len(self.models) + len(self.calibration)


def fit_transform(strategy, learner: BaseLearnerSpec, data: MultiLabelDataset, chain_order=None) -> TransformModel:
    if strategy not in STRATEGIES:
        raise UsageError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    if len(data) == 0:
        raise ArgumentError("cannot fit on an empty dataset")
    labels = tuple(sorted(data.label_vocabulary))
    M = len(labels)
    if M < 2:
        raise ArgumentError("problem transformations need at least two labels")
    X = np.asarray(data.features, dtype=float)
    Y = label_matrix(data, labels)
    model = TransformModel(strategy, labels, [], learner, in_dim=X.shape[1])
    if strategy == "br":
        model.models = [_fit_binary(learner, X, Y[:, j], f"br[{labels[j]}]") for j in range(M)]
    elif strategy == "clr":
        for a, b in combinations(range(M), 2):
            mask = Y[:, a] != Y[:, b]
            model.pairs.append((a, b))
            model.models.append(_fit_binary(learner, X[mask], Y[mask, a], f"clr[{labels[a]}>{labels[b]}]"))
        model.calibration = [_fit_binary(learner, X, Y[:, j], f"clr[{labels[j]}>virtual]") for j in range(M)]
    else:
        order = list(range(M)) if chain_order is None else [labels.index(c) for c in chain_order]
        if sorted(order) != list(range(M)):
            raise ArgumentError("chain_order must be a permutation of the labels")
        model.chain_order = order
        for pos, j in enumerate(order):
            feats = np.hstack([X, Y[:, order[:pos]]])
            model.models.append(_fit_binary(learner, feats, Y[:, j], f"cc[{labels[j]}]"))
    return model


def _fallback(pred, scores):
    empty = ~pred.any(axis=1)
    if empty.any():
        pred[empty, np.argmax(scores[empty], axis=1)] = True
    return pred


def _vote(p):
    return (p > 0.5) + 0.5 * (p == 0.5)


def predict_transform_batch(model: TransformModel, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.in_dim:
        raise ShapeError(f"expected width {model.in_dim}, got {X.shape}")
    n, M = len(X), len(model.labels)
    if model.strategy == "br":
        scores = np.column_stack([m.positive_proba(X) for m in model.models])
        pred = scores > 0.5
    elif model.strategy == "clr":
        votes = np.zeros((n, M + 1))
        for (a, b), m in zip(model.pairs, model.models):
            v = _vote(m.positive_proba(X))
            votes[:, a] += v
            votes[:, b] += 1 - v
        calib = np.column_stack([m.positive_proba(X) for m in model.calibration])
        v = _vote(calib)
        votes[:, :M] += v
        votes[:, M] += (1 - v).sum(axis=1)
        pred = votes[:, :M] > votes[:, [M]]
        # vote count first, calibration probability breaks ties
        scores = votes[:, :M] + calib / (M + 1)
    else:
        scores = np.zeros((n, M))
        pred = np.zeros((n, M), dtype=bool)
        for pos, (j, m) in enumerate(zip(model.chain_order, model.models)):
            feats = np.hstack([X, pred[:, model.chain_order[:pos]].astype(float)])
            scores[:, j] = m.positive_proba(feats)
            pred[:, j] = scores[:, j] > 0.5
    pred = _fallback(pred.copy(), scores)
    return [frozenset(model.labels[j] for j in np.flatnonzero(row)) for row in pred]


def predict_transform(model: TransformModel, x):
    return predict_transform_batch(model, np.asarray(x, dtype=float).reshape(1, -1))[0]


# ---------------------------------------------------------------------- ML-KNN


@dataclass
class MlknnModel:
    k: int
    s: float
    features: np.ndarray
    Y: np.ndarray
    labels: tuple
    prior: np.ndarray           # (M,)
    cond_with: np.ndarray       # (M, k+1)
    cond_without: np.ndarray    # (M, k+1)
    index: NearestNeighbors | None = None

    def neighbors(self, X):
        return self.index.kneighbors(np.asarray(X, dtype=float), self.k, return_distance=False)


def training_neighbors(X, k):
    """k nearest training neighbours of every training point, excluding itself."""
    nn = NearestNeighbors(n_neighbors=k + 1).fit(X)
    idx = nn.kneighbors(X, k + 1, return_distance=False)
    out = np.empty((len(X), k), dtype=int)
    for i, row in enumerate(idx):
        row = row[row != i]
        out[i] = row[:k]
    return nn, out


def fit_mlknn(data: MultiLabelDataset, k=10, s=1.0) -> MlknnModel:
    X = np.asarray(data.features, dtype=float)
    N = len(X)
    if k >= N:
        raise ArgumentError(f"k={k} must be smaller than the {N} training samples")
    if s <= 0:
        raise ArgumentError("smoothing s must be positive")
    labels = tuple(sorted(data.label_vocabulary))
    Y = label_matrix(data, labels).astype(bool)
    nn, neigh = training_neighbors(X, k)
    counts = Y[neigh].sum(axis=1)                       # (N, M) in 0..k
    prior = (s + Y.sum(axis=0)) / (2 * s + N)
    M = len(labels)
    c_with = np.zeros((M, k + 1))
    c_without = np.zeros((M, k + 1))
    for j in range(M):
        c_with[j] = np.bincount(counts[Y[:, j], j], minlength=k + 1)
        c_without[j] = np.bincount(counts[~Y[:, j], j], minlength=k + 1)
    cond_with = (s + c_with) / (s * (k + 1) + c_with.sum(axis=1, keepdims=True))
    cond_without = (s + c_without) / (s * (k + 1) + c_without.sum(axis=1, keepdims=True))
    return MlknnModel(k, s, X, Y, labels, prior, cond_with, cond_without, nn)


def predict_mlknn_batch(model: MlknnModel, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.features.shape[1]:
        raise ShapeError(f"expected width {model.features.shape[1]}, got {X.shape}")
    counts = model.Y[model.neighbors(X)].sum(axis=1)   # (n, M)
    M = len(model.labels)
    cols = np.arange(M)
    with_ = model.prior * model.cond_with[cols, counts]
    without = (1 - model.prior) * model.cond_without[cols, counts]
    pred = with_ >= without
    pred = _fallback(pred, with_ / without)
    return [frozenset(model.labels[j] for j in np.flatnonzero(row)) for row in pred]


def predict_mlknn(model: MlknnModel, x):
    return predict_mlknn_batch(model, np.asarray(x, dtype=float).reshape(1, -1))[0]


def fit_baseline(strategy, data, learner=None, *, k=10, s=1.0, seed=0):
    if strategy == "mlknn":
        return fit_mlknn(data, k, s)
    if learner is None:
        raise UsageError(f"strategy {strategy!r} needs a base learner")
    spec = learner if isinstance(learner, BaseLearnerSpec) else BaseLearnerSpec(learner, seed=seed)
    return fit_transform(strategy, spec, data)


def predict_baseline(model, X):
    if isinstance(model, MlknnModel):
        return predict_mlknn_batch(model, X)
    return predict_transform_batch(model, X)
