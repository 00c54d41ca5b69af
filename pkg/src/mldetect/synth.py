"""Desk-scale synthetic corpora with exact duplicates by construction.

Each category is a Gaussian mixture whose samples are quantized onto a grid in
[0, 1]. A point drawn for category ``i`` is re-emitted under label ``j`` with
probability ``overlap_matrix[i][j]``; the re-emission is an exact duplicate, so
multilabelization turns it into a multi-labeled sample.

The generating parameters are kept as :class:`SynthGroundTruth`, which gives the
exact posterior over label sets and hence a Bayes-optimal reference predictor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, logsumexp

from .data import RawDataset
from .errors import ArgumentError


@dataclass
class SynthSpec:
    n_categories: int = 5
    samples_per_category: int = 400
    grid_resolution: int = 50
    overlap_matrix: list | None = None
    dim: int = 8
    seed: int = 0
    n_components: int = 2
    spread: float = 0.08
    mean_low: float = 0.15
    mean_high: float = 0.85
    category_names: list | None = None
    component_means: list | None = None

    def __post_init__(self):
        if self.n_categories < 2:
            raise ArgumentError("n_categories must be >= 2")
        if self.grid_resolution < 1 or self.dim < 1 or self.samples_per_category < 0:
            raise ArgumentError("grid_resolution and dim must be positive")
        if self.overlap_matrix is None:
            self.overlap_matrix = np.eye(self.n_categories).tolist()
        P = np.asarray(self.overlap_matrix, dtype=float)
        if P.shape != (self.n_categories, self.n_categories):
            raise ArgumentError(f"overlap_matrix must be {self.n_categories}x{self.n_categories}")
        if (P < 0).any() or (P > 1).any() or not np.allclose(np.diag(P), 1.0):
            raise ArgumentError("overlap_matrix entries must lie in [0, 1] with unit diagonal")
        if self.category_names is None:
            self.category_names = [f"cat{i}" for i in range(self.n_categories)]
        if len(self.category_names) != self.n_categories:
            raise ArgumentError("category_names length must equal n_categories")

    @classmethod
    def uniform(cls, n_categories=5, overlap=0.1, **kw):
        P = np.full((n_categories, n_categories), float(overlap))
        np.fill_diagonal(P, 1.0)
        return cls(n_categories=n_categories, overlap_matrix=P.tolist(), **kw)

    def to_dict(self):
        return {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


def _log_interval_prob(a, b):
    """log(Phi(b) - Phi(a)) for a < b, stable in both tails."""
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    lhi = log_ndtr(hi)
    llo = log_ndtr(lo)
    with np.errstate(divide="ignore"):
        return lhi + np.log1p(-np.exp(llo - lhi))


@dataclass
class SynthGroundTruth:
    means: np.ndarray          # (C, K, d)
    weights: np.ndarray        # (C, K)
    spread: float
    grid_resolution: int
    overlap: np.ndarray        # (C, C)
    counts: np.ndarray         # (C,) points drawn per category
    names: list = field(default_factory=list)

    def log_likelihood(self, X):
        """Exact log-probability of each quantized point under each category, (n, C)."""
        X = np.asarray(X, dtype=float)
        g = self.grid_resolution
        k = np.rint(X * g)
        lo = np.where(k <= 0, -np.inf, (k - 0.5) / g)
        hi = np.where(k >= g, np.inf, (k + 0.5) / g)
        C, K, _ = self.means.shape
        out = np.empty((X.shape[0], C))
        for c in range(C):
            comp = np.empty((X.shape[0], K))
            for m in range(K):
                mu = self.means[c, m]
                a = (lo - mu) / self.spread
                b = (hi - mu) / self.spread
                comp[:, m] = np.log(self.weights[c, m]) + _log_interval_prob(a, b).sum(axis=1)
            out[:, c] = logsumexp(comp, axis=1)
        return out

    def origin_posterior(self, X):
        with np.errstate(divide="ignore"):
            logp = self.log_likelihood(X) + np.log(self.counts / self.counts.sum())
        return np.exp(logp - logsumexp(logp, axis=1, keepdims=True))

    def label_sets(self):
        C = len(self.counts)
        return [frozenset(self.names[i] for i in combo)
                for r in range(1, C + 1) for combo in itertools.combinations(range(C), r)]

    def set_given_origin(self):
        """Matrix A[s, i] = P(label set s | drawn from category i)."""
        C = len(self.counts)
        sets = [set(combo) for r in range(1, C + 1) for combo in itertools.combinations(range(C), r)]
        A = np.zeros((len(sets), C))
        for s, members in enumerate(sets):
            for i in members:
                p = 1.0
                for j in range(C):
                    if j != i:
                        p *= self.overlap[i, j] if j in members else 1.0 - self.overlap[i, j]
                A[s, i] = p
        return A

    def label_set_posterior(self, X):
        return self.origin_posterior(X) @ self.set_given_origin().T

    def bayes_predict(self, X):
        """Maximum-a-posteriori label set per row (ties go to the earlier set)."""
        sets = self.label_sets()
        return [sets[s] for s in np.argmax(self.label_set_posterior(X), axis=1)]

    def expected_lcard(self):
        extra = (self.overlap.sum(axis=1) - np.diag(self.overlap))
        return float(((1.0 + extra) * self.counts).sum() / self.counts.sum())

    def to_dict(self):
        return {
            "means": self.means.tolist(), "weights": self.weights.tolist(), "spread": self.spread,
            "grid_resolution": self.grid_resolution, "overlap": self.overlap.tolist(),
            "counts": self.counts.tolist(), "names": list(self.names),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["means"]), np.asarray(d["weights"]), float(d["spread"]),
                   int(d["grid_resolution"]), np.asarray(d["overlap"]), np.asarray(d["counts"]),
                   list(d["names"]))


def synth_generate(spec: SynthSpec) -> RawDataset:
    rng = np.random.default_rng(spec.seed)
    C, K, d, g = spec.n_categories, spec.n_components, spec.dim, spec.grid_resolution
    if spec.component_means is not None:
        means = np.asarray(spec.component_means, dtype=float).reshape(C, -1, d)
        K = means.shape[1]
    else:
        means = rng.uniform(spec.mean_low, spec.mean_high, size=(C, K, d))
    weights = np.full((C, K), 1.0 / K)
    P = np.asarray(spec.overlap_matrix, dtype=float)
    names = list(spec.category_names)

    rows, labels = [], []
    for i in range(C):
        n = spec.samples_per_category
        comp = rng.integers(K, size=n)
        x = means[i, comp] + spec.spread * rng.standard_normal((n, d))
        q = np.clip(np.rint(x * g), 0, g) / g
        reemit = rng.random((n, C)) < P[i]
        reemit[:, i] = False
        for r in range(n):
            rows.append(q[r])
            labels.append(names[i])
            for j in np.flatnonzero(reemit[r]):
                rows.append(q[r])
                labels.append(names[j])
    X = np.asarray(rows, dtype=float).reshape(-1, d)
    truth = SynthGroundTruth(means, weights, float(spec.spread), g, P,
                             np.full(C, spec.samples_per_category, dtype=float), names)
    return RawDataset(X, labels, tuple(names), tuple(f"f{j}" for j in range(d)),
                      {"schema": "synth", "ground_truth": truth, "synth_spec": spec.to_dict()})


def separable_spec(seed=0, n_categories=5, samples_per_category=200, dim=8):
    """Duplicate-free, well-separated corpus used for baseline sanity checks."""
    rng = np.random.default_rng(seed + 7919)
    means = rng.uniform(0.1, 0.9, size=(n_categories, 1, dim))
    return SynthSpec(n_categories=n_categories, samples_per_category=samples_per_category,
                     grid_resolution=1000, dim=dim, seed=seed, n_components=1, spread=0.03,
                     component_means=means.tolist())
