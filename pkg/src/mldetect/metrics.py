"""Example-based multi-label metrics and dataset label statistics."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import ArgumentError

METRIC_FIELDS = ("subsetacc", "hloss", "acc", "precision", "recall", "f1")


@dataclass
class MetricsReport:
    subsetacc: float
    hloss: float
    acc: float
    precision: float
    recall: float
    f1: float
    n: int

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in METRIC_FIELDS + ("n",)})


def _label_sets(data):
    labels = data.labels if hasattr(data, "labels") else data
    if not len(labels):
        raise ArgumentError("label statistics need a non-empty dataset")
    return labels


def lcard(data) -> float:
    """Mean label-set size over unique samples."""
    labels = _label_sets(data)
    return float(np.mean([len(y) for y in labels]))


def ldiv(data) -> int:
    """Number of distinct label sets."""
    return len({frozenset(y) for y in _label_sets(data)})


def evaluate(predictions, truths) -> MetricsReport:
    if len(predictions) != len(truths):
        raise ArgumentError(f"{len(predictions)} predictions for {len(truths)} truths")
    if not len(truths):
        raise ArgumentError("evaluate needs at least one sample")
    n = len(truths)
    exact = inter = union = sym = prec = rec = 0.0
    for h, y in zip(predictions, truths):
        h, y = frozenset(h), frozenset(y)
        if not h:
            raise ArgumentError("empty prediction set; apply a fallback before evaluating")
        if not y:
            raise ArgumentError("empty truth set")
        common = len(h & y)
        exact += h == y
        sym += len(h ^ y)
        inter += common / len(h | y)
        prec += common / len(h)
        rec += common / len(y)
    p, r = prec / n, rec / n
    # correctly rounded harmonic mean, so f1 can never leave [min(p, r), max(p, r)]
    f1 = float(2 * Fraction(p) * Fraction(r) / (Fraction(p) + Fraction(r))) if p + r > 0 else 0.0
    return MetricsReport(exact / n, sym / n, inter / n, p, r, f1, n)
