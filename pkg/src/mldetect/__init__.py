"""Multi-label network-attack detection: exact-duplicate multilabelization,
per-category WGAN-GP augmentation, autoencoder pre-training and a Label
PowerSet classifier, with example-based metrics and comparison baselines."""

from .data import MultiLabelDataset, RawDataset, multilabelize, overlap_report, split
from .labels import PowersetCodec, fit_codec
from .metrics import MetricsReport, evaluate, lcard, ldiv

__version__ = "0.1.0"

__all__ = [
    "MetricsReport", "MultiLabelDataset", "PowersetCodec", "RawDataset",
    "evaluate", "fit_codec", "lcard", "ldiv", "multilabelize", "overlap_report", "split",
]
