"""Feature-based representations, distances and classifiers for time series."""

__version__ = "0.1.0"

from .core import (
    MISSING,
    FeatureMatrix,
    FeatureVector,
    LabeledDataset,
    TimeSeries,
    load_dataset,
    save_dataset,
    summary_stats,
    zscore,
)
from .errors import *  # noqa: F401,F403

__all__ = [
    "MISSING",
    "FeatureMatrix",
    "FeatureVector",
    "LabeledDataset",
    "TimeSeries",
    "load_dataset",
    "save_dataset",
    "summary_stats",
    "zscore",
]
