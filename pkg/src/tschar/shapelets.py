"""Shapelet discovery by exhaustive candidate search, and the shapelet transform.

The distance between a subsequence and a series is the minimum Euclidean
distance over all alignments. A candidate's quality is the information gain
of the best single threshold on its distances to every training series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._split import GAIN_DECIMALS, best_split, encode_labels
from .core import FeatureMatrix, LabeledDataset, as_array
from .errors import (
    InsufficientCandidatesError,
    SingleClassError,
    SubsequenceTooLongError,
    TooShortError,
)

_FLAT_STD = 1e-8


@dataclass(frozen=True, eq=False)
class Subsequence:
    values: np.ndarray
    source_id: str
    start: int  # 1-based

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.size < 2:
            raise ValueError("subsequence length must be >= 2")
        if self.start < 1:
            raise ValueError("start is 1-based and must be >= 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def interval(self) -> tuple:
        """Half-open ``[start, start + length)``."""
        return self.start, self.start + self.values.size


@dataclass(frozen=True, eq=False)
class Shapelet:
    subsequence: Subsequence
    threshold: float
    gain: float
    margin: float
    left_label: str  # majority class among series closer than the threshold

    def to_dict(self) -> dict:
        return {
            "values": self.subsequence.values.tolist(),
            "source_id": self.subsequence.source_id,
            "start": self.subsequence.start,
            "length": len(self.subsequence),
            "gain": self.gain,
            "threshold": self.threshold,
            "margin": self.margin,
            "left_label": self.left_label,
        }


def _znorm_rows(a: np.ndarray) -> np.ndarray:
    mu = a.mean(axis=-1, keepdims=True)
    sd = a.std(axis=-1, ddof=1, keepdims=True)
    safe = np.where(sd < _FLAT_STD, 1.0, sd)
    return np.where(sd < _FLAT_STD, 0.0, (a - mu) / safe)


def _windows(x: np.ndarray, length: int, normalize: bool) -> np.ndarray:
    w = np.lib.stride_tricks.sliding_window_view(x, length)
    return _znorm_rows(w) if normalize else w


def subsequence_distance(s, x, normalize: bool = False) -> float:
    """Minimum Euclidean distance between ``s`` and every length-l window of ``x``.

    With ``normalize`` both the subsequence and each window are z-normalized
    first (off by default).
    """
    sv = s.values if isinstance(s, Subsequence) else as_array(s)
    xv = as_array(x)
    if sv.size > xv.size:
        raise SubsequenceTooLongError(f"subsequence length {sv.size} > series length {xv.size}")
    if normalize:
        sv = _znorm_rows(sv)
    diff = _windows(xv, sv.size, normalize) - sv
    return float(np.sqrt(np.min(np.sum(diff * diff, axis=1))))


def optimal_split(distances, labels):
    """Best information-gain threshold on a list of distances.

    Thresholds are midpoints between consecutive distinct sorted distances;
    ties go to the wider gap, then the smaller threshold. When every
    distance is equal no cut exists and the gain is 0 with the threshold at
    the common value.
    """
    labels = [str(lab) for lab in labels]
    d = np.asarray(distances, dtype=float)
    if d.size != len(labels):
        raise ValueError("distances and labels must align")
    if d.size < 2:
        raise TooShortError("need at least two items to split")
    codes, classes = encode_labels(labels)
    if len(classes) < 2:
        raise SingleClassError("split needs at least two classes")
    return best_split(d, codes, len(classes))


def _left_label(split, classes) -> str:
    counts = np.array(split.left_counts)
    return classes[int(np.argmax(counts))]  # argmax picks the lexicographically first tie


@dataclass(frozen=True)
class _Scored:
    key: tuple  # sort key: (-gain, -margin, length, source_id, start)
    length: int
    source: int
    start: int  # 0-based
    gain: float
    margin: float
    threshold: float
    left_label: str


def _check_discovery(ds: LabeledDataset, l_min: int, l_max: int, stride: int):
    if len(ds.classes) < 2:
        raise SingleClassError("shapelet discovery needs at least two classes")
    shortest = min(len(s) for s in ds.series)
    if not 2 <= l_min <= l_max:
        raise ValueError(f"need 2 <= l_min <= l_max (got {l_min}, {l_max})")
    if l_max > shortest:
        raise TooShortError(f"l_max={l_max} exceeds the shortest series length {shortest}")
    if stride < 1:
        raise ValueError("stride must be >= 1")


def _score_candidates(ds, l_min, l_max, stride, normalize) -> list:
    codes, classes = encode_labels(ds.labels)
    arrays = [s.values for s in ds.series]
    scored = []
    equal = len({x.size for x in arrays}) == 1
    for length in range(l_min, l_max + 1):
        windows = [_windows(x, length, normalize) for x in arrays]
        stacked = np.stack(windows) if equal else None
        for src, x in enumerate(arrays):
            for start in range(0, x.size - length + 1, stride):
                cand = windows[src][start]
                if equal:
                    diff = stacked - cand
                    dists = np.sqrt(np.min(np.sum(diff * diff, axis=2), axis=1))
                else:
                    dists = np.array(
                        [np.sqrt(np.min(np.sum((w - cand) * (w - cand), axis=1))) for w in windows]
                    )
                split = best_split(dists, codes, len(classes))
                if split is None:
                    gain, margin, thr = 0.0, 0.0, float(dists[0])
                    left = classes[0]
                else:
                    gain, margin, thr = split.gain, split.margin, split.threshold
                    left = _left_label(split, classes)
                sid = ds.series[src].id
                scored.append(
                    _Scored((-round(gain, GAIN_DECIMALS), -margin, length, sid, start), length, src, start, gain, margin, thr, left)
                )
    scored.sort(key=lambda c: c.key)
    return scored


def _to_shapelet(ds, c: _Scored) -> Shapelet:
    src = ds.series[c.source]
    sub = Subsequence(src.values[c.start : c.start + c.length], src.id, c.start + 1)
    return Shapelet(sub, c.threshold, c.gain, c.margin, c.left_label)


def discover_shapelet(
    ds: LabeledDataset, l_min: int, l_max: int, stride: int = 1, normalize: bool = False
) -> Shapelet:
    """Most informative subsequence over all training series and lengths.

    Ties: larger margin, then shorter length, then smaller (source id, start).
    With ``stride > 1`` only every stride-th start index is tried, so the
    result is an approximation of the full search.
    """
    _check_discovery(ds, l_min, l_max, stride)
    return _to_shapelet(ds, _score_candidates(ds, l_min, l_max, stride, normalize)[0])


def _overlaps(a: Shapelet, b: Shapelet) -> bool:
    if a.subsequence.source_id != b.subsequence.source_id:
        return False
    s1, e1 = a.subsequence.interval
    s2, e2 = b.subsequence.interval
    return s1 < e2 and s2 < e1


@dataclass(frozen=True, eq=False)
class ShapeletTransform:
    shapelets: tuple
    features: FeatureMatrix
    normalize: bool = False

    def transform(self, ds: LabeledDataset) -> FeatureMatrix:
        return apply_shapelets(self.shapelets, ds, self.normalize)


def apply_shapelets(shapelets, ds: LabeledDataset, normalize: bool = False) -> FeatureMatrix:
    """Column j holds the distance from every series to shapelet j."""
    values = np.array(
        [[subsequence_distance(sh.subsequence, x, normalize) for sh in shapelets] for x in ds.series]
    ).reshape(len(ds), len(shapelets))
    names = tuple(f"shapelet_{j}" for j in range(len(shapelets)))
    return FeatureMatrix(ds.ids, names, values)


def shapelet_transform(
    ds: LabeledDataset,
    k: int,
    l_min: int,
    l_max: int,
    stride: int = 1,
    normalize: bool = False,
) -> ShapeletTransform:
    """Top-k shapelets, skipping any that overlap an already chosen one from
    the same series, plus the resulting distance matrix."""
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_discovery(ds, l_min, l_max, stride)
    chosen = []
    for cand in _score_candidates(ds, l_min, l_max, stride, normalize):
        sh = _to_shapelet(ds, cand)
        if any(_overlaps(sh, c) for c in chosen):
            continue
        chosen.append(sh)
        if len(chosen) == k:
            break
    if len(chosen) < k:
        raise InsufficientCandidatesError(f"only {len(chosen)} non-overlapping candidates for k={k}")
    return ShapeletTransform(tuple(chosen), apply_shapelets(chosen, ds, normalize), normalize)
