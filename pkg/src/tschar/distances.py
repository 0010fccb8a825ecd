"""Dissimilarities between time series, in the time domain and in feature space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from ._parallel import pmap
from .core import FeatureVector, LabeledDataset, as_array, check_same_names
from .errors import AllMissingError, LengthMismatchError, TscharError, WindowTooNarrowError
from .features import FeatureSpec, complexity_ce, extract_vector

KINDS = ("euclidean", "dtw", "cid", "feature")

# stands in for a vanishing complexity estimate in the CID correction factor
CID_EPS = 1e-12


@numba.njit(cache=True, nogil=True)
def _sq_euclidean(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        d = a[i] - b[i]
        acc = (d * d) + acc
    return acc


@numba.njit(cache=True, nogil=True)
def _dtw_sq(a, b, window):
    n, m = a.shape[0], b.shape[0]
    inf = np.inf
    cost = np.full((n + 1, m + 1), inf)
    cost[0, 0] = 0.0
    for i in range(1, n + 1):
        lo, hi = 1, m
        if window >= 0:
            lo = max(1, i - window)
            hi = min(m, i + window)
        for j in range(lo, hi + 1):
            d = a[i - 1] - b[j - 1]
            best = cost[i - 1, j - 1]
            if cost[i - 1, j] < best:
                best = cost[i - 1, j]
            if cost[i, j - 1] < best:
                best = cost[i, j - 1]
            cost[i, j] = (d * d) + best
    return cost[n, m]


def euclidean(x1, x2) -> float:
    a, b = as_array(x1), as_array(x2)
    if a.size != b.size:
        raise LengthMismatchError(f"lengths differ: {a.size} vs {b.size}")
    return float(np.sqrt(_sq_euclidean(a, b)))


def dtw(x1, x2, window: int | None = None) -> float:
    """Dynamic time warping with squared local costs and a final square root.

    Steps (1,0), (0,1), (1,1); both endpoints aligned. ``window`` is the
    Sakoe-Chiba half-width (``None`` = unconstrained).
    """
    a, b = as_array(x1), as_array(x2)
    if window is None:
        w = -1
    else:
        w = int(window)
        if w < 0:
            raise ValueError("window must be nonnegative")
        if w < abs(a.size - b.size):
            raise WindowTooNarrowError(
                f"window {w} cannot align lengths {a.size} and {b.size}"
            )
    return float(np.sqrt(_dtw_sq(a, b, w)))


def cid_factor(x1, x2) -> float:
    ce1, ce2 = complexity_ce(x1), complexity_ce(x2)
    hi, lo = max(ce1, ce2), min(ce1, ce2)
    if hi == 0.0:
        return 1.0
    if lo == 0.0:
        return hi / CID_EPS
    return hi / lo


def cid(x1, x2) -> float:
    """Euclidean distance scaled by the ratio of the two complexity estimates."""
    return euclidean(x1, x2) * cid_factor(x1, x2)


def masked_feature_distance(f1: FeatureVector, f2: FeatureVector) -> tuple:
    """Euclidean distance over coordinates present in both vectors.

    Returns ``(distance, n_excluded)``.
    """
    check_same_names(f1, f2)
    keep = ~(np.isnan(f1.values) | np.isnan(f2.values))
    if not keep.any():
        raise AllMissingError("no coordinate is present in both feature vectors")
    d = f1.values[keep] - f2.values[keep]
    return float(np.sqrt(np.sum(d * d))), int((~keep).sum())


def feature_distance(f1: FeatureVector, f2: FeatureVector) -> float:
    return masked_feature_distance(f1, f2)[0]


@dataclass(frozen=True)
class DistanceSpec:
    kind: str = "euclidean"
    window: int | None = None
    feature_specs: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distance kind {self.kind!r}; expected one of {KINDS}")
        if self.window is not None and self.kind != "dtw":
            raise ValueError("window only applies to dtw")
        if self.window is not None and self.window < 0:
            raise ValueError("window must be nonnegative")
        if self.kind == "feature":
            if not self.feature_specs:
                raise ValueError("feature distance needs feature_specs")
            object.__setattr__(self, "feature_specs", tuple(self.feature_specs))

    def prepare(self, x):
        """Per-series representation the kernel consumes."""
        if self.kind == "feature":
            return extract_vector(x, self.feature_specs)
        return as_array(x)

    def between(self, a, b) -> float:
        """Kernel on prepared representations."""
        if self.kind == "euclidean":
            return euclidean(a, b)
        if self.kind == "dtw":
            return dtw(a, b, self.window)
        if self.kind == "cid":
            return cid(a, b)
        return feature_distance(a, b)

    def __call__(self, x1, x2) -> float:
        return self.between(self.prepare(x1), self.prepare(x2))


def _with_pair(err: TscharError, i, j) -> TscharError:
    msg = f"pair ({i}, {j}): {err}"
    try:
        new = type(err)(msg)
    except TypeError:
        new = TscharError(msg)
    return new


def cross_matrix(rows: Sequence, cols: Sequence, spec: DistanceSpec) -> np.ndarray:
    """``D[i, j] = spec(rows[i], cols[j])``."""
    a = [spec.prepare(x) for x in rows]
    b = [spec.prepare(x) for x in cols]

    def row(i):
        out = np.empty(len(b))
        for j, y in enumerate(b):
            try:
                out[j] = spec.between(a[i], y)
            except TscharError as err:
                raise _with_pair(err, i, j) from err
        return out

    return np.array(pmap(row, range(len(a)))).reshape(len(a), len(b))


def pairwise_matrix(ds: LabeledDataset, spec: DistanceSpec) -> np.ndarray:
    """Symmetric all-pairs distance matrix with a zero diagonal."""
    reps = [spec.prepare(x) for x in ds.series]
    n = len(reps)

    def row(i):
        out = np.zeros(n)
        for j in range(i + 1, n):
            try:
                out[j] = spec.between(reps[i], reps[j])
            except TscharError as err:
                raise _with_pair(err, i, j) from err
        return out

    upper = np.array(pmap(row, range(n))).reshape(n, n)
    return np.triu(upper, 1) + np.triu(upper, 1).T
