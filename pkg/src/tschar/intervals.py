"""Interval features, the randomized interval forest, and temporal importance.

Each tree node draws ``ceil(sqrt(N))`` random intervals, computes mean,
standard deviation and slope over each, and splits on the feature/threshold
with the highest entropy gain (ties: widest margin). Nodes stop when pure or
when no split gains information.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._parallel import pmap
from ._split import GAIN_DECIMALS, best_split, encode_labels
from .core import LabeledDataset, as_array, format_float
from .errors import BadIntervalError, LengthMismatchError, SingleClassError, TooShortError

KINDS = ("mean", "std", "slope")


def _check_bounds(n: int, t1: int, t2: int) -> None:
    if not (1 <= t1 < t2 <= n):
        raise BadIntervalError(f"interval [{t1}, {t2}] invalid for length {n} (need 1 <= t1 < t2 <= N)")


def interval_features(x, t1: int, t2: int) -> dict:
    """Mean, unbiased std and least-squares slope over ``x[t1..t2]`` (1-based, inclusive)."""
    arr = as_array(x)
    _check_bounds(arr.size, t1, t2)
    seg = arr[t1 - 1 : t2]
    return {k: float(v[0]) for k, v in zip(KINDS, _batch_features(seg[None, :]))}


def _batch_features(seg: np.ndarray) -> tuple:
    """Features of each row of ``seg`` (rows = series restricted to one interval)."""
    length = seg.shape[1]
    mean = seg.mean(axis=1)
    dev = seg - mean[:, None]
    std = np.sqrt(np.sum(dev * dev, axis=1) / (length - 1))
    t = np.arange(length, dtype=float)
    tc = t - t.mean()
    slope = dev @ tc / np.dot(tc, tc)
    return mean, std, slope


@dataclass(frozen=True)
class Leaf:
    label: str


@dataclass(frozen=True)
class Node:
    kind: str
    t1: int
    t2: int
    threshold: float
    gain: float
    left: object
    right: object


def _route(node, x: np.ndarray) -> str:
    while isinstance(node, Node):
        seg = x[node.t1 - 1 : node.t2][None, :]
        value = _batch_features(seg)[KINDS.index(node.kind)][0]
        node = node.left if value < node.threshold else node.right
    return node.label


def _majority(labels) -> str:
    counts = Counter(labels)
    top = max(counts.values())
    return min(lab for lab, c in counts.items() if c == top)


@dataclass(frozen=True, eq=False)
class IntervalForest:
    trees: tuple
    seed: int
    n_timepoints: int
    classes: tuple
    max_bound: int = field(default=0)

    def predict(self, x) -> str:
        return forest_predict(self, x)


def _draw_interval(rng: np.random.Generator, n: int) -> tuple:
    t1 = int(rng.integers(1, n))  # 1..N-1 so a length-2 interval always fits
    length = int(rng.integers(2, n - t1 + 2))  # 2..N-t1+1
    return t1, t1 + length - 1


def _grow(data, labels, idx, rng, n_candidates, n_classes, classes):
    sub = labels[idx]
    if np.all(sub == sub[0]):
        return Leaf(classes[int(sub[0])])
    n = data.shape[1]
    best = None  # ((rounded gain, margin), gain, kind, t1, t2, threshold, left mask)
    for _ in range(n_candidates):
        t1, t2 = _draw_interval(rng, n)
        feats = _batch_features(data[idx, t1 - 1 : t2])
        for kind, values in zip(KINDS, feats):
            split = best_split(values, sub, n_classes)
            if split is None:
                continue
            key = (round(split.gain, GAIN_DECIMALS), split.margin)
            if best is None or key > best[0]:
                best = (key, split.gain, kind, t1, t2, split.threshold, values < split.threshold)
    if best is None or best[1] <= 0.0:
        return Leaf(_majority([classes[i] for i in sub]))
    _, gain, kind, t1, t2, thr, mask = best
    left = _grow(data, labels, idx[mask], rng, n_candidates, n_classes, classes)
    right = _grow(data, labels, idx[~mask], rng, n_candidates, n_classes, classes)
    return Node(kind, t1, t2, thr, gain, left, right)


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_index)]))


def train_forest(ds: LabeledDataset, n_trees: int = 100, seed: int = 0, n_candidates: int | None = None) -> IntervalForest:
    """Grow ``n_trees`` interval trees on the full training set.

    Tree ``i`` draws from its own RNG stream seeded by ``(seed, i)``, so the
    forest is identical whether trees are grown serially or in parallel.
    """
    if len(ds.classes) < 2:
        raise SingleClassError("interval forest needs at least two classes")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    n = ds.common_length()
    if n < 4:
        raise TooShortError("interval forest needs series of length >= 4")
    data = np.stack([s.values for s in ds.series])
    codes, classes = encode_labels(ds.labels)
    if n_candidates is None:
        n_candidates = math.ceil(math.sqrt(n))
    idx = np.arange(len(ds))

    def grow(i):
        return _grow(data, codes, idx, _tree_rng(seed, i), n_candidates, len(classes), classes)

    trees = tuple(pmap(grow, range(n_trees)))
    bound = max((_max_bound(t) for t in trees), default=0)
    return IntervalForest(trees, int(seed), n, tuple(classes), bound)


def _max_bound(node) -> int:
    if isinstance(node, Leaf):
        return 0
    return max(node.t2, _max_bound(node.left), _max_bound(node.right))


def forest_predict(forest: IntervalForest, x) -> str:
    """Majority vote over trees; ties go to the lexicographically smallest label."""
    arr = as_array(x)
    if arr.size < forest.max_bound:
        raise LengthMismatchError(f"series length {arr.size} < largest trained interval bound {forest.max_bound}")
    return _majority([_route(t, arr) for t in forest.trees])


@dataclass(frozen=True, eq=False)
class ImportanceCurve:
    mean: np.ndarray
    std: np.ndarray
    slope: np.ndarray

    def __getitem__(self, kind: str) -> np.ndarray:
        return getattr(self, kind)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,mean,std,slope\n")
            for t in range(self.mean.size):
                cells = (format_float(self.mean[t]), format_float(self.std[t]), format_float(self.slope[t]))
                fh.write(f"{t + 1},{','.join(cells)}\n")


def _internal_nodes(node):
    if isinstance(node, Node):
        yield node
        yield from _internal_nodes(node.left)
        yield from _internal_nodes(node.right)


def temporal_importance(forest: IntervalForest) -> ImportanceCurve:
    """Add each split's entropy gain to every time point of its interval, per feature kind."""
    curves = {k: np.zeros(forest.n_timepoints) for k in KINDS}
    for tree in forest.trees:
        for node in _internal_nodes(tree):
            curves[node.kind][node.t1 - 1 : node.t2] += node.gain
    return ImportanceCurve(**curves)
