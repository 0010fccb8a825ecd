"""Single-threshold split search shared by shapelets, interval trees and
feature ranking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


GAIN_DECIMALS = 12


def entropy_bits(counts: np.ndarray) -> np.ndarray:
    """Shannon entropy (bits) of class-count vectors along the last axis.

    Counts are sorted first so that permuted count vectors give bit-identical
    entropies.
    """
    counts = np.sort(np.asarray(counts, dtype=float), axis=-1)
    totals = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / totals, 0.0)
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


@dataclass(frozen=True)
class SplitResult:
    threshold: float
    gain: float
    margin: float
    left_counts: tuple
    right_counts: tuple


def encode_labels(labels) -> tuple:
    classes = sorted(set(labels))
    index = {c: i for i, c in enumerate(classes)}
    return np.array([index[lab] for lab in labels], dtype=np.intp), classes


def candidate_splits(values, codes, n_classes):
    """All midpoint cuts of ``values``.

    Returns ``(order, cut_positions, thresholds, gains, margins, left_counts)``
    where cut position ``i`` separates sorted items ``[:i+1]`` from ``[i+1:]``.
    Values below the threshold go left.
    """
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    v = values[order]
    onehot = np.zeros((v.size, n_classes))
    onehot[np.arange(v.size), np.asarray(codes)[order]] = 1.0
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    cuts = np.flatnonzero(v[1:] > v[:-1])
    left = cum[cuts]
    right = total - left
    n = float(v.size)
    n_left = left.sum(axis=1)
    gains = (
        entropy_bits(total)
        - (n_left / n) * entropy_bits(left)
        - ((n - n_left) / n) * entropy_bits(right)
    )
    gains = np.maximum(gains, 0.0)
    thresholds = (v[cuts] + v[cuts + 1]) / 2.0
    margins = v[cuts + 1] - v[cuts]
    return order, cuts, thresholds, gains, margins, left


def best_split(values, codes, n_classes: int) -> SplitResult | None:
    """Information-gain maximizing threshold.

    Ties are broken by the larger margin, then by the smaller threshold.
    Returns ``None`` when all values are equal (no cut exists).
    """
    _, cuts, thresholds, gains, margins, left = candidate_splits(values, codes, n_classes)
    if cuts.size == 0:
        return None
    # gains equal to 12 decimals count as ties; lexsort's last key is primary
    best = np.lexsort((thresholds, -margins, -np.round(gains, GAIN_DECIMALS)))[0]
    total = np.bincount(np.asarray(codes), minlength=n_classes).astype(float)
    return SplitResult(
        threshold=float(thresholds[best]),
        gain=float(gains[best]),
        margin=float(margins[best]),
        left_counts=tuple(int(c) for c in left[best]),
        right_counts=tuple(int(c) for c in total - left[best]),
    )


def best_accuracy(values, codes, n_classes: int) -> float:
    """Best accuracy of a single threshold whose sides predict their majority class."""
    codes = np.asarray(codes)
    total = np.bincount(codes, minlength=n_classes)
    no_split = total.max() / codes.size
    _, cuts, _, _, _, left = candidate_splits(values, codes, n_classes)
    if cuts.size == 0:
        return float(no_split)
    right = total - left
    correct = left.max(axis=1) + right.max(axis=1)
    return float(max(no_split, correct.max() / codes.size))
