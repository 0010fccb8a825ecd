"""SAX-style discretization and bag-of-patterns histograms."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import norm

from .core import as_array
from .errors import IndivisibleError, ParamMismatchError, TooShortError

_FLAT_STD = 1e-8
_ALPHABET = "abcdefghij"


@dataclass(frozen=True)
class SymbolicParams:
    w: int  # window length
    l: int  # word length (PAA segments per window)
    a: int  # alphabet size

    def __post_init__(self):
        if not 2 <= self.a <= 10:
            raise ValueError("alphabet size must be in [2, 10]")
        if not 1 <= self.l <= self.w:
            raise ValueError("need 1 <= word length <= window length")


@lru_cache(maxsize=None)
def breakpoints(a: int) -> np.ndarray:
    """The a-1 standard-normal quantiles splitting it into equiprobable regions."""
    bp = norm.ppf(np.arange(1, a) / a)
    bp.setflags(write=False)
    return bp


def discretize_window(window, params: SymbolicParams) -> str:
    """z-normalize, average into ``l`` equal segments, map each segment mean to a letter.

    A value equal to a breakpoint takes the upper letter. Windows with
    standard deviation below 1e-8 become the all-lower-middle word.
    """
    x = as_array(window)
    if x.size != params.w:
        raise ValueError(f"window has {x.size} values, expected {params.w}")
    if params.w % params.l:
        raise IndivisibleError(f"word length {params.l} does not divide window length {params.w}")
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    if sd < _FLAT_STD:
        return _ALPHABET[(params.a - 1) // 2] * params.l
    z = (x - x.mean()) / sd
    paa = z.reshape(params.l, -1).mean(axis=1)
    symbols = np.searchsorted(breakpoints(params.a), paa, side="right")
    return "".join(_ALPHABET[s] for s in symbols)


@dataclass(frozen=True)
class PatternHistogram:
    counts: dict = field(hash=False)
    params: SymbolicParams
    total_windows: int

    def frequencies(self) -> dict:
        total = sum(self.counts.values())
        return {k: v / total for k, v in self.counts.items()}


def bag_of_patterns(x, params: SymbolicParams, numerosity_reduction: bool = True) -> PatternHistogram:
    """Count the words of every stride-1 window.

    With numerosity reduction a run of consecutive identical words counts once.
    """
    arr = as_array(x)
    if arr.size < params.w:
        raise TooShortError(f"series length {arr.size} shorter than window {params.w}")
    if params.w % params.l:
        raise IndivisibleError(f"word length {params.l} does not divide window length {params.w}")
    windows = np.lib.stride_tricks.sliding_window_view(arr, params.w)
    counts: Counter = Counter()
    previous = None
    for win in windows:
        word = discretize_window(win, params)
        if numerosity_reduction and word == previous:
            continue
        counts[word] += 1
        previous = word
    return PatternHistogram(dict(sorted(counts.items())), params, int(windows.shape[0]))


def histogram_distance(h1: PatternHistogram, h2: PatternHistogram) -> float:
    """Euclidean distance between relative word frequencies over the union of words."""
    if h1.params != h2.params:
        raise ParamMismatchError("histograms were built with different parameters")
    f1, f2 = h1.frequencies(), h2.frequencies()
    words = sorted(set(f1) | set(f2))
    d = np.array([f1.get(w, 0.0) - f2.get(w, 0.0) for w in words])
    return float(np.sqrt(np.sum(d * d)))
