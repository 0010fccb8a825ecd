"""Global time-series features and the feature-matrix builder.

Each feature maps a whole series to a real number. The catalog at the bottom
binds names to (operation, parameters); :func:`extract_features` evaluates a
list of :class:`FeatureSpec` over a dataset, turning per-cell failures into
MISSING entries.

Conventions used throughout:

* standard deviations use the unbiased (N - 1) denominator;
* the autocorrelation keeps the ``1 / (s^2 (N - tau))`` prefactor, so the
  lag-0 value is ``(N - 1) / N`` rather than 1;
* the Fourier coefficients carry a ``1 / sqrt(N)`` factor, making the
  transform unitary (Parseval holds without rescaling).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ._parallel import pmap
from .core import (
    MISSING,
    FeatureMatrix,
    FeatureVector,
    LabeledDataset,
    TimeSeries,
    as_array,
    is_constant,
)
from .errors import (
    ConstantSeriesError,
    DegenerateScaleError,
    LagOutOfRangeError,
    TooShortError,
    TscharError,
)

logger = logging.getLogger(__name__)


def _nonconstant(x, min_length=2) -> np.ndarray:
    arr = as_array(x, min_length=min_length)
    if is_constant(arr):
        raise ConstantSeriesError("feature undefined for a constant series")
    return arr


# --- distribution ----------------------------------------------------------


def sample_variance(x) -> float:
    arr = as_array(x, min_length=2)
    d = arr - arr.mean()
    return float(np.sum(d * d) / (arr.size - 1))


def skewness(x) -> float:
    arr = _nonconstant(x)
    d = arr - arr.mean()
    m2 = np.mean(d**2)
    return float(np.mean(d**3) / m2**1.5)


def kurtosis(x) -> float:
    """Excess kurtosis (0 for a Gaussian), moment estimator."""
    arr = _nonconstant(x)
    d = arr - arr.mean()
    m2 = np.mean(d**2)
    return float(np.mean(d**4) / m2**2 - 3.0)


# --- stationarity ----------------------------------------------------------


def stat_av(x, w: int) -> float:
    """Spread of non-overlapping window means relative to the whole series.

    The trailing partial window is discarded; at least two full windows are
    required.
    """
    arr = _nonconstant(x)
    w = int(w)
    if w < 1:
        raise ValueError("window length must be positive")
    m = arr.size // w
    if m < 2:
        raise TooShortError(f"need at least 2 windows of length {w}, series has {arr.size} values")
    means = arr[: m * w].reshape(m, w).mean(axis=1)
    return float(np.std(means, ddof=1) / np.std(arr, ddof=1))


# --- autocorrelation -------------------------------------------------------


def autocorrelation(x, tau: int) -> float:
    arr = _nonconstant(x)
    n = arr.size
    tau = int(tau)
    if not 0 <= tau <= n - 2:
        raise LagOutOfRangeError(f"lag {tau} outside [0, {n - 2}]")
    d = arr - arr.mean()
    s2 = np.sum(d * d) / (n - 1)
    return float(np.sum(d[: n - tau] * d[tau:]) / (s2 * (n - tau)))


def first_zero_acf(x) -> int:
    """Smallest lag >= 1 where the autocorrelation is <= 0.

    Saturates at ``N - 2`` when no crossing occurs.
    """
    arr = _nonconstant(x)
    n = arr.size
    d = arr - arr.mean()
    s2 = np.sum(d * d) / (n - 1)
    for tau in range(1, n - 1):
        if np.sum(d[: n - tau] * d[tau:]) / (s2 * (n - tau)) <= 0:
            return tau
    return max(n - 2, 1)


# --- spectrum --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Spectrum:
    coefficients: np.ndarray
    frequencies: np.ndarray

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.coefficients) ** 2


def dft(x) -> Spectrum:
    """``c_k = N^-1/2 sum_{n=1}^{N} x_n exp(2 pi i k n / N)`` for k = 0..N-1.

    Evaluated through the FFT; the sample index starts at 1, which contributes
    the extra phase factor ``exp(2 pi i k / N)``.
    """
    arr = as_array(x, min_length=2)
    n = arr.size
    dt = x.dt if isinstance(x, TimeSeries) else 1.0
    k = np.arange(n)
    coeffs = np.fft.ifft(arr) * n * np.exp(2j * np.pi * k / n) / math.sqrt(n)
    return Spectrum(coeffs, k / (n * dt))


def _half_power(arr: np.ndarray) -> np.ndarray:
    """Power in bins 1..floor(N/2)."""
    return dft(arr).power[1 : arr.size // 2 + 1]


def spectral_entropy(x) -> float:
    """Normalized Shannon entropy of the power spectrum, zero bin excluded."""
    arr = _nonconstant(x)
    if arr.size < 4:
        raise TooShortError("spectral entropy needs at least 4 samples")
    p = _half_power(arr)
    total = p.sum()
    if total <= 0:
        raise ConstantSeriesError("no spectral power outside the zero bin")
    p = p / total
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)) / math.log(p.size))


def dominant_frequency_bin(x) -> int:
    """Index k (>= 1) of the strongest non-zero-frequency bin."""
    arr = _nonconstant(x)
    if arr.size < 2:
        raise TooShortError("need at least 2 samples")
    return int(np.argmax(_half_power(arr))) + 1


# --- entropy ---------------------------------------------------------------


def _embed(arr: np.ndarray, m: int, count: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(arr, m)[:count]


def _match_counts(vectors: np.ndarray, r: float, block: int = 512) -> np.ndarray:
    """For each vector, the number of vectors within Chebyshev distance r (self included)."""
    n = vectors.shape[0]
    counts = np.empty(n, dtype=np.int64)
    for start in range(0, n, block):
        chunk = vectors[start : start + block]
        dist = np.abs(chunk[:, None, :] - vectors[None, :, :]).max(axis=2)
        counts[start : start + block] = (dist <= r).sum(axis=1)
    return counts


def approximate_entropy(x, m: int = 2, r: float = 0.2, templates: str = "matched") -> float:
    """ApEn(m, r) = Phi^m(r) - Phi^{m+1}(r), Chebyshev distance, self-matches counted.

    ``r`` is an absolute radius. ``templates`` chooses how many embedding
    vectors enter each Phi:

    * ``"matched"`` (default): both Phi^m and Phi^{m+1} use the same N - m
      template vectors, so a perfectly predictable continuation gives exactly 0;
    * ``"pincus"``: Phi^m uses all N - m + 1 vectors of length m and
      Phi^{m+1} the N - m vectors of length m + 1.
    """
    arr = as_array(x)
    m = int(m)
    if m < 1:
        raise ValueError("embedding length must be >= 1")
    if r <= 0:
        raise ValueError("tolerance radius must be positive")
    n = arr.size
    if n < m + 2:
        raise TooShortError(f"ApEn needs N >= m + 2 (N={n}, m={m})")
    if templates == "matched":
        count_m = n - m
    elif templates == "pincus":
        count_m = n - m + 1
    else:
        raise ValueError(f"unknown template convention {templates!r}")

    def phi(length, count):
        counts = _match_counts(_embed(arr, length, count), r)
        return float(np.mean(np.log(counts / count)))

    return phi(m, count_m) - phi(m + 1, n - m)


# --- scaling ---------------------------------------------------------------


@dataclass(frozen=True)
class DFAResult:
    alpha: float
    scales: tuple
    fluctuations: tuple
    residual: float
    dropped_scales: tuple = ()


def default_dfa_scales(n: int, count: int = 20, smallest: int = 8) -> list:
    largest = n // 4
    if largest < smallest:
        return []
    grid = np.unique(np.round(np.geomspace(smallest, largest, count)).astype(int))
    return [int(s) for s in grid]


def _fluctuation(y: np.ndarray, s: int, order: int) -> float:
    segments = y[: (y.size // s) * s].reshape(-1, s)
    t = np.arange(s, dtype=float)
    design = np.vander(t, order + 1)
    coef, *_ = np.linalg.lstsq(design, segments.T, rcond=None)
    resid = segments.T - design @ coef
    return float(np.sqrt(np.mean(resid**2)))


def dfa_alpha(x, detrend_order: int = 1, scales: Sequence[int] | None = None) -> DFAResult:
    """Detrended fluctuation analysis scaling exponent.

    The mean-removed series is integrated, split into non-overlapping windows
    of each scale (tail dropped), detrended per window with a least-squares
    polynomial, and the RMS residual F(s) is regressed on s in log-log space.
    Scales whose F(s) vanishes are dropped; fewer than four usable scales is
    an error.
    """
    arr = as_array(x, min_length=2)
    n = arr.size
    if detrend_order not in (1, 2):
        raise ValueError("detrend_order must be 1 or 2")
    if scales is None:
        scales = default_dfa_scales(n)
    scales = sorted({int(s) for s in scales})
    if len(scales) < 4:
        raise TooShortError(f"DFA needs at least 4 distinct scales (got {len(scales)}, N={n})")
    if scales[0] < detrend_order + 2:
        raise ValueError(f"smallest scale must be >= {detrend_order + 2}")
    if n < 4 * scales[-1]:
        raise TooShortError(f"N={n} is shorter than 4 x largest scale {scales[-1]}")

    y = np.cumsum(arr - arr.mean())
    # F(s) below this is numerically a perfect polynomial fit
    floor = 1e-10 * float(np.max(np.abs(y)))
    kept, fluct, dropped = [], [], []
    for s in scales:
        f = _fluctuation(y, s, detrend_order)
        if f <= floor or f == 0.0:
            dropped.append(s)
            continue
        kept.append(s)
        fluct.append(f)
    if dropped:
        logger.info("DFA dropped degenerate scales %s", dropped)
    if len(kept) < 4:
        raise DegenerateScaleError(
            f"fluctuation vanishes at scales {dropped}; only {len(kept)} usable scales"
        )
    log_s = np.log(kept)
    log_f = np.log(fluct)
    slope, intercept = np.polyfit(log_s, log_f, 1)
    residual = float(np.sqrt(np.mean((log_f - (slope * log_s + intercept)) ** 2)))
    return DFAResult(float(slope), tuple(kept), tuple(fluct), residual, tuple(dropped))


# --- exponential smoothing ---------------------------------------------------


DEFAULT_ALPHA_GRID = tuple(round(0.01 * i, 2) for i in range(1, 101))


@dataclass(frozen=True)
class SmoothingFit:
    alpha_opt: float
    sse_per_point: float
    residual_acf1: float  # NaN (MISSING) when the residuals are constant
    residuals: np.ndarray = field(repr=False, compare=False, default=None)


def smoothed_predictions(x, alpha: float) -> np.ndarray:
    """One-step predictions ``p_1..p_{N+1}`` with ``p_1 = x_1`` and
    ``p_{t+1} = alpha x_t + (1 - alpha) p_t``."""
    arr = as_array(x)
    if not 0 < alpha <= 1:
        raise ValueError("smoothing parameter must lie in (0, 1]")
    pred = np.empty(arr.size + 1)
    pred[0] = arr[0]
    for t in range(arr.size):
        pred[t + 1] = alpha * arr[t] + (1 - alpha) * pred[t]
    return pred


def exp_smoothing_fit(x, alpha_grid: Sequence[float] | None = None) -> SmoothingFit:
    """Grid-search the smoothing parameter minimizing one-step squared error.

    Errors are ``x_t - p_t`` for t = 2..N. Ties go to the smallest alpha.
    """
    arr = as_array(x)
    if arr.size < 4:
        raise TooShortError("exponential smoothing fit needs N >= 4")
    grid = np.array(sorted(DEFAULT_ALPHA_GRID if alpha_grid is None else alpha_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("alpha grid is empty")
    if np.any(grid <= 0) or np.any(grid > 1):
        raise ValueError("alpha grid values must lie in (0, 1]")
    # all grid values at once: pred has shape (len(grid),)
    pred = np.full(grid.size, arr[0])
    sse = np.zeros(grid.size)
    for t in range(1, arr.size):
        pred = grid * arr[t - 1] + (1 - grid) * pred
        err = arr[t] - pred
        sse += err * err
    best = int(np.argmin(sse))  # first minimum = smallest alpha
    alpha = float(grid[best])
    residuals = arr[1:] - smoothed_predictions(arr, alpha)[1:-1]
    try:
        acf1 = autocorrelation(residuals, 1)
    except ConstantSeriesError:
        acf1 = MISSING
    return SmoothingFit(alpha, float(sse[best] / (arr.size - 1)), acf1, residuals)


def exp_smoothing_forecast(x, alpha: float, h: int = 1) -> np.ndarray:
    """Flat h-step forecast at the final smoothed level."""
    arr = as_array(x)
    if h < 1:
        raise ValueError("horizon must be >= 1")
    level = smoothed_predictions(arr, alpha)[-1]
    return np.full(int(h), level)


# --- complexity ------------------------------------------------------------


def complexity_ce(x) -> float:
    """Length of the line through successive points: sqrt(sum of squared differences)."""
    arr = as_array(x, min_length=2)
    d = np.diff(arr)
    return float(np.sqrt(np.sum(d * d)))


# --- catalog ---------------------------------------------------------------


def _stat_av_frac(x, frac):
    arr = as_array(x)
    return stat_av(arr, max(1, int(arr.size * frac)))


def _apen_frac(x, m, r_frac):
    arr = _nonconstant(x)
    return approximate_entropy(arr, m, r_frac * np.std(arr, ddof=1))


def _dfa(x, order):
    return dfa_alpha(x, detrend_order=order).alpha


def _es(attr):
    def get(x):
        value = getattr(exp_smoothing_fit(x), attr)
        if attr == "residual_acf1" and math.isnan(value):
            raise ConstantSeriesError("smoothing residuals are constant")
        return value

    get.__name__ = f"es_{attr}"
    return get


OPERATIONS: dict = {
    "mean": lambda x: float(as_array(x).mean()),
    "std": lambda x: math.sqrt(sample_variance(x)),
    "variance": sample_variance,
    "skewness": skewness,
    "kurtosis": kurtosis,
    "min": lambda x: float(as_array(x).min()),
    "max": lambda x: float(as_array(x).max()),
    "acf": autocorrelation,
    "first_zero_acf": first_zero_acf,
    "stat_av": stat_av,
    "stat_av_frac": _stat_av_frac,
    "spectral_entropy": spectral_entropy,
    "dominant_freq_bin": dominant_frequency_bin,
    "apen": approximate_entropy,
    "apen_frac": _apen_frac,
    "dfa_alpha": _dfa,
    "es_alpha_opt": _es("alpha_opt"),
    "es_sse_per_point": _es("sse_per_point"),
    "es_residual_acf1": _es("residual_acf1"),
    "ce": complexity_ce,
    "length": lambda x: float(as_array(x).size),
}


@dataclass(frozen=True)
class FeatureSpec:
    """A named feature: an operation from :data:`OPERATIONS` plus bound parameters."""

    name: str
    op: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.op not in OPERATIONS:
            raise ValueError(f"unknown feature operation {self.op!r}")
        object.__setattr__(self, "params", dict(self.params))

    def __hash__(self):
        return hash((self.name, self.op, tuple(sorted(self.params.items()))))

    def compute(self, x) -> float:
        value = float(OPERATIONS[self.op](x, **self.params))
        if not math.isfinite(value):
            raise TscharError(f"feature {self.name!r} produced a non-finite value")
        return value

    def to_dict(self) -> dict:
        return {"name": self.name, "op": self.op, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSpec":
        return cls(d["name"], d["op"], d.get("params", {}))


STANDARD_22 = (
    FeatureSpec("mean", "mean"),
    FeatureSpec("std", "std"),
    FeatureSpec("skewness", "skewness"),
    FeatureSpec("kurtosis", "kurtosis"),
    FeatureSpec("min", "min"),
    FeatureSpec("max", "max"),
    FeatureSpec("acf_1", "acf", {"tau": 1}),
    FeatureSpec("acf_2", "acf", {"tau": 2}),
    FeatureSpec("acf_3", "acf", {"tau": 3}),
    FeatureSpec("first_zero_acf", "first_zero_acf"),
    FeatureSpec("stat_av_n10", "stat_av_frac", {"frac": 0.1}),
    FeatureSpec("stat_av_n4", "stat_av_frac", {"frac": 0.25}),
    FeatureSpec("spectral_entropy", "spectral_entropy"),
    FeatureSpec("dominant_freq_bin", "dominant_freq_bin"),
    FeatureSpec("apen_2_0.2", "apen_frac", {"m": 2, "r_frac": 0.2}),
    FeatureSpec("dfa_alpha_linear", "dfa_alpha", {"order": 1}),
    FeatureSpec("dfa_alpha_quadratic", "dfa_alpha", {"order": 2}),
    FeatureSpec("es_alpha_opt", "es_alpha_opt"),
    FeatureSpec("es_sse_per_point", "es_sse_per_point"),
    FeatureSpec("es_residual_acf1", "es_residual_acf1"),
    FeatureSpec("ce", "ce"),
    FeatureSpec("length", "length"),
)

FEATURE_SETS = {"standard-22": STANDARD_22}


def feature_set(name: str) -> tuple:
    try:
        return FEATURE_SETS[name]
    except KeyError:
        raise ValueError(f"unknown feature set {name!r}; known: {sorted(FEATURE_SETS)}") from None


def _check_specs(specs: Sequence[FeatureSpec]) -> tuple:
    specs = tuple(specs)
    if not specs:
        raise ValueError("at least one feature spec is required")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("feature spec names must be unique")
    return specs


def _extract_row(x, specs) -> tuple:
    values, reasons = [], {}
    for spec in specs:
        try:
            values.append(spec.compute(x))
        except (TscharError, ArithmeticError, ValueError, np.linalg.LinAlgError) as err:
            values.append(MISSING)
            reasons[spec.name] = f"{type(err).__name__}: {err}"
    return values, reasons


def extract_vector(x, specs: Sequence[FeatureSpec]) -> FeatureVector:
    specs = _check_specs(specs)
    values, reasons = _extract_row(x, specs)
    for name, why in reasons.items():
        logger.info("feature %s missing: %s", name, why)
    return FeatureVector(tuple(s.name for s in specs), values)


def extract_features(ds: LabeledDataset, specs: Sequence[FeatureSpec]) -> FeatureMatrix:
    """Series x feature matrix; a failing cell becomes MISSING with its reason recorded."""
    specs = _check_specs(specs)
    rows = pmap(lambda s: _extract_row(s, specs), ds.series)
    reasons = {}
    for s, (_, why) in zip(ds.series, rows):
        for name, text in why.items():
            logger.info("series %s feature %s missing: %s", s.id, name, text)
            reasons[(s.id, name)] = text
    values = np.array([r[0] for r in rows], dtype=float).reshape(len(ds), len(specs))
    return FeatureMatrix(ds.ids, tuple(s.name for s in specs), values, reasons)
