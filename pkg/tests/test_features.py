import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from synthetic import acf_direct, apen_direct, dft_direct
from tschar.core import LabeledDataset, TimeSeries
from tschar.errors import (
    ConstantSeriesError,
    DegenerateScaleError,
    LagOutOfRangeError,
    TooShortError,
)
from tschar.features import (
    STANDARD_22,
    FeatureSpec,
    approximate_entropy,
    autocorrelation,
    complexity_ce,
    dfa_alpha,
    dft,
    exp_smoothing_fit,
    exp_smoothing_forecast,
    extract_features,
    extract_vector,
    first_zero_acf,
    sample_variance,
    smoothed_predictions,
    spectral_entropy,
    stat_av,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
series = arrays(np.float64, st.integers(4, 80), elements=finite).filter(lambda a: np.ptp(a) > 1e-3)


def rng(seed=0):
    return np.random.default_rng(seed)


# --- variance / StatAv ------------------------------------------------------


@pytest.mark.parametrize("x, expected", [([5, 5, 5, 5], 0.0), ([1, 2, 3], 1.0), ([0, 2], 2.0)])
def test_sample_variance(x, expected):
    assert sample_variance(x) == expected


def test_stat_av_step_series():
    x = np.r_[np.zeros(50), np.full(50, 10.0)]
    # window means {0, 10}: std sqrt(50); whole series std sqrt(2500 / 99)
    expected = math.sqrt(50) / math.sqrt(2500 / 99)
    assert stat_av(x, 50) == pytest.approx(expected, rel=1e-12)
    assert stat_av(x, 50) == pytest.approx(1.40713, abs=1e-4)


def test_stat_av_discards_partial_window_and_errors():
    x = np.r_[np.zeros(50), np.full(50, 10.0), [123.0]]
    means = [0.0, 10.0]
    assert stat_av(x, 50) == pytest.approx(np.std(means, ddof=1) / np.std(x, ddof=1))
    with pytest.raises(ConstantSeriesError):
        stat_av(np.ones(20), 5)
    with pytest.raises(TooShortError):
        stat_av(np.arange(10.0), 6)


# --- autocorrelation --------------------------------------------------------


def test_acf_lag_zero_literal_prefactor():
    x = rng().standard_normal(10)
    assert autocorrelation(x, 0) == pytest.approx(0.9, abs=1e-12)


def test_acf_alternating():
    x = np.tile([1.0, -1.0], 50)
    assert autocorrelation(x, 1) == pytest.approx(-0.99, abs=1e-12)


def test_acf_errors():
    with pytest.raises(LagOutOfRangeError):
        autocorrelation([1.0, 2.0, 3.0], 2)
    with pytest.raises(ConstantSeriesError):
        autocorrelation([2.0, 2.0, 2.0], 1)


@settings(max_examples=40, deadline=None)
@given(series, st.data())
def test_acf_matches_direct_sum(x, data):
    tau = data.draw(st.integers(0, x.size - 2))
    assert autocorrelation(x, tau) == pytest.approx(acf_direct(list(x), tau), rel=1e-9, abs=1e-9)


def test_first_zero_acf_sinusoid():
    # cosine phase: the literal finite-sample ACF at T/4 is <= 0
    x = np.cos(2 * np.pi * np.arange(1000) / 20)
    assert first_zero_acf(x) == 5


def test_first_zero_acf_ramp_matches_scan():
    x = np.arange(100.0)
    scan = next(t for t in range(1, 99) if acf_direct(list(x), t) <= 0)
    assert first_zero_acf(x) == scan


def test_first_zero_acf_noise_is_small():
    hits = sum(first_zero_acf(rng(s).standard_normal(1000)) <= 5 for s in range(100))
    assert hits >= 95


# --- Fourier ----------------------------------------------------------------


def test_dft_constant_and_tone():
    spec = dft([3.0, 3.0, 3.0, 3.0])
    assert abs(spec.coefficients[0]) == pytest.approx(6.0)
    assert np.allclose(spec.coefficients[1:], 0, atol=1e-12)
    n = np.arange(32)
    power = dft(np.cos(2 * np.pi * 3 * n / 32)).power
    assert set(np.argsort(power)[-2:]) == {3, 29}
    assert power.sum() - power[[3, 29]].sum() < 1e-20


def test_dft_matches_direct_sum_and_frequencies():
    x = rng(1).standard_normal(16)
    assert np.allclose(dft(x).coefficients, dft_direct(x), atol=1e-12)
    spec = dft(TimeSeries(x, dt=0.5))
    assert spec.frequencies[1] == pytest.approx(1 / (16 * 0.5))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(2, 128), elements=finite))
def test_parseval(x):
    total = np.sum(x * x)
    assert np.sum(dft(x).power) == pytest.approx(total, rel=1e-8, abs=1e-12)


# --- spectral entropy -------------------------------------------------------


def test_spectral_entropy_sine_and_two_tone():
    n = np.arange(256)
    assert spectral_entropy(np.sin(2 * np.pi * 8 * n / 256)) <= 0.1
    two = np.sin(2 * np.pi * 8 * n / 256) + np.sin(2 * np.pi * 30 * n / 256)
    assert spectral_entropy(two) == pytest.approx(math.log(2) / math.log(128), abs=1e-10)


def test_spectral_entropy_noise_is_high():
    hits = sum(spectral_entropy(rng(s).standard_normal(4096)) >= 0.9 for s in range(100))
    assert hits >= 95


# --- ApEn ---------------------------------------------------------------------


def test_apen_constant_is_zero():
    assert approximate_entropy(np.full(30, 4.0), 2, 0.5) == 0.0


def test_apen_period_two_against_counting_oracle():
    x = [1.0, 2.0] * 50
    oracle = apen_direct(x, 2, 0.5)
    assert oracle == pytest.approx(0.0, abs=1e-10)
    assert approximate_entropy(x, 2, 0.5) == pytest.approx(oracle, abs=1e-10)


def test_apen_pincus_convention_against_oracle():
    x = list(rng(2).uniform(size=60))
    for matched, conv in ((True, "matched"), (False, "pincus")):
        assert approximate_entropy(x, 2, 0.2, conv) == pytest.approx(apen_direct(x, 2, 0.2, matched), abs=1e-12)


def test_apen_noise_exceeds_periodic():
    periodic = approximate_entropy([1.0, 2.0] * 50, 2, 0.5)
    for s in range(20):
        u = rng(s).uniform(size=1000)
        assert approximate_entropy(u, 2, 0.2 * u.std(ddof=1)) > periodic


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.integers(5, 40), elements=finite), st.floats(0.01, 100))
def test_apen_nonnegative(x, r):
    assert approximate_entropy(x, 2, r) >= -1e-10


def test_apen_too_short():
    with pytest.raises(TooShortError):
        approximate_entropy([1.0, 2.0, 3.0], 2, 0.5)


# --- DFA ----------------------------------------------------------------------


def test_dfa_white_noise_and_random_walk():
    white = np.mean([dfa_alpha(rng(s).standard_normal(10000)).alpha for s in range(20)])
    walk = np.mean([dfa_alpha(np.cumsum(rng(s).standard_normal(10000))).alpha for s in range(20)])
    assert white == pytest.approx(0.5, abs=0.05)
    assert walk == pytest.approx(1.5, abs=0.1)
    assert white < walk


def test_dfa_degenerate_inputs():
    # a straight line integrates to a parabola, which quadratic detrending removes
    with pytest.raises(DegenerateScaleError):
        dfa_alpha(np.arange(1000.0), detrend_order=2)
    with pytest.raises(DegenerateScaleError):
        dfa_alpha(np.full(1000, 3.0))


def test_dfa_fluctuation_matches_direct_computation():
    x = rng(3).standard_normal(400)
    res = dfa_alpha(x, 1, [8, 16, 32, 64, 100])
    y = np.cumsum(x - x.mean())
    s = 32
    resid = []
    for i in range(len(y) // s):
        seg = y[i * s : (i + 1) * s]
        t = np.arange(s)
        resid.extend(seg - np.polyval(np.polyfit(t, seg, 1), t))
    assert res.fluctuations[res.scales.index(32)] == pytest.approx(math.sqrt(np.mean(np.square(resid))), rel=1e-9)


def test_dfa_preconditions():
    with pytest.raises(TooShortError):
        dfa_alpha(rng().standard_normal(100), scales=[8, 16, 32])
    with pytest.raises(TooShortError):
        dfa_alpha(rng().standard_normal(100), scales=[8, 10, 12, 40])


# --- exponential smoothing ----------------------------------------------------


def test_smoothing_constant_series_ties_to_smallest_alpha():
    fit = exp_smoothing_fit(np.full(20, 7.0), [0.3, 0.1, 0.5])
    assert fit.alpha_opt == 0.1 and fit.sse_per_point == 0.0
    assert math.isnan(fit.residual_acf1)


def test_smoothing_alpha_one_is_naive_forecast():
    x = rng(4).standard_normal(50)
    pred = smoothed_predictions(x, 1.0)
    assert np.array_equal(pred[1:], x)
    assert np.array_equal(exp_smoothing_forecast(x, 1.0, 2), [x[-1], x[-1]])


def test_smoothing_random_walk_prefers_large_alpha():
    grid = [round(0.1 * i, 1) for i in range(1, 11)]
    for s in range(20):
        assert exp_smoothing_fit(np.cumsum(rng(s).standard_normal(2000)), grid).alpha_opt >= 0.9


def test_smoothing_grid_search_oracle():
    x = rng(5).standard_normal(40).cumsum()
    grid = [0.2, 0.5, 0.8]
    sse = [np.sum((x[1:] - smoothed_predictions(x, a)[1:-1]) ** 2) for a in grid]
    fit = exp_smoothing_fit(x, grid)
    assert fit.alpha_opt == grid[int(np.argmin(sse))]
    assert fit.sse_per_point == pytest.approx(min(sse) / 39, rel=1e-12)
    assert fit.residual_acf1 == pytest.approx(autocorrelation(fit.residuals, 1))


def test_forecast_examples():
    assert list(exp_smoothing_forecast([4.0, 4.0, 4.0], 0.3, 3)) == [4.0, 4.0, 4.0]
    assert list(exp_smoothing_forecast([1.0, 2.0], 0.5, 1)) == [1.5]


def test_smoothing_too_short():
    with pytest.raises(TooShortError):
        exp_smoothing_fit([1.0, 2.0, 3.0])


# --- complexity ---------------------------------------------------------------


def test_ce_examples():
    assert complexity_ce([2.0, 2.0, 2.0]) == 0.0
    assert complexity_ce([0.0, 1.0, 0.0, 1.0]) == pytest.approx(math.sqrt(3), abs=1e-15)


def test_ce_noise_exceeds_sine():
    from tschar.core import zscore

    sine = zscore(TimeSeries(np.sin(2 * np.pi * np.arange(1000) / 50)))
    for s in range(100):
        noise = zscore(TimeSeries(rng(s).standard_normal(1000)))
        assert complexity_ce(noise) > complexity_ce(sine)


# --- order sensitivity --------------------------------------------------------


def test_shuffling_changes_order_dependent_features():
    sine = np.sin(2 * np.pi * np.arange(512) / 32)
    ce_hits = se_hits = 0
    for s in range(100):
        shuffled = rng(s).permutation(sine)
        assert sample_variance(shuffled) == pytest.approx(sample_variance(sine), rel=1e-12)
        ce_hits += complexity_ce(shuffled) > complexity_ce(sine)
        se_hits += spectral_entropy(shuffled) > spectral_entropy(sine)
    assert ce_hits >= 95 and se_hits >= 95


# --- extraction ---------------------------------------------------------------


def _small_ds():
    return LabeledDataset(
        (TimeSeries(rng(6).standard_normal(200), id="n"), TimeSeries(np.full(200, 1.0), id="c")),
        ("a", "b"),
    )


def test_extract_shape_and_missing_capture():
    specs = [FeatureSpec("mean", "mean"), FeatureSpec("sa", "stat_av", {"w": 20}), FeatureSpec("ce", "ce")]
    fm = extract_features(_small_ds(), specs)
    assert fm.shape == (2, 3)
    assert math.isnan(fm.values[1, 1]) and ("c", "sa") in fm.reasons
    assert fm.values[1, 0] == 1.0 and fm.values[1, 2] == 0.0
    assert not np.isnan(fm.values[0]).any()


def test_extract_rows_equal_single_series_extraction():
    ds = _small_ds()
    fm = extract_features(ds, STANDARD_22)
    assert fm.shape == (2, 22)
    for i, s in enumerate(ds.series):
        assert fm.row(i).values.tobytes() == extract_vector(s, STANDARD_22).values.tobytes()
    assert extract_features(ds, STANDARD_22) == fm


def test_extract_parallel_equals_serial(monkeypatch):
    ds = LabeledDataset(tuple(TimeSeries(rng(s).standard_normal(128), id=str(s)) for s in range(6)), tuple("ab" * 3))
    serial = extract_features(ds, STANDARD_22)
    monkeypatch.setenv("TSKIT_THREADS", "4")
    assert extract_features(ds, STANDARD_22) == serial


def test_duplicate_spec_names_rejected():
    with pytest.raises(ValueError):
        extract_features(_small_ds(), [FeatureSpec("m", "mean"), FeatureSpec("m", "max")])
