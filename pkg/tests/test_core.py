import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tschar.core import (
    FeatureMatrix,
    LabeledDataset,
    TimeSeries,
    load_dataset,
    save_dataset,
    summary_stats,
    zscore,
)
from tschar.errors import ConstantSeriesError, EmptyDatasetError, FormatError, LengthMismatchError

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
nonconstant = arrays(np.float64, st.integers(2, 60), elements=finite).filter(
    lambda a: np.ptp(a) > 1e-3 * max(1.0, np.abs(a).max())
)


def test_timeseries_is_immutable_and_finite():
    x = TimeSeries([1.0, 2.0, 3.0], id="a", dt=0.5)
    assert len(x) == 3 and x.dt == 0.5
    with pytest.raises(ValueError):
        x.values[0] = 5.0
    with pytest.raises(ValueError):
        TimeSeries([1.0, float("nan")])
    with pytest.raises(ValueError):
        TimeSeries([1.0], dt=0.0)


def test_dataset_classes_sorted_and_lengths_may_differ():
    ds = LabeledDataset((TimeSeries([1, 2], id="a"), TimeSeries([1, 2, 3], id="b")), ("z", "b"))
    assert ds.classes == ("b", "z")
    with pytest.raises(LengthMismatchError):
        ds.common_length()


def test_wide_csv_two_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("id,label,v1,v2,v3\na,x,1,2,3\nb,y,4,5,\n")
    ds = load_dataset(p, "wide-csv")
    assert ds.ids == ("a", "b") and ds.labels == ("x", "y")
    assert list(ds[1].values) == [4.0, 5.0]


def test_nan_cell_is_rejected_with_location(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("id,label,v1,v2\na,x,1,NaN\n")
    with pytest.raises(FormatError) as info:
        load_dataset(p)
    assert info.value.row == 2 and info.value.column == "v2"


def test_gap_inside_series_is_rejected(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("id,label,v1,v2,v3\na,x,1,,3\n")
    with pytest.raises(FormatError):
        load_dataset(p)


def test_empty_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("")
    with pytest.raises(EmptyDatasetError):
        load_dataset(p)


def test_long_csv_uniform_spacing(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("id,label,t,value\na,x,0,1\na,x,0.5,2\na,x,1.0,3\nb,y,0,7\nb,y,2,8\n")
    ds = load_dataset(p, "long-csv")
    assert ds[0].dt == 0.5 and ds[1].dt == 2.0
    assert list(ds[0].values) == [1, 2, 3]
    bad = tmp_path / "bad.csv"
    bad.write_text("id,label,t,value\na,x,0,1\na,x,1,2\na,x,3,3\n")
    with pytest.raises(FormatError):
        load_dataset(bad, "long-csv")


@pytest.mark.parametrize("fmt", ["wide-csv", "long-csv"])
@settings(max_examples=25, deadline=None)
@given(data=st.lists(arrays(np.float64, st.integers(1, 12), elements=finite), min_size=1, max_size=5))
def test_round_trip_bit_exact(tmp_path_factory, fmt, data):
    ds = LabeledDataset(tuple(TimeSeries(v, id=f"s{i}") for i, v in enumerate(data)), tuple(f"c{i % 2}" for i in range(len(data))))
    p = tmp_path_factory.mktemp("rt") / "d.csv"
    save_dataset(ds, p, fmt)
    back = load_dataset(p, fmt)
    assert back.ids == ds.ids and back.labels == ds.labels
    for a, b in zip(ds.series, back.series):
        assert a.values.tobytes() == b.values.tobytes()


def test_zscore_examples():
    assert np.allclose(zscore(TimeSeries([1, 2, 3])).values, [-1, 0, 1], atol=1e-12)
    with pytest.raises(ConstantSeriesError):
        zscore(TimeSeries([5, 5, 5]))


@settings(max_examples=50, deadline=None)
@given(nonconstant)
def test_zscore_moments_and_idempotence(x):
    z = zscore(TimeSeries(x)).values
    assert abs(z.mean()) < 1e-10
    assert abs(z.std(ddof=1) - 1) < 1e-10
    assert np.allclose(zscore(TimeSeries(z)).values, z, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(nonconstant, st.floats(0.1, 10).flatmap(lambda a: st.sampled_from([a, -a])), st.floats(-100, 100))
def test_zscore_affine_equivariance(x, a, b):
    lhs = zscore(TimeSeries(a * x + b)).values
    rhs = math.copysign(1, a) * zscore(TimeSeries(x)).values
    assert np.allclose(lhs, rhs, atol=1e-7)


def test_summary_stats():
    s = summary_stats(TimeSeries([1, 2, 3]))
    assert (s.mean, s.std, s.min, s.max, s.n) == (2, 1, 1, 3, 3)
    assert summary_stats([0, 2]).std == pytest.approx(math.sqrt(2), abs=1e-15)
    assert summary_stats([4, 4, 4]).std == 0


def test_feature_matrix_csv_renders_missing_as_empty(tmp_path):
    fm = FeatureMatrix(["a", "b"], ["f", "g"], [[1.0, float("nan")], [0.1, 2.0]])
    p = tmp_path / "m.csv"
    fm.to_csv(p)
    assert p.read_text().splitlines()[1] == "a,1,"
    assert FeatureMatrix.from_csv(p) == fm
