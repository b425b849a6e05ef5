"""CSV ingestion, z-score round trips, splits, windows."""

import math

import numpy as np
import pytest

from seedcast.data import (CsvSchema, RawSeries, SplitSpec, load_csv,
                           make_windows, split, zscore_apply, zscore_fit,
                           zscore_invert)
from seedcast.errors import ConfigError, DataError


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_small_file(tmp_path):
    path = _write(tmp_path, "date,a,b\n0,1.0,2.0\n1,3.0,4.0\n2,5.0,6.0\n")
    raw = load_csv(path)
    assert raw.values.shape == (3, 2)
    assert raw.variable_names == ["a", "b"]
    assert raw.dropped_rows == 0


def test_ett_style_header_gives_seven_vars(tmp_path):
    header = "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT"
    rows = "\n".join(f"2016-07-01 0{i}:00:00," + ",".join(["1.0"] * 7) for i in range(4))
    raw = load_csv(_write(tmp_path, header + "\n" + rows + "\n"))
    assert raw.n_vars == 7
    assert raw.variable_names == ["HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"]


def test_nan_reject_names_the_cell(tmp_path):
    path = _write(tmp_path, "date,a,b\n0,1.0,2.0\n1,nan,4.0\n")
    with pytest.raises(DataError, match=r"(?s)3:.*'a'"):
        load_csv(path)


def test_nan_drop_row_counts(tmp_path):
    path = _write(tmp_path, "date,a\n0,1.0\n1,nan\n2,3.0\n3,inf\n4,5.0\n")
    raw = load_csv(path, CsvSchema(nan_policy="drop-row"))
    assert raw.values.shape == (3, 1)
    assert raw.dropped_rows == 2


def test_unparseable_cell_reports_line_number(tmp_path):
    path = _write(tmp_path, "date,a\n0,1.0\n1,oops\n")
    with pytest.raises(DataError, match="3"):
        load_csv(path)


def test_ragged_row_rejected(tmp_path):
    path = _write(tmp_path, "date,a,b\n0,1.0\n")
    with pytest.raises(DataError, match="expected 3 cells, got 2"):
        load_csv(path)


def test_non_monotonic_timestamps_rejected(tmp_path):
    path = _write(tmp_path, "date,a\n0,1.0\n2,2.0\n1,3.0\n")
    with pytest.raises(DataError, match="increasing"):
        load_csv(path)


def test_min_rows_enforced(tmp_path):
    path = _write(tmp_path, "date,a\n0,1.0\n1,2.0\n")
    with pytest.raises(DataError, match="at least 10"):
        load_csv(path, min_rows=10)


def test_bad_nan_policy_rejected():
    with pytest.raises(ConfigError):
        CsvSchema(nan_policy="impute")


# ---------------------------------------------------------------------------
# normalization


def test_zscore_mean_and_population_std():
    stats = zscore_fit(np.array([[1.0], [2.0], [3.0]]))
    assert stats.mean[0] == 2.0
    assert abs(stats.std[0] - math.sqrt(2.0 / 3.0)) < 1e-15  # population, ddof=0


def test_zscore_roundtrip_identity():
    r = np.random.default_rng(0)
    rows = r.normal(loc=3.0, scale=5.0, size=(50, 4))
    stats = zscore_fit(rows)
    back = zscore_invert(zscore_apply(rows, stats), stats)
    assert np.max(np.abs(back - rows)) < 1e-10


def test_constant_channel_clamped_with_warning():
    rows = np.column_stack([np.ones(10), np.arange(10.0)])
    with pytest.warns(RuntimeWarning, match="constant channel"):
        stats = zscore_fit(rows)
    assert stats.std[0] == 1.0
    assert stats.std[1] > 0.0


def test_stats_depend_only_on_training_rows():
    r = np.random.default_rng(1)
    rows = r.normal(size=(100, 3))
    train = rows[:70]
    a = zscore_fit(train)
    rows[80] += 1e6  # perturb a test-region row
    b = zscore_fit(rows[:70])
    assert a.mean.tobytes() == b.mean.tobytes()
    assert a.std.tobytes() == b.std.tobytes()


# ---------------------------------------------------------------------------
# splits


def _series(t):
    vals = np.arange(float(t))[:, None]
    return RawSeries(timestamps=list(range(t)), values=vals, variable_names=["a"])


def test_ratio_split_basic():
    tr, va, te = split(_series(100), SplitSpec("ratio", (0.7, 0.1, 0.2)))
    assert (tr, va, te) == (range(0, 70), range(70, 80), range(80, 100))


def test_ratio_split_floor_remainder_to_test():
    tr, va, te = split(_series(4), SplitSpec("ratio", (0.5, 0.25, 0.25)))
    assert (tr, va, te) == (range(0, 2), range(2, 3), range(3, 4))


def test_ett_hourly_boundaries():
    tr, va, te = split(_series(17420), SplitSpec("ett_hourly"))
    assert (tr, va, te) == (range(0, 8640), range(8640, 11520), range(11520, 14400))


def test_ett_minutely_boundaries():
    tr, va, te = split(_series(57600), SplitSpec("ett_minutely"))
    assert (tr, va, te) == (range(0, 34560), range(34560, 46080), range(46080, 57600))


def test_ett_split_requires_enough_rows():
    with pytest.raises(DataError, match="14400"):
        split(_series(10000), SplitSpec("ett_hourly"))


def test_splits_partition_prefix_without_gap():
    tr, va, te = split(_series(103), SplitSpec("ratio", (0.6, 0.2, 0.2)))
    assert tr.stop == va.start and va.stop == te.start
    assert tr.start == 0 and te.stop == 103


def test_invalid_ratios_rejected():
    with pytest.raises(ConfigError):
        SplitSpec("ratio", (0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        SplitSpec("ratio", (1.0, 0.0, 0.0))
    with pytest.raises(ConfigError):
        SplitSpec("nonsense")


# ---------------------------------------------------------------------------
# windows


@pytest.mark.parametrize("t,l,h,stride,want", [
    (10, 4, 2, 1, 5),
    (5, 4, 2, 1, 0),
    (100, 96, 4, 1, 1),
    (20, 4, 2, 3, 5),   # floor((20-6)/3)+1
    (21, 4, 2, 4, 4),
])
def test_window_counts(t, l, h, stride, want):
    rows = np.arange(float(t))[:, None]
    samples = make_windows(rows, l, h, stride)
    assert len(samples) == want
    expected = (t - l - h) // stride + 1 if t - l - h >= 0 else 0
    assert len(samples) == max(expected, 0)


def test_window_slices_are_contiguous():
    rows = np.arange(30.0)[:, None]
    for w in make_windows(rows, 5, 3, 2):
        assert w.x.shape == (5, 1) and w.y.shape == (3, 1)
        assert w.x[0, 0] == w.origin_index
        assert w.y[0, 0] == w.origin_index + 5  # y starts exactly at origin+L


def test_windows_denormalize_to_raw_rows():
    r = np.random.default_rng(2)
    raw = r.normal(loc=7.0, scale=3.0, size=(40, 2))
    stats = zscore_fit(raw[:30])
    normed = zscore_apply(raw, stats)
    for w in make_windows(normed, 6, 2, 5):
        lo = w.origin_index
        assert np.max(np.abs(zscore_invert(w.x, stats) - raw[lo:lo + 6])) < 1e-10
        assert np.max(np.abs(zscore_invert(w.y, stats) - raw[lo + 6:lo + 8])) < 1e-10


def test_bad_window_params_rejected():
    with pytest.raises(ConfigError):
        make_windows(np.zeros((10, 1)), 0, 1)
    with pytest.raises(ConfigError):
        make_windows(np.zeros((10, 1)), 4, 1, stride=0)
