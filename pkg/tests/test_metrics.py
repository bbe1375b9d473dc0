import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gclreplay.metrics import (
    buff_div,
    corr_div,
    dist_from_center,
    fm,
    homophily_buckets,
    metric_table_csv,
    pm,
)


def tri(rows):
    """Lower-triangular matrix from per-row lists, NaN above."""
    t = len(rows)
    m = np.full((t, t), np.nan)
    for i, row in enumerate(rows):
        m[i, : len(row)] = row
    return m


class TestPmFm:
    def test_pm_of_final_row(self):
        m = tri([[90], [85, 80], [70, 75, 88]])
        assert pm(m) == pytest.approx((70 + 75 + 88) / 3)

    def test_single_task(self):
        assert pm(tri([[100]])) == 100
        assert fm(tri([[100]])) is None

    def test_constant_matrix(self):
        m = np.full((3, 3), 42.0)
        assert pm(m) == 42.0
        assert fm(m) == 0.0

    def test_fm_example(self):
        m = tri([[90], [70, 85], [70, 75, 88]])
        assert fm(m) == pytest.approx(((90 - 70) + (85 - 75)) / 2)

    def test_fm_zero_when_no_forgetting(self):
        m = tri([[80], [80, 90], [80, 90, 95]])
        assert fm(m) == 0.0

    def test_negative_forgetting_backward_transfer(self):
        m = tri([[80], [90, 85]])
        assert fm(m) == pytest.approx(-10.0)

    def test_incomplete_final_row_rejected(self):
        m = tri([[90], [85, 80]])
        m[1, 0] = np.nan
        with pytest.raises(ValueError):
            pm(m)

    @given(st.floats(-30, 30), st.integers(0, 10**6))
    def test_shift_moves_pm_not_fm(self, c, seed):
        rng = np.random.default_rng(seed)
        t = int(rng.integers(2, 5))
        m = np.tril(rng.uniform(20, 90, size=(t, t)))
        assert pm(m + c) == pytest.approx(pm(m) + c)
        assert fm(m + c) == pytest.approx(fm(m))


class TestDiversityRatios:
    def test_buffer_whole_class_is_one(self):
        emb = np.random.default_rng(0).normal(size=(5, 2))
        assert buff_div(emb, range(5), range(5)) == pytest.approx(1.0)

    def test_two_extremes_of_three_point_line(self):
        emb = np.array([[0.0], [0.5], [1.0]])
        got = buff_div(emb, [0, 2], [0, 1, 2])
        assert got == pytest.approx(1.0 / ((0.5 + 1.0 + 0.5) / 3))
        assert got == pytest.approx(1.5)

    def test_singleton_bucket_absent(self):
        emb = np.zeros((3, 1))
        assert buff_div(emb, [0], [0, 1, 2]) is None

    def test_corr_div_all_correct_is_one(self):
        emb = np.random.default_rng(1).normal(size=(6, 2))
        center = emb[:3].mean(axis=0)
        assert corr_div(emb, [3, 4, 5], [3, 4, 5], center) == pytest.approx(1.0)

    def test_corr_div_nearest_only_below_one(self):
        emb = np.array([[0.1], [1.0], [2.0]])
        center = np.array([0.0])
        got = corr_div(emb, [0], [0, 1, 2], center)
        assert got is not None and got < 1.0

    def test_corr_div_no_correct_absent(self):
        emb = np.zeros((3, 1))
        assert corr_div(emb, [], [0, 1], np.array([0.0])) is None

    def test_dist_from_center_at_mean_is_zero(self):
        emb = np.array([[0.0], [2.0], [1.0]])
        assert dist_from_center(emb, [2], [0, 1]) == pytest.approx(0.0)

    def test_dist_from_center_symmetric_pair(self):
        emb = np.array([[-1.0], [1.0]])
        assert dist_from_center(emb, [0, 1], [0, 1]) == pytest.approx(0.5)

    @given(st.floats(0.05, 40.0), st.integers(0, 10**6))
    def test_ratios_scale_invariant(self, c, seed):
        rng = np.random.default_rng(seed)
        emb = rng.normal(size=(8, 3))
        buf, train = [1, 4, 6], list(range(8))
        center = emb[train].mean(axis=0)
        assert buff_div(c * emb, buf, train) == pytest.approx(
            buff_div(emb, buf, train))
        assert dist_from_center(c * emb, buf, train) == pytest.approx(
            dist_from_center(emb, buf, train))
        assert corr_div(c * emb, [1, 2], train, c * center) == pytest.approx(
            corr_div(emb, [1, 2], train, center))


class TestHomophilyBuckets:
    def test_ceil_count(self):
        ids = np.arange(100)
        ratios = np.linspace(0, 1, 100)
        buckets = homophily_buckets(ids, ratios, 20)
        assert len(buckets) == 5
        assert all(len(b) == 20 for b in buckets)

    def test_last_bucket_short(self):
        buckets = homophily_buckets(np.arange(7), np.linspace(0, 1, 7), 3)
        assert [len(b) for b in buckets] == [3, 3, 1]

    def test_sorted_ascending_by_ratio(self):
        ids = np.array([10, 11, 12, 13])
        ratios = np.array([0.9, 0.1, 0.5, 0.3])
        buckets = homophily_buckets(ids, ratios, 2)
        assert buckets[0].tolist() == [11, 13]
        assert buckets[1].tolist() == [12, 10]

    def test_identical_ratios_tie_by_id(self):
        buckets = homophily_buckets(np.array([5, 3, 4]), np.ones(3), 2)
        assert buckets[0].tolist() == [3, 4]


def test_metric_table_csv(tmp_path):
    rows = [{"bucket": 0, "value": 1.5}, {"bucket": 1, "value": 2.0}]
    path = tmp_path / "t.csv"
    metric_table_csv(rows, path)
    assert path.read_text().splitlines() == ["bucket,value", "0,1.5", "1,2.0"]
