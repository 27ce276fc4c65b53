import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pablo.core import (
    DimensionMismatch,
    NonFiniteValue,
    RngStream,
    as_vector,
    linearithmic_metrics,
    path_length,
    switch_count,
)


def vecs(*rows):
    return [np.asarray(r, dtype=float) for r in rows]


class TestVectors:
    def test_valid(self):
        v = as_vector([1.0, 2.0], dim=2)
        assert v.dtype == np.float64

    def test_nan_rejected(self):
        with pytest.raises(NonFiniteValue):
            as_vector([1.0, float("nan")])

    def test_inf_rejected(self):
        with pytest.raises(NonFiniteValue):
            as_vector([float("inf")])

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            as_vector([1.0, 2.0], dim=3)

    def test_not_1d(self):
        with pytest.raises(DimensionMismatch):
            as_vector([[1.0], [2.0]])


class TestPathLength:
    def test_constant_sequence(self):
        assert path_length(vecs((0, 0), (0, 0), (0, 0))) == 0.0

    def test_hand_evaluated_sum(self):
        # 1 + 0 + sqrt(5)
        got = path_length(vecs((0, 0), (1, 0), (1, 0), (0, 2)))
        assert got == pytest.approx(1.0 + math.sqrt(5.0), abs=1e-12)

    def test_single_point(self):
        assert path_length(vecs((3, 4))) == 0.0

    def test_append_repeat_invariant(self):
        seq = vecs((0, 0), (1, 1), (2, 0))
        assert path_length(seq) == path_length(seq + [seq[-1]])

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            path_length(vecs((0, 0), (1,)))


class TestSwitchCount:
    def test_hand_count(self):
        assert switch_count(vecs((0, 0), (1, 0), (1, 0), (0, 2))) == 2

    def test_constant(self):
        assert switch_count(vecs((1, 2), (1, 2), (1, 2))) == 0

    def test_all_distinct(self):
        assert switch_count(vecs((0,), (1,), (2,), (3,), (4,))) == 4


class TestLinearithmicMetrics:
    def test_zero_sequence(self):
        assert linearithmic_metrics(vecs((0, 0), (0, 0)), 1.0, 2) == (0.0, 0.0)

    def test_hand_evaluation(self):
        phi, p_phi = linearithmic_metrics(
            vecs((0, 0), (1, 0), (1, 0), (0, 2)), 1.0, 4
        )
        assert phi == pytest.approx(2.0 * math.log(9.0), abs=1e-12)
        expected = 1.0 * math.log(257.0) + math.sqrt(5.0) * math.log(
            256.0 * math.sqrt(5.0) + 1.0
        )
        assert expected == pytest.approx(19.7522, abs=1e-3)  # pinned magnitude
        assert p_phi == pytest.approx(expected, abs=1e-12)

    def test_static_unit(self):
        phi, p_phi = linearithmic_metrics(vecs((1, 0)), 1.0, 10)
        assert phi == pytest.approx(math.log(11.0), abs=1e-12)
        assert p_phi == 0.0

    def test_p_phi_zero_iff_constant(self):
        _, p1 = linearithmic_metrics(vecs((1, 1), (1, 1)), 0.5, 2)
        _, p2 = linearithmic_metrics(vecs((1, 1), (1, 1 + 1e-9)), 0.5, 2)
        assert p1 == 0.0 and p2 > 0.0


class TestRngStream:
    def test_same_seed_same_draws(self):
        a, b = RngStream(42), RngStream(42)
        assert np.array_equal(a.normal(16), b.normal(16))
        assert a.integer(1000) == b.integer(1000)

    def test_child_reproducible(self):
        a = RngStream(7).child("env").normal(8)
        b = RngStream(7).child("env").normal(8)
        assert np.array_equal(a, b)

    def test_children_differ(self):
        a = RngStream(7).child("env").normal(8)
        b = RngStream(7).child("play").normal(8)
        assert not np.array_equal(a, b)

    def test_signs_are_pm_one(self):
        s = RngStream(3).signs(1000)
        assert set(np.unique(s)) <= {-1.0, 1.0}
        assert abs(s.mean()) < 0.2

    def test_normal_moments(self):
        x = RngStream(11).normal(200_000)
        assert abs(x.mean()) < 0.01
        assert abs(x.std() - 1.0) < 0.01


nonneg_seqs = st.lists(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False), min_size=1, max_size=40
)


class TestSupportingInequalities:
    @settings(max_examples=200, deadline=None)
    @given(nonneg_seqs, st.sampled_from([1.0, 2.0, 4.0, math.log(41.0)]))
    def test_p_bound(self, alphas, p):
        # sum_t a_t / (sum_{s<=t} a_s)^(1-1/p) <= p (sum a_t)^(1/p)
        total = 0.0
        lhs = 0.0
        for a in alphas:
            total += a
            if total > 0.0:
                lhs += a / total ** (1.0 - 1.0 / p)
        assert lhs <= p * sum(alphas) ** (1.0 / p) + 1e-9

    @settings(max_examples=200, deadline=None)
    @given(nonneg_seqs, st.floats(min_value=1e-3, max_value=1e3))
    def test_log_bound(self, alphas, a0):
        # sum_t a_t / (a0 + sum_{s<=t} a_s) <= ln(1 + sum a_t / a0)
        run = a0
        lhs = 0.0
        for a in alphas:
            run += a
            lhs += a / run
        assert lhs <= math.log(1.0 + sum(alphas) / a0) + 1e-9
