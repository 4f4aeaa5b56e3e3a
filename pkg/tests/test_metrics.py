"""Accuracy matrix, cloud upload rate, and relative improvement metrics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecc_sim.exceptions import StateError
from ecc_sim.metrics import AccuracyMatrix, acci, avg_accuracy, cur


class TestAccuracyMatrix:
    def test_record_and_row(self):
        m = AccuracyMatrix()
        m.record(1, 1, 0.9)
        m.record(2, 1, 0.8)
        m.record(2, 2, 0.7)
        assert m.row(2) == [0.8, 0.7]
        assert m.get(2, 1) == 0.8
        assert m.n_tasks == 2

    def test_cannot_score_unseen_task(self):
        with pytest.raises(ValueError):
            AccuracyMatrix().record(1, 2, 0.5)

    def test_accuracy_bounds(self):
        with pytest.raises(ValueError):
            AccuracyMatrix().record(1, 1, 1.5)

    def test_missing_entry(self):
        m = AccuracyMatrix()
        m.record(2, 2, 0.5)
        with pytest.raises(StateError):
            m.row(2)

    def test_avg_accuracy(self):
        m = AccuracyMatrix()
        m.record(3, 1, 0.6)
        m.record(3, 2, 0.9)
        m.record(3, 3, 0.9)
        assert np.isclose(avg_accuracy(m, 3), 0.8)


class TestCur:
    def test_counting_oracle(self):
        assert cur([0.1, 0.5, 0.9], 0.5) == pytest.approx(1 / 3)

    def test_strictly_above_threshold(self):
        assert cur([0.5, 0.5], 0.5) == 0.0

    def test_extremes(self):
        assert cur([0.2, 0.8], 0.0) == 1.0  # positive scores all upload
        assert cur([0.2, 0.8], 1.0) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            cur([], 0.5)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30),
           st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, scores, d1, d2):
        lo, hi = sorted((d1, d2))
        assert cur(scores, lo) >= cur(scores, hi)


class TestAcci:
    def test_pinned_example(self):
        assert abs(acci(0.9063, 0.8675, 0.9805) - 0.3434) < 1e-4

    def test_boundary_identities(self):
        assert acci(0.7, 0.7, 0.9) == 0.0
        assert acci(0.9, 0.7, 0.9) == 1.0

    def test_zero_gap_rejected(self):
        with pytest.raises(ZeroDivisionError):
            acci(0.8, 0.9, 0.9)

    def test_below_edge_is_negative(self):
        assert acci(0.6, 0.7, 0.9) < 0.0
