"""Normalized-entropy ambiguity scoring and the routing threshold rule."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ecc_sim.filtering import (FilterConfig, Route, normalized_entropy,
                               normalized_entropy_batch, route)

logit_vectors = hnp.arrays(np.float64, st.integers(2, 8),
                           elements=st.floats(-30, 30))


class TestNormalizedEntropy:
    def test_uniform_is_one(self):
        for k in range(2, 7):
            assert normalized_entropy(np.full(k, 3.7)) == 1.0

    def test_peaked_is_zero(self):
        assert normalized_entropy(np.array([900.0, 0.0, 0.0, 0.0])) == 0.0

    def test_pinned_two_class_value(self):
        value = normalized_entropy(np.log(np.array([0.9, 0.1])))
        assert abs(value - 0.4690) < 1e-4

    @settings(max_examples=100, deadline=None)
    @given(logit_vectors)
    def test_range(self, logits):
        assert 0.0 <= normalized_entropy(logits) <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(logit_vectors, st.floats(-20, 20))
    def test_shift_invariance(self, logits, shift):
        assert abs(normalized_entropy(logits)
                   - normalized_entropy(logits + shift)) < 1e-9

    @settings(max_examples=100, deadline=None)
    @given(logit_vectors, st.integers(0, 10**6))
    def test_permutation_invariance(self, logits, seed):
        perm = np.random.default_rng(seed).permutation(logits)
        assert abs(normalized_entropy(logits)
                   - normalized_entropy(perm)) < 1e-9

    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            normalized_entropy(np.array([1.0]))

    def test_explicit_class_count_must_match(self):
        with pytest.raises(ValueError):
            normalized_entropy(np.array([1.0, 2.0]), n_classes=3)

    @settings(max_examples=50, deadline=None)
    @given(hnp.arrays(np.float64, (4, 5), elements=st.floats(-30, 30)))
    def test_batch_matches_scalar(self, logits):
        batch = normalized_entropy_batch(logits)
        scalar = [normalized_entropy(row) for row in logits]
        assert np.allclose(batch, scalar, atol=1e-12)


class TestRouting:
    def test_tie_at_threshold_stays_on_edge(self):
        logits = np.zeros(4)  # score exactly 1.0
        assert route(logits, FilterConfig(1.0)).route == Route.EDGE

    def test_confident_stays_ambiguous_uploads(self):
        confident = np.array([50.0, 0.0])
        ambiguous = np.array([0.1, 0.0])
        cfg = FilterConfig(0.3)
        assert route(confident, cfg).route == Route.EDGE
        assert route(ambiguous, cfg).route == Route.CLOUD

    @settings(max_examples=100, deadline=None)
    @given(logit_vectors, st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_delta(self, logits, d1, d2):
        lo, hi = sorted((d1, d2))
        # raising the threshold can only move traffic from cloud to edge
        if route(logits, FilterConfig(lo)).route == Route.EDGE:
            assert route(logits, FilterConfig(hi)).route == Route.EDGE

    def test_decision_reports_score(self):
        decision = route(np.zeros(3), FilterConfig(0.5))
        assert decision.score == 1.0 and decision.route == Route.CLOUD

    @pytest.mark.parametrize("delta", [-0.01, 1.01])
    def test_delta_bounds(self, delta):
        with pytest.raises(ValueError):
            FilterConfig(delta)
