import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttakit import (
    AggregationWeights,
    LabeledSet,
    PredictionTensor,
    ScoreKind,
    WeightMode,
    argmax_class,
    softmax,
    to_probabilities,
)
from ttakit.errors import (
    EmptyVector,
    InvariantViolation,
    LabelOutOfRange,
    NegativeWeight,
    NonFiniteInput,
)

from conftest import random_logit_tensor, random_prob_tensor


def mp_softmax(values, dps=50):
    with mp.workdps(dps):
        xs = [mp.mpf(repr(float(v))) for v in values]
        es = [mp.e**x for x in xs]
        total = mp.fsum(es)
        return [float(e / total) for e in es]


class TestSoftmax:
    def test_symmetric_pair(self):
        assert np.allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=0)

    def test_large_equal_logits_stable(self):
        out = softmax([1000.0, 1000.0, 1000.0])
        assert np.allclose(out, [1 / 3] * 3, atol=1e-12)

    def test_matches_high_precision_reference(self):
        got = softmax([1.0, 2.0, 3.0])
        want = mp_softmax([1.0, 2.0, 3.0])
        assert np.abs(np.asarray(got) - want).max() <= 1e-6

    def test_sums_to_one(self, rng):
        v = rng.normal(0, 5, 17)
        out = softmax(v)
        assert (out > 0).all()
        assert abs(out.sum() - 1.0) <= 1e-6

    def test_rejects_non_finite(self):
        with pytest.raises(NonFiniteInput):
            softmax([1.0, np.nan])
        with pytest.raises(NonFiniteInput):
            softmax([np.inf, 0.0])

    @given(
        st.lists(st.floats(-50, 50), min_size=2, max_size=8),
        st.floats(-100, 100),
    )
    @settings(max_examples=80, deadline=None)
    def test_shift_invariance(self, values, shift):
        base = softmax(values)
        shifted = softmax(np.asarray(values) + shift)
        assert np.abs(base - shifted).max() <= 1e-6

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=8))
    @settings(max_examples=80, deadline=None)
    def test_monotone_argmax_preserved(self, values):
        # rounding keeps score gaps above one ulp of exp's output; below
        # that, softmax collapses distinct scores into exact ties
        values = [round(v, 6) for v in values]
        assert argmax_class(softmax(values)) == argmax_class(values)


class TestArgmax:
    def test_plain(self):
        assert argmax_class([0.1, 0.9]) == 1

    def test_tie_breaks_low(self):
        assert argmax_class([0.5, 0.5]) == 0
        assert argmax_class([3.0, 1.0, 3.0]) == 0

    def test_empty(self):
        with pytest.raises(EmptyVector):
            argmax_class([])


class TestToProbabilities:
    def test_probabilities_pass_through_bit_identical(self, rng):
        t = random_prob_tensor(rng, 4, 3, 5)
        out = to_probabilities(t)
        assert out.kind is ScoreKind.PROBABILITIES
        assert out.values.tobytes() == t.values.tobytes()

    def test_idempotent(self, rng):
        t = to_probabilities(random_logit_tensor(rng, 3, 2, 4))
        again = to_probabilities(t)
        assert again.values.tobytes() == t.values.tobytes()

    def test_tiny_logits_case(self):
        t = PredictionTensor(np.zeros((1, 1, 2), dtype=np.float32), ScoreKind.LOGITS)
        out = to_probabilities(t)
        assert np.allclose(out.values, [[[0.5, 0.5]]], atol=0)

    def test_rows_sum_to_one(self, rng):
        out = to_probabilities(random_logit_tensor(rng, 2, 3, 4))
        sums = out.values.sum(axis=2, dtype=np.float64)
        assert np.abs(sums - 1.0).max() <= 1e-6


class TestPredictionTensor:
    def test_shape_validation(self):
        with pytest.raises(InvariantViolation):
            PredictionTensor(np.zeros((2, 2), dtype=np.float32), ScoreKind.LOGITS)
        with pytest.raises(InvariantViolation):
            PredictionTensor(np.zeros((1, 1, 1), dtype=np.float32), ScoreKind.LOGITS)

    def test_rejects_nan(self):
        bad = np.full((1, 1, 2), np.nan, dtype=np.float32)
        with pytest.raises(NonFiniteInput):
            PredictionTensor(bad, ScoreKind.LOGITS)

    def test_probability_rows_must_sum(self):
        bad = np.full((1, 1, 2), 0.9, dtype=np.float32)
        with pytest.raises(InvariantViolation):
            PredictionTensor(bad, ScoreKind.PROBABILITIES)

    def test_probability_rows_nonnegative(self):
        bad = np.array([[[1.5, -0.5]]], dtype=np.float32)
        with pytest.raises(InvariantViolation):
            PredictionTensor(bad, ScoreKind.PROBABILITIES)

    def test_take_preserves_kind(self, rng):
        t = random_prob_tensor(rng, 6, 2, 3)
        sub = t.take([4, 1])
        assert sub.n == 2 and sub.kind is t.kind
        assert (sub.values[0] == t.values[4]).all()

    def test_values_read_only(self, rng):
        t = random_prob_tensor(rng, 2, 2, 2)
        with pytest.raises(ValueError):
            t.values[0, 0, 0] = 0.0


class TestLabeledSet:
    def test_rejects_out_of_range(self):
        with pytest.raises(LabelOutOfRange):
            LabeledSet(np.array([0, 3]), 3)
        with pytest.raises(LabelOutOfRange):
            LabeledSet(np.array([-1]), 3)

    def test_take(self):
        s = LabeledSet(np.array([0, 1, 2, 1]), 3)
        assert s.take([2, 0]).labels.tolist() == [2, 0]


class TestAggregationWeights:
    def test_rejects_negative(self):
        with pytest.raises(NegativeWeight):
            AggregationWeights(WeightMode.PER_AUGMENTATION, np.array([0.5, -0.1]), c=2)

    def test_mode_shape_agreement(self):
        with pytest.raises(Exception):
            AggregationWeights(WeightMode.PER_AUGMENTATION, np.ones((2, 2)), c=2)

    def test_as_matrix_ties_vector(self):
        w = AggregationWeights(WeightMode.PER_AUGMENTATION, np.array([0.25, 0.75]), c=3)
        mat = w.as_matrix()
        assert mat.shape == (2, 3)
        assert (mat[0] == np.float32(0.25)).all() and (mat[1] == np.float32(0.75)).all()
