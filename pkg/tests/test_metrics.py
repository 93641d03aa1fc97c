import mpmath as mp
import numpy as np
import pytest

from ttakit import (
    LabeledSet,
    PredictionTensor,
    ScoreKind,
    accuracy,
    agreement,
    corrections_corruptions,
    paired_t_test,
    subsample_eval,
)
from ttakit.errors import DegenerateVariance, EmptySubsample, LengthMismatch

from conftest import random_prob_tensor


def mp_paired_t(a, b, dps=50):
    """Arbitrary-precision paired t-test reference."""
    with mp.workdps(dps):
        d = [mp.mpf(repr(float(x))) - mp.mpf(repr(float(y))) for x, y in zip(a, b)]
        k = len(d)
        mean = mp.fsum(d) / k
        var = mp.fsum([(x - mean) ** 2 for x in d]) / (k - 1)
        t = mean / mp.sqrt(var / k)
        nu = mp.mpf(k - 1)
        x = nu / (nu + t**2)
        p = mp.betainc(nu / 2, mp.mpf(1) / 2, 0, x, regularized=True)
        return float(t), float(p)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([1, 0, 1], LabeledSet(np.array([1, 0, 1]), 2)) == 1.0

    def test_none_correct(self):
        assert accuracy([0, 0], LabeledSet(np.array([1, 1]), 2)) == 0.0

    def test_hand_count(self):
        truth = LabeledSet(np.array([0, 0, 1, 1]), 2)
        assert accuracy([0, 1, 1, 0], truth) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            accuracy([0], LabeledSet(np.array([0, 1]), 2))


class TestCorrectionsCorruptions:
    def test_no_change(self):
        truth = LabeledSet(np.array([0, 1, 0]), 2)
        rep = corrections_corruptions([0, 0, 1], [0, 0, 1], truth)
        assert (rep.corrected_pct, rep.corrupted_pct, rep.net_pct) == (0.0, 0.0, 0.0)

    def test_hand_enumerated(self):
        truth = LabeledSet(np.array([0, 0, 1, 1]), 2)
        rep = corrections_corruptions([0, 1, 1, 0], [0, 0, 0, 0], truth)
        assert rep.corrected_pct == 25.0
        assert rep.corrupted_pct == 25.0
        assert rep.net_pct == 0.0
        assert rep.corrected_indices == (1,)
        assert rep.corrupted_indices == (2,)

    def test_total_correction(self):
        truth = LabeledSet(np.array([1, 1]), 2)
        rep = corrections_corruptions([0, 0], [1, 1], truth)
        assert rep.corrected_pct == 100.0 and rep.corrupted_pct == 0.0

    def test_index_sets_disjoint_and_partition(self, rng):
        n, c = 300, 4
        truth = LabeledSet(rng.integers(0, c, n), c)
        raw = rng.integers(0, c, n)
        tta = rng.integers(0, c, n)
        rep = corrections_corruptions(raw, tta, truth)
        corrected = set(rep.corrected_indices)
        corrupted = set(rep.corrupted_indices)
        assert not corrected & corrupted
        assert rep.corrected_pct + rep.corrupted_pct <= 100.0
        assert abs(rep.net_pct - (rep.corrected_pct - rep.corrupted_pct)) < 1e-9
        # every corrected/corrupted index really changed its correctness
        for i in corrected:
            assert raw[i] != truth.labels[i] and tta[i] == truth.labels[i]
        for i in corrupted:
            assert raw[i] == truth.labels[i] and tta[i] != truth.labels[i]


class TestAgreement:
    def test_identical_slices(self, rng):
        base = random_prob_tensor(rng, 10, 1, 3).values
        t = PredictionTensor(np.repeat(base, 4, axis=1), ScoreKind.PROBABILITIES)
        assert agreement(t).tolist() == [1.0, 1.0, 1.0, 1.0]

    def test_hand_count(self):
        values = np.zeros((3, 2, 2), dtype=np.float32)
        values[:, 0, 0] = 0.9
        values[:, 0, 1] = 0.1
        values[:, 1, 0] = 0.9
        values[:, 1, 1] = 0.1
        values[0, 1] = [0.1, 0.9]  # one disagreement out of three
        t = PredictionTensor(values, ScoreKind.PROBABILITIES)
        out = agreement(t)
        assert out[0] == 1.0
        assert abs(out[1] - 2 / 3) < 1e-12

    def test_monotone_transform_invariant(self, rng):
        t = random_prob_tensor(rng, 50, 6, 4)
        doubled = PredictionTensor(t.values * np.float32(2.0), ScoreKind.LOGITS)
        assert agreement(t).tolist() == agreement(doubled).tolist()


class TestPairedTTest:
    def test_identical_samples_degenerate(self):
        with pytest.raises(DegenerateVariance):
            paired_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])

    def test_zero_mean_difference(self):
        b = np.zeros(6)
        a = np.array([1.0, -1.0, 1.0, -1.0, 0.0, 0.0])
        res = paired_t_test(a, b)
        assert res.t_statistic == 0.0
        assert res.p_value == 1.0
        assert res.dof == 5

    def test_matches_reference(self):
        a = np.array([0.5, 0.6, 0.4, 0.5, 0.5])
        b = np.zeros(5)
        res = paired_t_test(a, b)
        t_ref, p_ref = mp_paired_t(a, b)
        assert abs(res.t_statistic - t_ref) <= 1e-6
        assert abs(res.p_value - p_ref) <= 1e-6

    def test_antisymmetry(self, rng):
        a = rng.random(8)
        b = rng.random(8)
        fwd = paired_t_test(a, b)
        rev = paired_t_test(b, a)
        assert abs(fwd.t_statistic + rev.t_statistic) < 1e-12
        assert abs(fwd.p_value - rev.p_value) < 1e-12

    def test_random_samples_against_reference(self, rng):
        for _ in range(10):
            k = int(rng.integers(3, 12))
            a = rng.normal(0.5, 0.2, k)
            b = a + rng.normal(0.01, 0.05, k)
            try:
                res = paired_t_test(a, b)
            except DegenerateVariance:
                continue
            t_ref, p_ref = mp_paired_t(a, b)
            assert abs(res.t_statistic - t_ref) <= 1e-6
            assert abs(res.p_value - p_ref) <= 1e-6

    def test_too_short(self):
        with pytest.raises(LengthMismatch):
            paired_t_test([1.0], [0.5])


class TestSubsampleEval:
    def test_constant_predictions_zero_std(self, rng):
        truth = LabeledSet(rng.integers(0, 2, 40), 2)
        res = subsample_eval({"m": truth.labels}, truth, k=5, frac=0.5, seed=1)
        assert res.mean("m") == 1.0 and res.std("m") == 0.0

    def test_full_fraction_identical_subsamples(self, rng):
        truth = LabeledSet(rng.integers(0, 3, 30), 3)
        preds = rng.integers(0, 3, 30)
        res = subsample_eval({"m": preds}, truth, k=4, frac=1.0, seed=0)
        assert res.std("m") == 0.0

    def test_fixed_seed_replay(self, rng):
        n = 20
        truth = LabeledSet(rng.integers(0, 2, n), 2)
        preds = rng.integers(0, 2, n)
        res = subsample_eval({"m": preds}, truth, k=2, frac=0.5, seed=77)
        replay = np.random.default_rng(77)
        expected = []
        for _ in range(2):
            idx = replay.choice(n, size=10, replace=False)
            expected.append(float(np.mean(preds[idx] == truth.labels[idx])))
        assert list(res.accuracies["m"]) == expected

    def test_methods_share_subsamples(self, rng):
        truth = LabeledSet(rng.integers(0, 2, 50), 2)
        res = subsample_eval(
            {"a": truth.labels, "b": truth.labels}, truth, k=3, frac=0.4, seed=5
        )
        assert res.accuracies["a"] == res.accuracies["b"]

    def test_empty_subsample(self, rng):
        truth = LabeledSet(rng.integers(0, 2, 4), 2)
        with pytest.raises(EmptySubsample):
            subsample_eval({"m": truth.labels}, truth, k=2, frac=0.01, seed=0)
