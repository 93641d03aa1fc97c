import struct

import numpy as np
import pytest

from ttakit import (
    AggregationWeights,
    LabeledSet,
    ScoreKind,
    SplitSpec,
    WeightMode,
    read_labels,
    read_predictions,
    read_weights,
    split_dataset,
    subsample_training,
    write_labels,
    write_predictions,
    write_weights,
)
from ttakit.errors import (
    BadMagic,
    DegenerateSplit,
    EmptySet,
    LabelOutOfRange,
    NegativeWeight,
    NonFiniteInput,
    NonMonotoneIncrements,
    TruncatedFile,
    UnsupportedMode,
    UnsupportedVersion,
)

from conftest import random_labels, random_logit_tensor, random_prob_tensor


class TestPredictionFormat:
    def test_round_trip_bit_identical(self, rng, tmp_path):
        t = random_logit_tensor(rng, 5, 4, 3)
        path = tmp_path / "t.ttap"
        write_predictions(path, t)
        back = read_predictions(path)
        assert back.kind is t.kind
        assert back.values.tobytes() == t.values.tobytes()

    def test_probability_kind_round_trip(self, rng, tmp_path):
        t = random_prob_tensor(rng, 3, 2, 4)
        path = tmp_path / "t.ttap"
        write_predictions(path, t)
        assert read_predictions(path).kind is ScoreKind.PROBABILITIES

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ttap"
        path.write_bytes(b"XXXX" + b"\0" * 60)
        with pytest.raises(BadMagic):
            read_predictions(path)

    def test_unsupported_version(self, rng, tmp_path):
        path = tmp_path / "t.ttap"
        write_predictions(path, random_logit_tensor(rng, 1, 1, 2))
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", 99)
        path.write_bytes(bytes(blob))
        with pytest.raises(UnsupportedVersion):
            read_predictions(path)

    def test_truncated_payload(self, rng, tmp_path):
        path = tmp_path / "t.ttap"
        write_predictions(path, random_logit_tensor(rng, 2, 2, 2))
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(TruncatedFile):
            read_predictions(path)

    def test_nan_payload_rejected(self, rng, tmp_path):
        path = tmp_path / "t.ttap"
        write_predictions(path, random_logit_tensor(rng, 1, 1, 2))
        blob = bytearray(path.read_bytes())
        blob[-8:-4] = struct.pack("<f", float("nan"))
        path.write_bytes(bytes(blob))
        with pytest.raises(NonFiniteInput):
            read_predictions(path)


class TestLabelFormat:
    def test_round_trip(self, rng, tmp_path):
        y = random_labels(rng, 9, 4)
        path = tmp_path / "y.ttal"
        write_labels(path, y)
        back = read_labels(path)
        assert back.c == 4 and back.labels.tolist() == y.labels.tolist()

    def test_label_out_of_range(self, rng, tmp_path):
        path = tmp_path / "y.ttal"
        write_labels(path, LabeledSet(np.array([0, 1]), 2))
        blob = bytearray(path.read_bytes())
        blob[-4:] = struct.pack("<I", 2)  # label == c
        path.write_bytes(bytes(blob))
        with pytest.raises(LabelOutOfRange):
            read_labels(path)

    def test_empty_set_rejected(self, tmp_path):
        path = tmp_path / "y.ttal"
        path.write_bytes(b"TTAL" + struct.pack("<I", 1) + struct.pack("<QQ", 0, 3))
        with pytest.raises(EmptySet):
            read_labels(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "y.ttal"
        path.write_bytes(b"NOPE" + b"\0" * 20)
        with pytest.raises(BadMagic):
            read_labels(path)


class TestWeightFormat:
    def test_round_trip_both_modes(self, rng, tmp_path):
        vec = AggregationWeights(
            WeightMode.PER_AUGMENTATION, rng.random(6).astype(np.float32), c=3
        )
        mat = AggregationWeights(
            WeightMode.PER_AUGMENTATION_CLASS, rng.random((6, 3)).astype(np.float32)
        )
        for i, w in enumerate((vec, mat)):
            path = tmp_path / f"w{i}.ttaw"
            write_weights(path, w)
            back = read_weights(path)
            assert back.mode is w.mode and back.m == w.m and back.c == w.c
            assert back.values.tobytes() == w.values.tobytes()

    def test_negative_weight_rejected(self, rng, tmp_path):
        path = tmp_path / "w.ttaw"
        write_weights(
            path,
            AggregationWeights(WeightMode.PER_AUGMENTATION, np.array([0.2, 0.8]), c=2),
        )
        blob = bytearray(path.read_bytes())
        blob[-4:] = struct.pack("<f", -0.1)
        path.write_bytes(bytes(blob))
        with pytest.raises(NegativeWeight):
            read_weights(path)

    def test_unknown_mode_byte(self, rng, tmp_path):
        path = tmp_path / "w.ttaw"
        write_weights(
            path,
            AggregationWeights(WeightMode.PER_AUGMENTATION, np.array([0.2, 0.8]), c=2),
        )
        blob = bytearray(path.read_bytes())
        blob[8] = 7
        path.write_bytes(bytes(blob))
        with pytest.raises(UnsupportedMode):
            read_weights(path)


class TestSplitDataset:
    def test_sizes_follow_fractions(self):
        train, val, test = split_dataset(100, None, SplitSpec((0.4, 0.1, 0.5), seed=3))
        assert (len(train), len(val), len(test)) == (40, 10, 50)

    def test_disjoint_and_exhaustive(self):
        train, val, test = split_dataset(101, None, SplitSpec((0.4, 0.1, 0.5), seed=3))
        merged = sorted(np.concatenate([train, val, test]).tolist())
        assert merged == list(range(101))

    def test_all_train_allowed(self):
        train, val, test = split_dataset(10, None, SplitSpec((1.0, 0.0, 0.0), seed=0))
        assert (len(train), len(val), len(test)) == (10, 0, 0)

    def test_positive_fraction_empty_part_errors(self):
        with pytest.raises(DegenerateSplit):
            split_dataset(5, None, SplitSpec((0.9, 0.02, 0.08), seed=0))

    def test_deterministic(self):
        a = split_dataset(50, None, SplitSpec((0.4, 0.1, 0.5), seed=9))
        b = split_dataset(50, None, SplitSpec((0.4, 0.1, 0.5), seed=9))
        for pa, pb in zip(a, b):
            assert pa.tolist() == pb.tolist()

    def test_stratified_balances_classes(self, rng):
        labels = np.repeat([0, 1], 50)
        spec = SplitSpec((0.4, 0.1, 0.5), seed=2, stratified=True)
        train, val, test = split_dataset(100, labels, spec)
        for part, want in ((train, 20), (val, 5), (test, 25)):
            counts = np.bincount(labels[part], minlength=2)
            assert counts.tolist() == [want, want]

    def test_too_small(self):
        with pytest.raises(DegenerateSplit):
            split_dataset(2, None, SplitSpec((0.4, 0.1, 0.5), seed=0))


class TestSubsampleTraining:
    def test_zero_increment_is_empty(self):
        (only,) = subsample_training(np.arange(10), [0.0], seed=1)
        assert len(only) == 0

    def test_nesting(self):
        half, full = subsample_training(np.arange(20), [0.5, 1.0], seed=4)
        assert len(half) == 10 and len(full) == 20
        assert set(half.tolist()) <= set(full.tolist())

    def test_sizes_rounded(self):
        parts = subsample_training(np.arange(7), [0.1, 0.5, 0.9], seed=0)
        assert [len(p) for p in parts] == [1, 4, 6]

    def test_non_monotone_rejected(self):
        with pytest.raises(NonMonotoneIncrements):
            subsample_training(np.arange(5), [0.5, 0.4], seed=0)
        with pytest.raises(NonMonotoneIncrements):
            subsample_training(np.arange(5), [0.5, 1.5], seed=0)
