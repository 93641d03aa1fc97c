import numpy as np
import pytest

from ttakit import LabeledSet, PredictionTensor, ScoreKind


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_prob_tensor(rng, n, m, c) -> PredictionTensor:
    raw = rng.random((n, m, c)) + 0.05
    probs = raw / raw.sum(axis=2, keepdims=True)
    return PredictionTensor(probs.astype(np.float32), ScoreKind.PROBABILITIES)


def random_logit_tensor(rng, n, m, c) -> PredictionTensor:
    return PredictionTensor(
        rng.normal(0, 2, (n, m, c)).astype(np.float32), ScoreKind.LOGITS
    )


def random_labels(rng, n, c) -> LabeledSet:
    return LabeledSet(rng.integers(0, c, n), c)
