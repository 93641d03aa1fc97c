"""Core numeric types and shared prediction semantics.

Scores are stored as 32-bit floats; all arithmetic that matters (softmax,
training, metrics) accumulates in 64-bit. Augmentation index 0 is reserved
for the identity view, so the no-TTA baseline is always recoverable from a
prediction tensor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyVector,
    InvariantViolation,
    LabelOutOfRange,
    NegativeWeight,
    NonFiniteInput,
)

PROB_ROW_SUM_TOL = 1e-4


class ScoreKind(enum.Enum):
    LOGITS = 0
    PROBABILITIES = 1


class WeightMode(enum.Enum):
    PER_AUGMENTATION = 0
    PER_AUGMENTATION_CLASS = 1


@dataclass(frozen=True)
class PredictionTensor:
    """Dense [n, m, c] score array: n inputs, m augmentations, c classes.

    ``values[i, m]`` is the model's score vector for augmented view m of
    input i. View m=0 is the untransformed input by convention.
    """

    values: np.ndarray
    kind: ScoreKind

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 3:
            raise InvariantViolation(f"expected 3-d array, got ndim={v.ndim}")
        n, m, c = v.shape
        if n < 1 or m < 1 or c < 2:
            raise InvariantViolation(f"need n>=1, m>=1, c>=2, got {v.shape}")
        if not np.isfinite(v).all():
            raise NonFiniteInput("prediction tensor contains NaN or Inf")
        if self.kind is ScoreKind.PROBABILITIES:
            if (v < 0).any():
                raise InvariantViolation("probability tensor has negative entries")
            sums = v.sum(axis=2, dtype=np.float64)
            if np.abs(sums - 1.0).max() > PROB_ROW_SUM_TOL:
                raise InvariantViolation("probability rows must sum to 1")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def c(self) -> int:
        return self.values.shape[2]

    def take(self, indices) -> "PredictionTensor":
        """Row-subset tensor for the given input indices."""
        return PredictionTensor(self.values[np.asarray(indices, dtype=np.intp)], self.kind)

    def slice_aug(self, m: int) -> np.ndarray:
        """The [n, c] score matrix of augmentation m."""
        return self.values[:, m, :]


@dataclass(frozen=True)
class LabeledSet:
    """Class labels aligned by index with a prediction tensor."""

    labels: np.ndarray
    c: int

    def __post_init__(self):
        y = np.asarray(self.labels, dtype=np.int64)
        if y.ndim != 1:
            raise InvariantViolation("labels must be 1-d")
        if self.c < 2:
            raise InvariantViolation("need at least 2 classes")
        if y.size and (y.min() < 0 or y.max() >= self.c):
            raise LabelOutOfRange(f"labels must lie in [0, {self.c})")
        y.flags.writeable = False
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def take(self, indices) -> "LabeledSet":
        return LabeledSet(self.labels[np.asarray(indices, dtype=np.intp)], self.c)


@dataclass(frozen=True)
class AggregationWeights:
    """Nonnegative aggregation weights: one per augmentation, or one per
    (augmentation, class) pair."""

    mode: WeightMode
    values: np.ndarray
    c: int = field(default=0)  # class count; required for PER_AUGMENTATION too

    def __post_init__(self):
        w = np.asarray(self.values, dtype=np.float32)
        expected_ndim = 1 if self.mode is WeightMode.PER_AUGMENTATION else 2
        if w.ndim != expected_ndim:
            raise DimensionMismatch(
                f"{self.mode.name} weights must be {expected_ndim}-d, got {w.ndim}-d"
            )
        if not np.isfinite(w).all():
            raise NonFiniteInput("weights contain NaN or Inf")
        if (w < 0).any():
            raise NegativeWeight("aggregation weights must be nonnegative")
        c = self.c
        if self.mode is WeightMode.PER_AUGMENTATION_CLASS:
            c = w.shape[1]
        if c < 2:
            raise InvariantViolation("weights need a class count >= 2")
        w.flags.writeable = False
        object.__setattr__(self, "values", w)
        object.__setattr__(self, "c", int(c))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def as_matrix(self) -> np.ndarray:
        """Weights as an [m, c] float64 matrix (vector mode broadcasts)."""
        w = self.values.astype(np.float64)
        if self.mode is WeightMode.PER_AUGMENTATION:
            return np.repeat(w[:, None], self.c, axis=1)
        return w


def check_aligned(preds: PredictionTensor, labels: LabeledSet) -> None:
    """Raise unless a tensor and a label set describe the same inputs."""
    if preds.n != labels.n:
        raise DimensionMismatch(f"{preds.n} inputs vs {labels.n} labels")
    if preds.c != labels.c:
        raise DimensionMismatch(f"{preds.c} classes vs labels over {labels.c}")


def softmax(logits) -> np.ndarray:
    """Stable softmax of a score vector (max-subtracted, 64-bit)."""
    v = np.asarray(logits, dtype=np.float64)
    if v.size == 0:
        raise EmptyVector("softmax of empty vector")
    if not np.isfinite(v).all():
        raise NonFiniteInput("softmax input contains NaN or Inf")
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


def argmax_class(scores) -> int:
    """Index of the maximum score; ties break to the lowest index."""
    v = np.asarray(scores)
    if v.size == 0:
        raise EmptyVector("argmax of empty vector")
    return int(np.argmax(v))


def to_probabilities(t: PredictionTensor) -> PredictionTensor:
    """Convert a tensor to the probability kind.

    Probability tensors pass through unchanged (same values, bit for bit);
    logits go through a row-wise stable softmax.
    """
    if t.kind is ScoreKind.PROBABILITIES:
        return t
    v = t.values.astype(np.float64)
    shifted = v - v.max(axis=2, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=2, keepdims=True)
    return PredictionTensor(probs.astype(np.float32), ScoreKind.PROBABILITIES)
