"""Prediction aggregation: learned class/augmentation weights plus the
raw, mean, and greedy-policy-search baselines.

The learned aggregators score class c as the weighted sum over
augmentations of the per-view class probabilities, with one weight per
(augmentation, class) pair or one weight per augmentation. Weights are
trained by SGD with momentum on a cross-entropy loss and projected onto
the nonnegative orthant (clamped at zero) after every update.

Learned methods always consume probabilities; the mean and GPS baselines
average whatever score kind the tensor stores.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AggregationWeights,
    LabeledSet,
    PredictionTensor,
    ScoreKind,
    WeightMode,
    check_aligned,
    to_probabilities,
)
from .errors import (
    DimensionMismatch,
    EmptySelectionPool,
    EmptyTrainingSet,
    InvariantViolation,
    WrongKind,
)
from .metrics import accuracy


class Method(enum.Enum):
    RAW = "raw"
    MEAN = "mean"
    GPS = "gps"
    LEARNED = "learned"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 30
    batch_size: int = 256
    seed: int = 0
    epsilon: float = 1e-12  # normalization floor inside the loss

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvariantViolation("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise InvariantViolation("momentum must be in [0, 1)")
        if self.epochs < 1:
            raise InvariantViolation("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvariantViolation("batch_size must be >= 1")


@dataclass(frozen=True)
class Aggregator:
    """A prediction rule over an M-view tensor with C classes."""

    method: Method
    policy_m: int
    c: int
    weights: AggregationWeights | None = None
    indices: tuple = field(default=())

    def __post_init__(self):
        if self.method is Method.LEARNED:
            w = self.weights
            if w is None:
                raise InvariantViolation("learned aggregator needs weights")
            if w.m != self.policy_m or w.c != self.c:
                raise DimensionMismatch("weights do not match policy_m/c")
        if self.method is Method.GPS:
            if not self.indices:
                raise InvariantViolation("GPS aggregator needs selected indices")
            if any(not 0 <= i < self.policy_m for i in self.indices):
                raise InvariantViolation("GPS indices outside policy range")
        object.__setattr__(self, "indices", tuple(self.indices))

    @classmethod
    def raw(cls, m: int, c: int) -> "Aggregator":
        return cls(Method.RAW, m, c)

    @classmethod
    def mean(cls, m: int, c: int) -> "Aggregator":
        return cls(Method.MEAN, m, c)

    @classmethod
    def gps(cls, indices, m: int, c: int) -> "Aggregator":
        return cls(Method.GPS, m, c, indices=tuple(indices))

    @classmethod
    def learned(cls, weights: AggregationWeights) -> "Aggregator":
        return cls(Method.LEARNED, weights.m, weights.c, weights=weights)


# --- forward passes ---------------------------------------------------------

def forward_class(theta, preds) -> np.ndarray:
    """Per-class weighted sum over augmentations for one input:
    out[c] = sum_m theta[m, c] * preds[m, c]."""
    t = np.asarray(theta, dtype=np.float64)
    p = np.asarray(preds, dtype=np.float64)
    if t.ndim != 2 or t.shape != p.shape:
        raise DimensionMismatch(f"theta {t.shape} vs preds {p.shape}")
    return np.einsum("mc,mc->c", t, p)


def forward_aug(theta, preds) -> np.ndarray:
    """One shared weight per augmentation: out[c] = sum_m theta[m] * preds[m, c]."""
    t = np.asarray(theta, dtype=np.float64)
    p = np.asarray(preds, dtype=np.float64)
    if t.ndim != 1 or p.ndim != 2 or t.shape[0] != p.shape[0]:
        raise DimensionMismatch(f"theta {t.shape} vs preds {p.shape}")
    return np.einsum("m,mc->c", t, p)


def _theta_array(theta) -> np.ndarray:
    if isinstance(theta, AggregationWeights):
        return theta.values.astype(np.float64)
    return np.asarray(theta, dtype=np.float64)


def _scores(theta: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Batched aggregation scores, [n, c]; theta is 1-d or 2-d."""
    if theta.ndim == 1:
        return np.einsum("m,imc->ic", theta, values)
    return np.einsum("mc,imc->ic", theta, values)


def _check_batch(theta: np.ndarray, preds: PredictionTensor, labels: LabeledSet) -> None:
    if preds.kind is not ScoreKind.PROBABILITIES:
        raise WrongKind("loss/gradient operate on probability tensors")
    check_aligned(preds, labels)
    if theta.shape[0] != preds.m:
        raise DimensionMismatch(f"theta has {theta.shape[0]} rows, tensor has m={preds.m}")
    if theta.ndim == 2 and theta.shape[1] != preds.c:
        raise DimensionMismatch(f"theta has {theta.shape[1]} cols, tensor has c={preds.c}")


def loss(theta, preds: PredictionTensor, labels: LabeledSet, cfg: TrainConfig) -> float:
    """Mean cross-entropy of the epsilon-floored, normalized aggregation
    scores, plus an L2 penalty of (weight_decay / 2) * ||theta||^2."""
    t = _theta_array(theta)
    _check_batch(t, preds, labels)
    v = preds.values.astype(np.float64)
    g = _scores(t, v) + cfg.epsilon
    total = g.sum(axis=1)
    picked = g[np.arange(preds.n), labels.labels]
    ce = -np.log(picked / total).mean()
    return float(ce + 0.5 * cfg.weight_decay * np.sum(t * t))


def _gradient_arrays(t: np.ndarray, v: np.ndarray, y: np.ndarray,
                     cfg: TrainConfig) -> np.ndarray:
    n = v.shape[0]
    g = _scores(t, v) + cfg.epsilon
    total = g.sum(axis=1, keepdims=True)
    dldg = np.broadcast_to(1.0 / total, g.shape).copy()
    rows = np.arange(n)
    dldg[rows, y] -= 1.0 / g[rows, y]
    dldg /= n
    if t.ndim == 1:
        grad = np.einsum("imc,ic->m", v, dldg)
    else:
        grad = np.einsum("imc,ic->mc", v, dldg)
    return grad + cfg.weight_decay * t


def gradient(theta, preds: PredictionTensor, labels: LabeledSet, cfg: TrainConfig) -> np.ndarray:
    """Exact gradient of `loss` with respect to theta (same shape)."""
    t = _theta_array(theta)
    _check_batch(t, preds, labels)
    return _gradient_arrays(t, preds.values.astype(np.float64), labels.labels, cfg)


def _predict_scores(theta: np.ndarray, probs: PredictionTensor) -> np.ndarray:
    return _scores(theta, probs.values.astype(np.float64))


def train(
    train_preds: PredictionTensor,
    train_labels: LabeledSet,
    val_preds: PredictionTensor,
    val_labels: LabeledSet,
    mode: WeightMode,
    cfg: TrainConfig | None = None,
) -> Aggregator:
    """Fit aggregation weights by projected SGD with momentum.

    Weights start uniform at 1/M (the mean baseline), are clamped to the
    nonnegative orthant after every update, and the checkpoint with the
    best validation accuracy wins (earliest epoch on ties; the untrained
    epoch-0 state is a candidate). Deterministic for a fixed seed.
    """
    cfg = cfg or TrainConfig()
    if train_preds.n < 1:
        raise EmptyTrainingSet("no training examples")
    check_aligned(train_preds, train_labels)
    check_aligned(val_preds, val_labels)
    if train_preds.m != val_preds.m or train_preds.c != val_preds.c:
        raise DimensionMismatch("train/val tensors disagree on m or c")

    tr = to_probabilities(train_preds)
    va = to_probabilities(val_preds)
    m, c = tr.m, tr.c
    shape = (m,) if mode is WeightMode.PER_AUGMENTATION else (m, c)
    theta = np.full(shape, 1.0 / m, dtype=np.float64)
    velocity = np.zeros_like(theta)
    rng = np.random.default_rng(cfg.seed)

    def val_accuracy(t: np.ndarray) -> float:
        pred = _predict_scores(t, va).argmax(axis=1)
        return float(np.mean(pred == val_labels.labels))

    best_theta = theta.copy()
    best_acc = val_accuracy(theta)
    values = tr.values.astype(np.float64)
    labels = train_labels.labels

    for _epoch in range(cfg.epochs):
        order = rng.permutation(tr.n)
        for start in range(0, tr.n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            grad = _gradient_arrays(theta, values[idx], labels[idx], cfg)
            velocity = cfg.momentum * velocity + grad
            theta = theta - cfg.learning_rate * velocity
            np.maximum(theta, 0.0, out=theta)
            # nonnegativity must hold after every single update
            assert theta.min() >= 0.0
        acc = val_accuracy(theta)
        if acc > best_acc:
            best_acc = acc
            best_theta = theta.copy()

    weights = AggregationWeights(mode, best_theta.astype(np.float32), c=c)
    return Aggregator.learned(weights)


def select_mode(
    class_agg: Aggregator,
    aug_agg: Aggregator,
    val_preds: PredictionTensor,
    val_labels: LabeledSet,
) -> Aggregator:
    """Pick the parameterization with the higher validation accuracy.
    Ties go to the per-augmentation weights (fewer parameters)."""
    if (class_agg.policy_m, class_agg.c) != (aug_agg.policy_m, aug_agg.c):
        raise DimensionMismatch("aggregators trained on different shapes")
    class_acc = accuracy(predict(class_agg, val_preds), val_labels)
    aug_acc = accuracy(predict(aug_agg, val_preds), val_labels)
    return class_agg if class_acc > aug_acc else aug_agg


def baseline_mean(preds: PredictionTensor) -> np.ndarray:
    """Per-input average of the stored score rows across augmentations."""
    return preds.values.astype(np.float64).mean(axis=1)


def baseline_raw(preds: PredictionTensor) -> np.ndarray:
    """The identity view's scores (augmentation index 0)."""
    return preds.slice_aug(0).astype(np.float64)


def gps_search(preds: PredictionTensor, labels: LabeledSet, size: int = 3) -> Aggregator:
    """Greedy policy search: grow a fixed-length multiset of augmentations,
    each step appending (with replacement) the view that maximizes the
    accuracy of the running mean. Ties go to the lowest index."""
    if size < 1:
        raise EmptySelectionPool("selection size must be >= 1")
    check_aligned(preds, labels)
    if preds.m < 1:
        raise EmptySelectionPool("tensor has no augmentations")
    v = preds.values.astype(np.float64)
    y = labels.labels

    def acc_of(total: np.ndarray) -> float:
        return float(np.mean(total.argmax(axis=1) == y))

    # accuracy of each single view; argmax tie-breaks to the lowest index
    single = np.array([acc_of(v[:, mm, :]) for mm in range(preds.m)])
    first = int(np.argmax(single))
    selected = [first]
    running = v[:, first, :].copy()
    while len(selected) < size:
        candidate_accs = np.array(
            [acc_of(running + v[:, mm, :]) for mm in range(preds.m)]
        )
        pick = int(np.argmax(candidate_accs))
        selected.append(pick)
        running += v[:, pick, :]
    return Aggregator.gps(selected, preds.m, preds.c)


def predict(agg: Aggregator, preds: PredictionTensor) -> np.ndarray:
    """Predicted class per input under the aggregator's rule."""
    if preds.m != agg.policy_m or preds.c != agg.c:
        raise DimensionMismatch(
            f"aggregator expects m={agg.policy_m}, c={agg.c}; "
            f"tensor has m={preds.m}, c={preds.c}"
        )
    if agg.method is Method.RAW:
        scores = baseline_raw(preds)
    elif agg.method is Method.MEAN:
        scores = baseline_mean(preds)
    elif agg.method is Method.GPS:
        scores = preds.values.astype(np.float64)[:, list(agg.indices), :].mean(axis=1)
    else:
        probs = to_probabilities(preds)
        scores = _predict_scores(agg.weights.values.astype(np.float64), probs)
    return scores.argmax(axis=1)
