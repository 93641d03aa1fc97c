"""Diagnostics: accuracy, corrections/corruptions, agreement, significance.

The paired t-test computes its p-value through the regularized incomplete
beta function (continued fraction evaluation) rather than a table, so it
can be checked against an arbitrary-precision reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import LabeledSet, PredictionTensor
from .errors import DegenerateVariance, EmptySubsample, LengthMismatch


@dataclass(frozen=True)
class ChangeReport:
    """Which predictions a TTA method fixed and which it broke, vs raw."""

    corrected_pct: float
    corrupted_pct: float
    net_pct: float
    corrected_indices: tuple
    corrupted_indices: tuple


@dataclass(frozen=True)
class SignificanceResult:
    t_statistic: float
    p_value: float
    dof: int
    mean_a: float
    mean_b: float
    std_diff: float


def _as_labels(x) -> np.ndarray:
    return np.asarray(x, dtype=np.int64)


def accuracy(pred_labels, truth: LabeledSet) -> float:
    """Exact-match fraction of predicted labels against the truth."""
    pred = _as_labels(pred_labels)
    if pred.shape[0] != truth.n:
        raise LengthMismatch(f"{pred.shape[0]} predictions vs {truth.n} labels")
    if truth.n == 0:
        raise LengthMismatch("empty label set")
    return float(np.mean(pred == truth.labels))


def corrections_corruptions(raw_labels, tta_labels, truth: LabeledSet) -> ChangeReport:
    """Count predictions TTA corrected (wrong -> right) and corrupted
    (right -> wrong), as percentages of all inputs."""
    raw = _as_labels(raw_labels)
    tta = _as_labels(tta_labels)
    if not (raw.shape[0] == tta.shape[0] == truth.n):
        raise LengthMismatch("raw/tta/truth lengths differ")
    y = truth.labels
    raw_ok = raw == y
    tta_ok = tta == y
    corrected = np.flatnonzero(~raw_ok & tta_ok)
    corrupted = np.flatnonzero(raw_ok & ~tta_ok)
    n = truth.n
    corrected_pct = 100.0 * len(corrected) / n
    corrupted_pct = 100.0 * len(corrupted) / n
    return ChangeReport(
        corrected_pct=corrected_pct,
        corrupted_pct=corrupted_pct,
        net_pct=corrected_pct - corrupted_pct,
        corrected_indices=tuple(int(i) for i in corrected),
        corrupted_indices=tuple(int(i) for i in corrupted),
    )


def agreement(preds: PredictionTensor) -> np.ndarray:
    """Per-augmentation fraction of inputs whose predicted class matches
    the identity view's prediction. Entry 0 is 1 by definition."""
    arg = preds.values.argmax(axis=2)
    base = arg[:, :1]
    return (arg == base).mean(axis=0)


# --- regularized incomplete beta, for the t distribution -----------------

_BETA_MAX_ITER = 300
_BETA_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETA_TINY:
        d = _BETA_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_TINY:
            d = _BETA_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETA_TINY:
            c = _BETA_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_TINY:
            d = _BETA_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETA_TINY:
            c = _BETA_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) for x in [0, 1], a > 0, b > 0."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, dof: int) -> float:
    """Two-sided tail probability of Student's t."""
    if dof < 1:
        raise DegenerateVariance("degrees of freedom must be >= 1")
    x = dof / (dof + t * t)
    return regularized_incomplete_beta(x, dof / 2.0, 0.5)


def paired_t_test(a, b) -> SignificanceResult:
    """Two-sided paired t-test on matched samples a and b."""
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.shape != xb.shape or xa.ndim != 1:
        raise LengthMismatch("paired samples must be 1-d and equal length")
    k = xa.shape[0]
    if k < 2:
        raise LengthMismatch("need at least 2 pairs")
    d = xa - xb
    mean_d = d.mean()
    var_d = d.var(ddof=1)
    if var_d == 0.0:
        raise DegenerateVariance("all paired differences are equal")
    t = mean_d / math.sqrt(var_d / k)
    return SignificanceResult(
        t_statistic=float(t),
        p_value=float(t_sf_two_sided(t, k - 1)),
        dof=k - 1,
        mean_a=float(xa.mean()),
        mean_b=float(xb.mean()),
        std_diff=float(math.sqrt(var_d)),
    )


@dataclass(frozen=True)
class SubsampleEval:
    """Per-method accuracy over shared random subsamples of a test set."""

    k: int
    frac: float
    seed: int
    accuracies: dict = field(default_factory=dict)  # method -> tuple of k accs

    def mean(self, method: str) -> float:
        return float(np.mean(self.accuracies[method]))

    def std(self, method: str) -> float:
        return float(np.std(self.accuracies[method], ddof=1))


def subsample_eval(method_labels: dict, truth: LabeledSet, k: int = 5,
                   frac: float = 0.5, seed: int = 0) -> SubsampleEval:
    """Accuracy of each method over k seeded subsamples (no replacement).

    All methods are scored on the same subsamples, so the per-sample
    accuracies are paired and feed directly into paired_t_test.
    """
    if k < 2:
        raise EmptySubsample("need k >= 2 subsamples")
    n = truth.n
    size = int(np.floor(frac * n + 0.5))
    if size < 1:
        raise EmptySubsample(f"fraction {frac} of {n} items is empty")
    rng = np.random.default_rng(seed)
    samples = [rng.choice(n, size=size, replace=False) for _ in range(k)]
    accs = {}
    for name, labels in method_labels.items():
        pred = _as_labels(labels)
        if pred.shape[0] != n:
            raise LengthMismatch(f"{name}: {pred.shape[0]} predictions vs {n} labels")
        accs[name] = tuple(
            float(np.mean(pred[idx] == truth.labels[idx])) for idx in samples
        )
    return SubsampleEval(k=k, frac=frac, seed=seed, accuracies=accs)
