"""Synthetic classifiers with planted per-(class, augmentation) behavior.

A SyntheticWorld fixes, for every augmented view m and true class y, the
probability that view m's predicted class is correct, and which class it
confuses y with when wrong. Emitted rows are peaked probability vectors:
the voted class gets a mass drawn uniformly from
concentration +/- mass_spread (the spread keeps rows off exact ties and
leaves the argmax where the vote is), and the rest is spread evenly.

These worlds make optimal aggregation weights computable by hand, which
turns qualitative claims about learned TTA into checkable properties.
"""

from __future__ import annotations

import dataclasses
import struct
from dataclasses import dataclass

import numpy as np

from .augment import AugmentationPolicy, Image, apply_policy
from .core import (
    AggregationWeights,
    LabeledSet,
    PredictionTensor,
    ScoreKind,
    WeightMode,
)
from .errors import (
    BadMagic,
    EmptyTrainingSet,
    InvariantViolation,
    TruncatedFile,
)


@dataclass(frozen=True)
class SyntheticWorld:
    """Planted per-(view, class) correctness probabilities."""

    correct_prob: np.ndarray  # (m, c) in [0, 1]
    confusion_target: np.ndarray  # (m, c) class predicted when wrong
    concentration: float = 0.85
    mass_spread: float = 0.10
    seed: int = 0
    invariant: bool = False  # emit copies of view 0 for every view

    def __post_init__(self):
        cp = np.asarray(self.correct_prob, dtype=np.float64)
        ct = np.asarray(self.confusion_target, dtype=np.int64)
        if cp.ndim != 2 or cp.shape != ct.shape:
            raise InvariantViolation("correct_prob/confusion_target must be (m, c)")
        if (cp < 0).any() or (cp > 1).any():
            raise InvariantViolation("correct probabilities must lie in [0, 1]")
        m, c = cp.shape
        if c < 2:
            raise InvariantViolation("need at least 2 classes")
        classes = np.arange(c)
        if (ct == classes[None, :]).any():
            raise InvariantViolation("confusion target must differ from the true class")
        if (ct < 0).any() or (ct >= c).any():
            raise InvariantViolation("confusion target outside class range")
        lo = self.concentration - self.mass_spread
        hi = self.concentration + self.mass_spread
        if not (1.0 / c < lo and hi <= 1.0):
            raise InvariantViolation(
                "concentration +/- spread must stay inside (1/c, 1]"
            )
        cp.flags.writeable = False
        ct.flags.writeable = False
        object.__setattr__(self, "correct_prob", cp)
        object.__setattr__(self, "confusion_target", ct)

    @property
    def m(self) -> int:
        return self.correct_prob.shape[0]

    @property
    def c(self) -> int:
        return self.correct_prob.shape[1]

    def with_seed(self, seed: int) -> "SyntheticWorld":
        return dataclasses.replace(self, seed=seed)


def emit(world: SyntheticWorld, n: int) -> tuple:
    """Draw n labeled inputs and their planted prediction tensor.

    Pure in the world (the seed lives inside), so two calls return
    identical data.
    """
    if n < 1:
        raise InvariantViolation("need n >= 1")
    m, c = world.m, world.c
    rng = np.random.default_rng(world.seed)
    labels = rng.integers(0, c, size=n)
    coin = rng.random((n, m))
    mass = world.concentration + world.mass_spread * (2.0 * rng.random((n, m)) - 1.0)

    if world.invariant:
        coin = np.repeat(coin[:, :1], m, axis=1)
        mass = np.repeat(mass[:, :1], m, axis=1)
        cp = np.repeat(world.correct_prob[:1], m, axis=0)
        ct = np.repeat(world.confusion_target[:1], m, axis=0)
    else:
        cp = world.correct_prob
        ct = world.confusion_target

    correct = coin < cp[:, labels].T  # (n, m)
    votes = np.where(correct, labels[:, None], ct[:, labels].T)

    rest = (1.0 - mass) / (c - 1)
    values = np.repeat(rest[:, :, None], c, axis=2)
    ii, mm = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    values[ii, mm, votes] = mass
    tensor = PredictionTensor(values.astype(np.float32), ScoreKind.PROBABILITIES)
    return tensor, LabeledSet(labels, c)


def invariant_world(base: SyntheticWorld) -> SyntheticWorld:
    """The degenerate world whose views are all byte-identical to view 0."""
    return dataclasses.replace(base, invariant=True)


def uniform_world(c: int = 3, m: int = 5, accuracy: float = 0.75,
                  seed: int = 0) -> SyntheticWorld:
    """Every view equally accurate on every class; confusion is the next
    class around. A neutral base for degenerate-case tests."""
    cp = np.full((m, c), accuracy)
    ct = np.tile((np.arange(c) + 1) % c, (m, 1))
    return SyntheticWorld(cp, ct, seed=seed)


# frozen planted world: view 1 helps class 1 and hurts class 0.
# closed-form rule accuracies (labels uniform, spread keeps ties away):
#   follow view 0   (0.98 + 0.40) / 2                    = 0.690
#   follow view 1   (0.70 + 0.60) / 2                    = 0.650
#   mean            average of the two                    = 0.670
#   any-vote-1      (0.98*0.70 + 0.40 + 0.60 - 0.24) / 2 = 0.723  <- optimal
PLANTED_CORRECT_PROB = ((0.98, 0.40), (0.70, 0.60))


def planted_class_asymmetry(c: int = 2, m: int = 2, seed: int = 0) -> SyntheticWorld:
    """Two-class, two-view world where class-dependent weights beat every
    shared-weight rule: view 1 is a strong class-1 detector but degrades
    class 0, so the optimal rule trusts its class-1 votes only."""
    if (c, m) != (2, 2):
        raise InvariantViolation("planted asymmetry world is defined for c=2, m=2")
    cp = np.array(PLANTED_CORRECT_PROB)
    ct = np.array([[1, 0], [1, 0]], dtype=np.int64)
    return SyntheticWorld(cp, ct, concentration=0.85, mass_spread=0.10, seed=seed)


def _monotone_rule_accuracies(world: SyntheticWorld) -> dict:
    (a, u), (b, w) = world.correct_prob
    return {
        "always-0": 0.5,
        "always-1": 0.5,
        "follow-0": (a + u) / 2,
        "follow-1": (b + w) / 2,
        "any-vote-1": (a * b + (u + w - u * w)) / 2,
        "both-vote-1": ((1 - (1 - a) * (1 - b)) + u * w) / 2,
    }


def bayes_weights(world: SyntheticWorld) -> tuple:
    """Closed-form optimal class weights for a 2-class, 2-view world.

    Candidate decision rules are the monotone functions of the two view
    votes; each maps to a weight matrix whose class-1/class-0 column ratio
    is picked inside the band that realizes the rule for every mass draw.
    Returns (weights, rule_name, expected_accuracy).
    """
    if (world.m, world.c) != (2, 2):
        raise InvariantViolation("closed form available for c=2, m=2 only")
    accs = _monotone_rule_accuracies(world)
    rule = max(accs, key=lambda k: (accs[k], k))
    kappa, eta = world.concentration, world.mass_spread
    q_lo = kappa - eta
    # band of workable class-1 : class-0 column ratios for the vote rules
    disagree = (1 + 2 * eta) / (1 - 2 * eta)
    agree_0 = q_lo / (1 - q_lo)
    ratio_or = float(np.sqrt(disagree * agree_0))
    ratio_and = float(np.sqrt((1 / agree_0) * (1 / disagree)))
    theta = {
        "always-0": [[1.0, 0.0], [1.0, 0.0]],
        "always-1": [[0.0, 1.0], [0.0, 1.0]],
        "follow-0": [[1.0, 1.0], [0.0, 0.0]],
        "follow-1": [[0.0, 0.0], [1.0, 1.0]],
        "any-vote-1": [[1.0, ratio_or], [1.0, ratio_or]],
        "both-vote-1": [[1.0, ratio_and], [1.0, ratio_and]],
    }[rule]
    weights = AggregationWeights(
        WeightMode.PER_AUGMENTATION_CLASS, np.asarray(theta, dtype=np.float32)
    )
    return weights, rule, float(accs[rule])


# --- tiny trainable classifier over raster images ---------------------------

@dataclass(frozen=True)
class ToyTrainConfig:
    step_size: float = 2.0
    epochs: int = 300
    seed: int = 0


@dataclass(frozen=True)
class ToyClassifier:
    """Linear softmax model over flattened pixels (scaled to [0, 1])."""

    weights: np.ndarray  # (d, c)
    bias: np.ndarray  # (c,)
    image_shape: tuple
    config: ToyTrainConfig

    def __post_init__(self):
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise InvariantViolation("classifier parameters must be finite")

    def logits(self, images) -> np.ndarray:
        x = _flatten(images, self.image_shape)
        return x @ self.weights + self.bias


def _flatten(images, expected_shape) -> np.ndarray:
    arrs = []
    for img in images:
        if img.pixels.shape != expected_shape:
            raise InvariantViolation(
                f"image shape {img.pixels.shape} != trained shape {expected_shape}"
            )
        arrs.append(img.pixels.reshape(-1))
    return np.asarray(arrs, dtype=np.float64) / 255.0


def train_toy(images, labels: LabeledSet, train_fraction: float,
              cfg: ToyTrainConfig | None = None) -> ToyClassifier:
    """Fit the linear softmax model on a seeded random fraction of the data
    by full-batch gradient descent."""
    cfg = cfg or ToyTrainConfig()
    if len(images) == 0:
        raise EmptyTrainingSet("no images")
    if not 0 < train_fraction <= 1:
        raise InvariantViolation("train_fraction must be in (0, 1]")
    if len(images) != labels.n:
        raise InvariantViolation(f"{len(images)} images vs {labels.n} labels")
    shape = images[0].pixels.shape
    rng = np.random.default_rng(cfg.seed)
    size = max(1, int(np.floor(train_fraction * len(images) + 0.5)))
    chosen = rng.choice(len(images), size=size, replace=False)

    x = _flatten([images[i] for i in chosen], shape)
    y = labels.labels[chosen]
    n, d = x.shape
    c = labels.c
    onehot = np.zeros((n, c))
    onehot[np.arange(n), y] = 1.0

    w = np.zeros((d, c))
    b = np.zeros(c)
    for _ in range(cfg.epochs):
        z = x @ w + b
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        delta = (p - onehot) / n
        w -= cfg.step_size * (x.T @ delta)
        b -= cfg.step_size * delta.sum(axis=0)
    return ToyClassifier(w, b, shape, cfg)


def toy_logits(clf: ToyClassifier, images, policy: AugmentationPolicy) -> PredictionTensor:
    """Run the classifier over every policy view of every image and pack
    the logits, identity view at index 0."""
    views_per_image = [apply_policy(policy, img) for img in images]
    n, m = len(images), policy.m
    c = clf.weights.shape[1]
    values = np.empty((n, m, c), dtype=np.float64)
    for j in range(m):
        values[:, j, :] = clf.logits([views[j] for views in views_per_image])
    return PredictionTensor(values.astype(np.float32), ScoreKind.LOGITS)


@dataclass(frozen=True)
class BlobWorld:
    """Separable grayscale image classes built from fixed templates.

    Templates are symmetric under horizontal and vertical flips, so the
    ideal classifier is flip-invariant and a fully trained model has
    nothing left to gain from flip TTA. Train and test sets must come
    from the same world (the templates define the classes)."""

    templates: np.ndarray  # (classes, side, side) float64
    noise: float

    def __post_init__(self):
        t = np.asarray(self.templates, dtype=np.float64)
        if t.ndim != 3:
            raise InvariantViolation("templates must be (classes, side, side)")
        t.flags.writeable = False
        object.__setattr__(self, "templates", t)

    @property
    def classes(self) -> int:
        return self.templates.shape[0]

    def sample(self, n: int, seed: int) -> tuple:
        """n labeled images: template of the drawn class plus pixel noise."""
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, self.classes, size=n)
        shape = self.templates.shape[1:]
        images = [
            Image(
                np.clip(
                    self.templates[y] + rng.normal(0.0, self.noise, size=shape),
                    0,
                    255,
                ).astype(np.uint8)
            )
            for y in labels
        ]
        return images, LabeledSet(labels, self.classes)


def blob_world(classes: int = 3, side: int = 8, contrast: float = 255.0,
               noise: float = 140.0, seed: int = 0) -> BlobWorld:
    """Build a flip-symmetric template world for the toy classifier."""
    rng = np.random.default_rng(seed)
    templates = []
    for _ in range(classes):
        t = rng.random((side, side))
        t = (t + t[:, ::-1]) / 2
        t = (t + t[::-1, :]) / 2
        templates.append(128.0 + contrast * (t - 0.5))
    return BlobWorld(np.stack(templates), noise)


# --- IDX (MNIST-format) ingestion -------------------------------------------

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def _idx_read(f, count: int) -> bytes:
    buf = f.read(count)
    if len(buf) != count:
        raise TruncatedFile("IDX file ended early")
    return buf


def read_idx_images(path) -> np.ndarray:
    """(n, rows, cols) uint8 array from an IDX image file."""
    with open(path, "rb") as f:
        (magic,) = struct.unpack(">I", _idx_read(f, 4))
        if magic != _IDX_IMAGES_MAGIC:
            raise BadMagic(f"IDX image magic {magic:#010x}")
        n, rows, cols = struct.unpack(">III", _idx_read(f, 12))
        payload = _idx_read(f, n * rows * cols)
    return np.frombuffer(payload, dtype=np.uint8).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    """(n,) uint8 label array from an IDX label file."""
    with open(path, "rb") as f:
        (magic,) = struct.unpack(">I", _idx_read(f, 4))
        if magic != _IDX_LABELS_MAGIC:
            raise BadMagic(f"IDX label magic {magic:#010x}")
        (n,) = struct.unpack(">I", _idx_read(f, 4))
        payload = _idx_read(f, n)
    return np.frombuffer(payload, dtype=np.uint8).copy()
