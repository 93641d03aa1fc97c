"""Model-agnostic test-time augmentation toolkit.

Generates deterministic augmented views of images, learns nonnegative
aggregation weights over per-view predictions, runs the usual baselines
(raw, mean, greedy policy search), and reports correction/corruption
diagnostics, all verifiable against a built-in synthetic classifier.
"""

from .aggregate import (
    Aggregator,
    Method,
    TrainConfig,
    baseline_mean,
    baseline_raw,
    forward_aug,
    forward_class,
    gps_search,
    gradient,
    loss,
    predict,
    select_mode,
    train,
)
from .augment import (
    AugmentationPolicy,
    AugmentationSpec,
    Image,
    apply,
    apply_policy,
    expanded_policy,
    flips_policy,
    read_manifest,
    read_png,
    standard_policy,
    write_manifest,
    write_png,
)
from .core import (
    AggregationWeights,
    LabeledSet,
    PredictionTensor,
    ScoreKind,
    WeightMode,
    argmax_class,
    softmax,
    to_probabilities,
)
from .io import (
    SplitSpec,
    read_labels,
    read_predictions,
    read_weights,
    split_dataset,
    subsample_training,
    write_labels,
    write_predictions,
    write_weights,
)
from .metrics import (
    ChangeReport,
    SignificanceResult,
    accuracy,
    agreement,
    corrections_corruptions,
    paired_t_test,
    subsample_eval,
)
from .simulate import (
    BlobWorld,
    SyntheticWorld,
    ToyClassifier,
    ToyTrainConfig,
    bayes_weights,
    blob_world,
    emit,
    invariant_world,
    planted_class_asymmetry,
    toy_logits,
    train_toy,
    uniform_world,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
