"""Bit-exact interchange formats and dataset splitting.

Three little-endian binary formats, all versioned:

  TTAP  prediction tensors   magic "TTAP", u32 version, u8 kind, 3 pad,
                             u64 N, u64 M, u64 C, N*M*C float32
  TTAL  label sets           magic "TTAL", u32 version, u64 N, u64 C,
                             N u32 labels
  TTAW  aggregation weights  magic "TTAW", u32 version, u8 mode,
                             u64 M, u64 C, M or M*C float32

Readers reject anything the writers cannot produce; write -> read is
bit-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import AggregationWeights, LabeledSet, PredictionTensor, ScoreKind, WeightMode
from .errors import (
    BadMagic,
    DegenerateSplit,
    EmptySet,
    InvariantViolation,
    LabelOutOfRange,
    NonMonotoneIncrements,
    TruncatedFile,
    UnsupportedMode,
    UnsupportedVersion,
)

FORMAT_VERSION = 1

_PRED_MAGIC = b"TTAP"
_LABEL_MAGIC = b"TTAL"
_WEIGHT_MAGIC = b"TTAW"


def _read_exact(f, count: int, what: str) -> bytes:
    buf = f.read(count)
    if len(buf) != count:
        raise TruncatedFile(f"short read while decoding {what}")
    return buf


def _check_header(f, magic: bytes) -> None:
    got = _read_exact(f, 4, "magic")
    if got != magic:
        raise BadMagic(f"expected {magic!r}, found {got!r}")
    (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"version {version} not supported")


def write_predictions(path, tensor: PredictionTensor) -> None:
    p = Path(path)
    with open(p, "wb") as f:
        f.write(_PRED_MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<B3x", tensor.kind.value))
        f.write(struct.pack("<QQQ", tensor.n, tensor.m, tensor.c))
        f.write(np.ascontiguousarray(tensor.values, dtype="<f4").tobytes())


def read_predictions(path) -> PredictionTensor:
    with open(path, "rb") as f:
        _check_header(f, _PRED_MAGIC)
        kind_byte, _, _, _ = struct.unpack("<B3b", _read_exact(f, 4, "kind"))
        if kind_byte not in (0, 1):
            raise InvariantViolation(f"unknown score kind byte {kind_byte}")
        n, m, c = struct.unpack("<QQQ", _read_exact(f, 24, "dimensions"))
        count = n * m * c
        payload = _read_exact(f, count * 4, "tensor payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(n, m, c)
    return PredictionTensor(values, ScoreKind(kind_byte))


def write_labels(path, labels: LabeledSet) -> None:
    if labels.n == 0:
        raise EmptySet("refusing to write an empty label set")
    with open(path, "wb") as f:
        f.write(_LABEL_MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<QQ", labels.n, labels.c))
        f.write(labels.labels.astype("<u4").tobytes())


def read_labels(path) -> LabeledSet:
    with open(path, "rb") as f:
        _check_header(f, _LABEL_MAGIC)
        n, c = struct.unpack("<QQ", _read_exact(f, 16, "dimensions"))
        if n == 0:
            raise EmptySet("label file declares zero records")
        payload = _read_exact(f, n * 4, "label payload")
    y = np.frombuffer(payload, dtype="<u4").astype(np.int64)
    if y.max() >= c:
        raise LabelOutOfRange(f"label {y.max()} >= class count {c}")
    return LabeledSet(y, int(c))


def write_weights(path, weights: AggregationWeights) -> None:
    with open(path, "wb") as f:
        f.write(_WEIGHT_MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<B", weights.mode.value))
        f.write(struct.pack("<QQ", weights.m, weights.c))
        f.write(np.ascontiguousarray(weights.values, dtype="<f4").tobytes())


def read_weights(path) -> AggregationWeights:
    with open(path, "rb") as f:
        _check_header(f, _WEIGHT_MAGIC)
        (mode_byte,) = struct.unpack("<B", _read_exact(f, 1, "mode"))
        if mode_byte not in (0, 1):
            raise UnsupportedMode(f"unknown weight mode byte {mode_byte}")
        mode = WeightMode(mode_byte)
        m, c = struct.unpack("<QQ", _read_exact(f, 16, "dimensions"))
        count = m if mode is WeightMode.PER_AUGMENTATION else m * c
        payload = _read_exact(f, count * 4, "weights payload")
    w = np.frombuffer(payload, dtype="<f4")
    if mode is WeightMode.PER_AUGMENTATION_CLASS:
        w = w.reshape(m, c)
    return AggregationWeights(mode, w, c=int(c))


@dataclass(frozen=True)
class SplitSpec:
    """Train/val/test fractions plus the seed that fixes the shuffle."""

    fractions: tuple = (0.4, 0.1, 0.5)
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if len(self.fractions) != 3:
            raise InvariantViolation("need exactly (train, val, test) fractions")
        if any(f < 0 for f in self.fractions):
            raise InvariantViolation("fractions must be nonnegative")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise InvariantViolation("fractions must sum to 1")


def _rounded(x: float) -> int:
    # conventional half-up rounding; round() would go to even
    return int(np.floor(x + 0.5))


def _partition(indices: np.ndarray, fractions) -> tuple:
    n = len(indices)
    n_train = _rounded(n * fractions[0])
    n_val = _rounded(n * fractions[1])
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)
    return (
        indices[:n_train],
        indices[n_train : n_train + n_val],
        indices[n_train + n_val :],
    )


def split_dataset(n: int, labels, spec: SplitSpec) -> tuple:
    """Disjoint (train, val, test) index arrays covering 0..n-1.

    Sizes follow the rounded fractions with the remainder going to test.
    Stratified mode rounds within each class instead, so per-class
    proportions track the requested fractions where class counts permit.
    """
    if n < 3:
        raise DegenerateSplit(f"cannot split {n} items three ways")
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        if labels is None:
            raise InvariantViolation("stratified split requires labels")
        y = np.asarray(labels)
        parts = ([], [], [])
        for cls in np.unique(y):
            members = rng.permutation(np.flatnonzero(y == cls))
            for part, chunk in zip(parts, _partition(members, spec.fractions)):
                part.append(chunk)
        train, val, test = (
            np.concatenate(p) if p else np.empty(0, dtype=np.intp) for p in parts
        )
    else:
        order = rng.permutation(n)
        train, val, test = _partition(order, spec.fractions)
    for name, frac, part in zip(("train", "val", "test"), spec.fractions, (train, val, test)):
        if frac > 0 and len(part) == 0:
            raise DegenerateSplit(f"{name} fraction {frac} produced an empty part")
    return train, val, test


def subsample_training(indices, increments, seed: int) -> list:
    """Nested index lists for the growing-training-set protocol.

    Each increment is a fraction of the pool; increment k's list is a
    prefix of one fixed shuffle, so later lists contain earlier ones.
    """
    incs = list(increments)
    if any(f < 0 or f > 1 for f in incs):
        raise NonMonotoneIncrements("increments must lie in [0, 1]")
    if any(b < a for a, b in zip(incs, incs[1:])):
        raise NonMonotoneIncrements("increments must be ascending")
    pool = np.asarray(indices)
    order = np.random.default_rng(seed).permutation(pool)
    return [order[: _rounded(f * len(pool))] for f in incs]
