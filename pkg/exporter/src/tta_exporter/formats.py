"""Writers for the toolkit's TTAP/TTAL interchange formats.

Layouts (little-endian, version 1):
  TTAP: magic "TTAP", u32 version, u8 kind (0 = logits), 3 pad bytes,
        u64 N, u64 M, u64 C, N*M*C float32
  TTAL: magic "TTAL", u32 version, u64 N, u64 C, N u32 labels
"""

from __future__ import annotations

import struct

import numpy as np

FORMAT_VERSION = 1
KIND_LOGITS = 0
KIND_PROBABILITIES = 1


def write_prediction_tensor(path, values: np.ndarray, kind: int = KIND_LOGITS) -> None:
    v = np.ascontiguousarray(values, dtype="<f4")
    if v.ndim != 3:
        raise ValueError(f"tensor must be (n, m, c), got {v.shape}")
    if not np.isfinite(v).all():
        raise ValueError("tensor must be finite")
    n, m, c = v.shape
    with open(path, "wb") as f:
        f.write(b"TTAP")
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<B3x", kind))
        f.write(struct.pack("<QQQ", n, m, c))
        f.write(v.tobytes())


def write_label_set(path, labels: np.ndarray, class_count: int) -> None:
    y = np.asarray(labels)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("labels must be a non-empty 1-d array")
    if y.min() < 0 or y.max() >= class_count:
        raise ValueError(f"labels must lie in [0, {class_count})")
    with open(path, "wb") as f:
        f.write(b"TTAL")
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<QQ", y.size, class_count))
        f.write(y.astype("<u4").tobytes())
