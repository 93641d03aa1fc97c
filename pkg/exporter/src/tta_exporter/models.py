"""Classifier backends behind one logits-from-views interface.

Built-in backends need no deep-learning stack:
  stub[:C]          constant logits over C classes (default 10)
  linear:C:SEED     fixed random linear map over normalized pixels

Any other name is resolved against the torchvision model zoo with its
default pretrained weights (requires the optional torch extra and
downloadable weights); evaluation mode keeps inference deterministic.
"""

from __future__ import annotations

import numpy as np

from .errors import ModelLoadError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class StubModel:
    """Returns the same logits row for every input view."""

    def __init__(self, classes: int = 10):
        self.classes = classes
        self._row = np.linspace(0.0, 1.0, classes, dtype=np.float32)

    def logits(self, views: list, mean, std) -> np.ndarray:
        return np.tile(self._row, (len(views), 1))


class LinearModel:
    """Seeded random linear readout; nontrivial but dependency-free."""

    def __init__(self, classes: int, seed: int, input_size: int = 224):
        self.classes = classes
        self.input_size = input_size
        rng = np.random.default_rng(seed)
        self._w = rng.normal(0.0, 0.01, (input_size * input_size * 3, classes))

    def logits(self, views: list, mean, std) -> np.ndarray:
        from .transforms import resize_bilinear

        rows = []
        for arr in views:
            if arr.shape[2] == 1:
                arr = np.repeat(arr, 3, axis=2)
            if arr.shape[:2] != (self.input_size, self.input_size):
                arr = resize_bilinear(arr, self.input_size, self.input_size)
            x = arr.astype(np.float64) / 255.0
            x = (x - np.asarray(mean)) / np.asarray(std)
            rows.append(x.reshape(-1) @ self._w)
        return np.asarray(rows)


class TorchZooModel:
    """Thin adapter over a torchvision classifier in eval mode."""

    def __init__(self, name: str):
        try:
            import torch
            import torchvision.models as tvm
        except ImportError as exc:
            raise ModelLoadError(f"torch/torchvision unavailable: {exc}") from exc
        if not hasattr(tvm, name):
            raise ModelLoadError(f"torchvision has no model named {name!r}")
        try:
            self._model = getattr(tvm, name)(weights="DEFAULT")
        except Exception as exc:
            raise ModelLoadError(f"could not load weights for {name!r}: {exc}") from exc
        self._model.eval()
        self._torch = torch
        self.classes = None  # discovered on first forward

    def logits(self, views: list, mean, std) -> np.ndarray:
        torch = self._torch
        batch = []
        for arr in views:
            if arr.shape[2] == 1:
                arr = np.repeat(arr, 3, axis=2)
            x = arr.astype(np.float32) / 255.0
            x = (x - np.asarray(mean, dtype=np.float32)) / np.asarray(std, dtype=np.float32)
            batch.append(np.transpose(x, (2, 0, 1)))
        with torch.no_grad():
            out = self._model(torch.from_numpy(np.stack(batch)))
        logits = out.numpy()
        self.classes = logits.shape[1]
        return logits


def load_model(name: str):
    if name == "stub" or name.startswith("stub:"):
        parts = name.split(":")
        classes = int(parts[1]) if len(parts) > 1 else 10
        return StubModel(classes)
    if name.startswith("linear:"):
        parts = name.split(":")
        if len(parts) != 3:
            raise ModelLoadError("linear model spelling is linear:CLASSES:SEED")
        return LinearModel(int(parts[1]), int(parts[2]))
    return TorchZooModel(name)
