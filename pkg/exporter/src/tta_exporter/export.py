"""Run a classifier over every policy view of an image folder and write
the toolkit's TTAP/TTAL files.

The image directory holds one subfolder per class. Subfolders named with
integers map to those class indices; otherwise sorted order assigns
0..K-1. Preprocessing mirrors the toolkit's convention: resize the
shortest side to 256, center-crop to 256x256, then apply the manifest's
views. The exporter only produces files; all aggregation stays in the
toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import ExporterError
from .formats import KIND_LOGITS, write_label_set, write_prediction_tensor
from .models import IMAGENET_MEAN, IMAGENET_STD, load_model
from .transforms import apply_manifest, center_crop, read_manifest, resize_bilinear

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

PREPROCESS_SIDE = 256


@dataclass(frozen=True)
class ExportJob:
    model: str
    image_dir: str
    manifest_path: str
    out_prefix: str
    mean: tuple = IMAGENET_MEAN
    std: tuple = IMAGENET_STD
    preprocess_side: int = PREPROCESS_SIDE
    skip_preprocess: bool = False  # feed stored pixels straight to the views


@dataclass
class ExportResult:
    predictions_path: str
    labels_path: str
    n: int
    m: int
    c: int
    class_names: list = field(default_factory=list)


def _load_image(path: Path) -> np.ndarray:
    with PILImage.open(path) as pil:
        pil.load()
        if pil.mode not in ("L", "RGB"):
            pil = pil.convert("RGB")
        arr = np.asarray(pil, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _preprocess(arr: np.ndarray, side: int) -> np.ndarray:
    h, w = arr.shape[:2]
    if h < w:
        arr = resize_bilinear(arr, int(round(w * side / h)), side)
    else:
        arr = resize_bilinear(arr, side, int(round(h * side / w)))
    return center_crop(arr, side)


def _collect(image_dir: Path) -> tuple:
    classes = sorted(p for p in image_dir.iterdir() if p.is_dir())
    if not classes:
        raise ExporterError(f"{image_dir} has no class subfolders")
    if all(p.name.lstrip("0").isdigit() or p.name == "0" for p in classes):
        indexed = [(int(p.name), p) for p in classes]
    else:
        indexed = list(enumerate(classes))
    samples = []
    for label, folder in indexed:
        for img in sorted(folder.iterdir()):
            if img.suffix.lower() in IMAGE_SUFFIXES:
                samples.append((img, label))
    if not samples:
        raise ExporterError(f"no images under {image_dir}")
    return samples, [p.name for _, p in indexed], max(label for label, _ in indexed) + 1


def export(job: ExportJob) -> ExportResult:
    specs = read_manifest(job.manifest_path)
    model = load_model(job.model)
    samples, class_names, label_span = _collect(Path(job.image_dir))

    all_logits = []
    labels = []
    for path, label in samples:
        arr = _load_image(path)
        if not job.skip_preprocess:
            arr = _preprocess(arr, job.preprocess_side)
        views = apply_manifest(specs, arr)
        all_logits.append(model.logits(views, job.mean, job.std))
        labels.append(label)

    values = np.asarray(all_logits, dtype=np.float32)
    n, m, c = values.shape
    if label_span > c:
        raise ExporterError(
            f"labels span {label_span} classes but the model outputs {c}"
        )
    preds_path = f"{job.out_prefix}.ttap"
    labels_path = f"{job.out_prefix}.ttal"
    write_prediction_tensor(preds_path, values, KIND_LOGITS)
    write_label_set(labels_path, np.asarray(labels), c)
    return ExportResult(preds_path, labels_path, n, m, c, class_names)
