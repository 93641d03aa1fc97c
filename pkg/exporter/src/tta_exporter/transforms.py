"""Deterministic transforms matching the TTA toolkit's view semantics.

The toolkit defines each policy in a plain-text manifest (one line per
spec: ``index<TAB>name<TAB>key=value,...``). This module parses that
manifest and applies the named transforms to uint8 (h, w, c) arrays with
the exact arithmetic the toolkit uses: shared bilinear sampler with edge
replication for geometry, Pillow operators for intensity. Byte-for-byte
parity with the toolkit's own outputs is covered by the probe-image tests.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import ImageEnhance, ImageFilter, ImageOps

from .errors import ManifestMismatch

CROP_ANCHORS = ("center", "tl", "tr", "bl", "br")

SUPPORTED = {
    "identity": frozenset(),
    "horizontal-flip": frozenset(),
    "vertical-flip": frozenset(),
    "transpose": frozenset(),
    "invert": frozenset(),
    "auto-contrast": frozenset(),
    "equalize": frozenset(),
    "grayscale": frozenset(),
    "crop": frozenset({"anchor", "size"}),
    "rotate": frozenset({"degrees"}),
    "shear-x": frozenset({"factor"}),
    "shear-y": frozenset({"factor"}),
    "translate-x": frozenset({"frac"}),
    "translate-y": frozenset({"frac"}),
    "brightness": frozenset({"factor"}),
    "contrast": frozenset({"factor"}),
    "color-saturation": frozenset({"factor"}),
    "sharpness": frozenset({"factor"}),
    "posterize": frozenset({"bits"}),
    "solarize": frozenset({"threshold"}),
    "gaussian-blur": frozenset({"radius"}),
    "view": frozenset({"flip", "crop", "scale", "size"}),
}


def _parse_value(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_manifest(path) -> list:
    """[(name, params_dict), ...] in index order; rejects unsupported specs."""
    specs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ManifestMismatch(f"line {lineno}: expected 3 tab-separated fields")
        idx_s, name, params_s = parts
        try:
            idx = int(idx_s)
        except ValueError:
            raise ManifestMismatch(f"line {lineno}: bad index {idx_s!r}") from None
        if idx != len(specs):
            raise ManifestMismatch(f"line {lineno}: indices must ascend from 0")
        if name not in SUPPORTED:
            raise ManifestMismatch(f"line {lineno}: unsupported transform {name!r}")
        params = {}
        for item in filter(None, params_s.split(",") if params_s else []):
            if "=" not in item:
                raise ManifestMismatch(f"line {lineno}: bad param {item!r}")
            k, v = item.split("=", 1)
            params[k] = _parse_value(v)
        if set(params) != set(SUPPORTED[name]):
            raise ManifestMismatch(
                f"line {lineno}: {name} expects params {sorted(SUPPORTED[name])}"
            )
        specs.append((name, params))
    if not specs:
        raise ManifestMismatch("manifest has no specs")
    return specs


# --- pixel machinery (mirrors the toolkit's view arithmetic) -----------------

def _bilinear_sample(arr: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = arr.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    a = arr.astype(np.float64)
    top = a[y0, x0] * (1.0 - fx) + a[y0, x1] * fx
    bottom = a[y1, x0] * (1.0 - fx) + a[y1, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _output_grid(h: int, w: int):
    yo, xo = np.mgrid[0:h, 0:w]
    return xo.astype(np.float64), yo.astype(np.float64)


def _affine(arr: np.ndarray, inv_coeffs) -> np.ndarray:
    h, w = arr.shape[:2]
    xo, yo = _output_grid(h, w)
    xs, ys = inv_coeffs(xo, yo)
    return _bilinear_sample(arr, xs, ys)


def resize_bilinear(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    xo, yo = _output_grid(out_h, out_w)
    xs = (xo + 0.5) * (arr.shape[1] / out_w) - 0.5
    ys = (yo + 0.5) * (arr.shape[0] / out_h) - 0.5
    return _bilinear_sample(arr, xs, ys)


def center_crop(arr: np.ndarray, size: int) -> np.ndarray:
    return _crop(arr, "center", size)


def _crop(arr: np.ndarray, anchor: str, size: int) -> np.ndarray:
    h, w = arr.shape[:2]
    if size > h or size > w:
        raise ManifestMismatch(f"cannot crop {size}px from a {w}x{h} view")
    top_max, left_max = h - size, w - size
    top, left = {
        "center": (top_max // 2, left_max // 2),
        "tl": (0, 0),
        "tr": (0, left_max),
        "bl": (top_max, 0),
        "br": (top_max, left_max),
    }[anchor]
    return arr[top : top + size, left : left + size]


def _to_pil(arr: np.ndarray) -> PILImage.Image:
    if arr.shape[2] == 1:
        return PILImage.fromarray(arr[:, :, 0], "L")
    return PILImage.fromarray(arr, "RGB")


def _from_pil(pil: PILImage.Image) -> np.ndarray:
    out = np.asarray(pil, dtype=np.uint8)
    if out.ndim == 2:
        out = out[:, :, None]
    return out


def _via_pil(arr: np.ndarray, fn) -> np.ndarray:
    return _from_pil(fn(_to_pil(arr)))


def apply_spec(name: str, params: dict, arr: np.ndarray) -> np.ndarray:
    """Apply one manifest spec to a uint8 (h, w, c) array."""
    h, w = arr.shape[:2]
    p = params
    if name == "identity":
        return arr.copy()
    if name == "horizontal-flip":
        return arr[:, ::-1].copy()
    if name == "vertical-flip":
        return arr[::-1, :].copy()
    if name == "transpose":
        return np.swapaxes(arr, 0, 1).copy()
    if name == "invert":
        return 255 - arr
    if name == "grayscale":
        if arr.shape[2] == 1:
            return arr.copy()
        px = arr.astype(np.uint32)
        gray = (299 * px[:, :, 0] + 587 * px[:, :, 1] + 114 * px[:, :, 2]) // 1000
        return np.repeat(gray.astype(np.uint8)[:, :, None], 3, axis=2)
    if name == "posterize":
        bits = int(round(p["bits"]))
        mask = np.uint8(0xFF & (0xFF << (8 - bits)))
        return arr & mask
    if name == "solarize":
        t = int(round(p["threshold"]))
        return np.where(arr >= t, 255 - arr, arr).astype(np.uint8)
    if name == "auto-contrast":
        return _via_pil(arr, ImageOps.autocontrast)
    if name == "equalize":
        return _via_pil(arr, ImageOps.equalize)
    if name == "brightness":
        return _via_pil(arr, lambda im: ImageEnhance.Brightness(im).enhance(p["factor"]))
    if name == "contrast":
        return _via_pil(arr, lambda im: ImageEnhance.Contrast(im).enhance(p["factor"]))
    if name == "color-saturation":
        if arr.shape[2] == 1:
            return arr.copy()
        return _via_pil(arr, lambda im: ImageEnhance.Color(im).enhance(p["factor"]))
    if name == "sharpness":
        return _via_pil(arr, lambda im: ImageEnhance.Sharpness(im).enhance(p["factor"]))
    if name == "gaussian-blur":
        return _via_pil(arr, lambda im: im.filter(ImageFilter.GaussianBlur(p["radius"])))
    if name == "crop":
        return _crop(arr, p["anchor"], int(p["size"])).copy()
    if name == "rotate":
        th = math.radians(p["degrees"])
        cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
        cos_t, sin_t = math.cos(th), math.sin(th)

        def inv(xo, yo):
            dx, dy = xo - cx, yo - cy
            return cx + cos_t * dx + sin_t * dy, cy - sin_t * dx + cos_t * dy

        return _affine(arr, inv)
    if name == "shear-x":
        f = p["factor"]
        cy = (h - 1) / 2.0
        return _affine(arr, lambda xo, yo: (xo - f * (yo - cy), yo))
    if name == "shear-y":
        f = p["factor"]
        cx = (w - 1) / 2.0
        return _affine(arr, lambda xo, yo: (xo, yo - f * (xo - cx)))
    if name == "translate-x":
        t = p["frac"] * w
        return _affine(arr, lambda xo, yo: (xo - t, yo))
    if name == "translate-y":
        t = p["frac"] * h
        return _affine(arr, lambda xo, yo: (xo, yo - t))
    if name == "view":
        scale = p["scale"]
        scaled = resize_bilinear(arr, int(round(w * scale)), int(round(h * scale)))
        cropped = _crop(scaled, p["crop"], int(p["size"]))
        if p["flip"] == "h":
            return cropped[:, ::-1].copy()
        return cropped.copy()
    raise ManifestMismatch(f"unsupported transform {name!r}")


def apply_manifest(specs: list, arr: np.ndarray) -> list:
    """All views of an image, in manifest order."""
    return [apply_spec(name, params, arr) for name, params in specs]
