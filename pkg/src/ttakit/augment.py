"""Deterministic image transforms and TTA view policies.

Every transform is a pure function of (spec, image): identical inputs give
byte-identical outputs. Geometric transforms (rotate, shear, translate,
resize) use a shared bilinear sampler that replicates edge pixels at the
borders; intensity transforms lean on Pillow's deterministic operators.

Policies are ordered lists of transform specs with the identity view at
index 0, serializable to a plain-text manifest (one line per spec:
``index<TAB>name<TAB>key=value,key=value``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import ImageEnhance, ImageFilter, ImageOps

from .errors import (
    GeometryError,
    InvalidCropSize,
    InvariantViolation,
    ManifestError,
    UnknownTransform,
)

# side length of the preprocessed source the standard policy assumes
STANDARD_SOURCE_SIDE = 256

CROP_ANCHORS = ("center", "tl", "tr", "bl", "br")


@dataclass(frozen=True)
class Image:
    """8-bit raster image, shape (height, width, channels), 1 or 3 channels."""

    pixels: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.pixels, dtype=np.uint8)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3 or a.shape[2] not in (1, 3):
            raise InvariantViolation(f"expected (h, w, 1|3) pixels, got {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise InvariantViolation("image must be at least 1x1")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        object.__setattr__(self, "pixels", a)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def same_bytes(self, other: "Image") -> bool:
        return (
            self.pixels.shape == other.pixels.shape
            and self.pixels.tobytes() == other.pixels.tobytes()
        )

    def to_pil(self) -> PILImage.Image:
        if self.channels == 1:
            return PILImage.fromarray(self.pixels[:, :, 0], "L")
        return PILImage.fromarray(self.pixels, "RGB")

    @classmethod
    def from_pil(cls, pil: PILImage.Image) -> "Image":
        if pil.mode == "L":
            return cls(np.asarray(pil, dtype=np.uint8))
        if pil.mode != "RGB":
            pil = pil.convert("RGB")
        return cls(np.asarray(pil, dtype=np.uint8))


def read_png(path) -> Image:
    with PILImage.open(path) as pil:
        pil.load()
        return Image.from_pil(pil)


def write_png(path, img: Image) -> None:
    img.to_pil().save(Path(path), format="PNG")


@dataclass(frozen=True)
class AugmentationSpec:
    """One registered transform plus its parameter values (ordered)."""

    name: str
    params: tuple = ()  # tuple of (key, value) pairs

    def __post_init__(self):
        if self.name not in TRANSFORMS:
            raise UnknownTransform(f"no transform named {self.name!r}")
        object.__setattr__(self, "params", tuple(self.params))
        schema = TRANSFORMS[self.name]
        given = dict(self.params)
        if set(given) != set(schema):
            raise InvariantViolation(
                f"{self.name} expects params {sorted(schema)}, got {sorted(given)}"
            )
        for key, value in given.items():
            _check_param(self.name, key, value)

    def param(self, key: str):
        return dict(self.params)[key]

    def is_identity_view(self) -> bool:
        """True for specs that reproduce the input up to the policy's
        shared crop geometry (the convention for index 0)."""
        if self.name == "identity":
            return True
        if self.name == "view":
            p = dict(self.params)
            return p["flip"] == "none" and p["crop"] == "center" and p["scale"] == 1.0
        return False


@dataclass(frozen=True)
class AugmentationPolicy:
    """Ordered transform specs; index 0 is always the identity view."""

    specs: tuple
    name: str = "policy"

    def __post_init__(self):
        specs = tuple(self.specs)
        if not specs:
            raise InvariantViolation("policy needs at least one spec")
        if not specs[0].is_identity_view():
            raise InvariantViolation("policy spec[0] must be the identity view")
        if len(set(specs)) != len(specs):
            raise InvariantViolation("policy specs must be pairwise distinct")
        object.__setattr__(self, "specs", specs)

    @property
    def m(self) -> int:
        return len(self.specs)


# --- parameter schemas ----------------------------------------------------

_NO_PARAMS: dict = {}

TRANSFORMS = {
    "identity": _NO_PARAMS,
    "horizontal-flip": _NO_PARAMS,
    "vertical-flip": _NO_PARAMS,
    "transpose": _NO_PARAMS,
    "invert": _NO_PARAMS,
    "auto-contrast": _NO_PARAMS,
    "equalize": _NO_PARAMS,
    "grayscale": _NO_PARAMS,
    "crop": {"anchor": CROP_ANCHORS, "size": (1, 2**16)},
    "rotate": {"degrees": (-180.0, 180.0)},
    "shear-x": {"factor": (-1.0, 1.0)},
    "shear-y": {"factor": (-1.0, 1.0)},
    "translate-x": {"frac": (-1.0, 1.0)},
    "translate-y": {"frac": (-1.0, 1.0)},
    "brightness": {"factor": (0.0, 4.0)},
    "contrast": {"factor": (0.0, 4.0)},
    "color-saturation": {"factor": (0.0, 4.0)},
    "sharpness": {"factor": (0.0, 4.0)},
    "posterize": {"bits": (1.0, 8.0)},
    "solarize": {"threshold": (0.0, 255.0)},
    "gaussian-blur": {"radius": (0.0, 16.0)},
    "view": {
        "flip": ("none", "h"),
        "crop": CROP_ANCHORS,
        "scale": (0.5, 2.0),
        "size": (1, 2**16),
    },
}


def _check_param(name: str, key: str, value) -> None:
    rule = TRANSFORMS[name][key]
    if isinstance(rule, tuple) and rule and isinstance(rule[0], str):
        if value not in rule:
            raise InvariantViolation(f"{name}.{key} must be one of {rule}, got {value!r}")
    else:
        lo, hi = rule
        if not isinstance(value, (int, float)) or not (lo <= value <= hi):
            raise InvariantViolation(f"{name}.{key}={value!r} outside [{lo}, {hi}]")


# --- policies --------------------------------------------------------------

STANDARD_FLIPS = ("none", "h")
STANDARD_SCALES = (1.0, 1.04, 1.10)


def standard_policy(crop_size: int = 224) -> AugmentationPolicy:
    """The flip x crop x scale policy: 2 flips, 5 crops, 3 scales = 30 views.

    Views are ordered flip-major, then crop, then scale, with the
    (no-flip, center, 1.0) view first. Geometry assumes a square source of
    side 256 after preprocessing; each view is a crop_size square.
    """
    if not 1 <= crop_size <= STANDARD_SOURCE_SIDE:
        raise InvalidCropSize(
            f"crop {crop_size} does not fit a {STANDARD_SOURCE_SIDE}px source"
        )
    specs = []
    for flip in STANDARD_FLIPS:
        for anchor in CROP_ANCHORS:
            for scale in STANDARD_SCALES:
                specs.append(
                    AugmentationSpec(
                        "view",
                        (
                            ("flip", flip),
                            ("crop", anchor),
                            ("scale", scale),
                            ("size", crop_size),
                        ),
                    )
                )
    return AugmentationPolicy(tuple(specs), name=f"standard-{crop_size}")


_EXPANDED_BINARY = (
    "identity",
    "horizontal-flip",
    "vertical-flip",
    "auto-contrast",
    "invert",
    "equalize",
    "grayscale",
    "transpose",
)

# (transform, param key, low, high); 10 evenly spaced magnitudes each,
# symmetric around the identity setting where the transform has one
_EXPANDED_CONTINUOUS = (
    ("rotate", "degrees", -30.0, 30.0),
    ("shear-x", "factor", -0.3, 0.3),
    ("shear-y", "factor", -0.3, 0.3),
    ("translate-x", "frac", -0.3, 0.3),
    ("translate-y", "frac", -0.3, 0.3),
    ("brightness", "factor", 0.1, 1.9),
    ("contrast", "factor", 0.1, 1.9),
    ("color-saturation", "factor", 0.1, 1.9),
    ("sharpness", "factor", 0.1, 1.9),
    ("posterize", "bits", 1.0, 7.0),
    ("solarize", "threshold", 16.0, 240.0),
    ("gaussian-blur", "radius", 0.25, 2.5),
)

EXPANDED_MAGNITUDE_LEVELS = 10


def magnitude_levels(low: float, high: float, levels: int = EXPANDED_MAGNITUDE_LEVELS):
    """Evenly spaced magnitudes over [low, high], endpoints included."""
    step = (high - low) / (levels - 1)
    return tuple(low + i * step for i in range(levels))


def expanded_policy() -> AugmentationPolicy:
    """8 parameterless transforms plus 12 continuous transforms at 10
    magnitudes each: 128 views, identity first."""
    specs = [AugmentationSpec(name) for name in _EXPANDED_BINARY]
    for name, key, low, high in _EXPANDED_CONTINUOUS:
        for mag in magnitude_levels(low, high):
            specs.append(AugmentationSpec(name, ((key, mag),)))
    return AugmentationPolicy(tuple(specs), name="expanded-v1")


def flips_policy() -> AugmentationPolicy:
    """Original, horizontal flip, vertical flip."""
    specs = (
        AugmentationSpec("identity"),
        AugmentationSpec("horizontal-flip"),
        AugmentationSpec("vertical-flip"),
    )
    return AugmentationPolicy(specs, name="flips")


# --- application -----------------------------------------------------------

def _bilinear_sample(arr: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample arr at float coords with bilinear weights, clamping out-of-
    bounds coordinates to the nearest edge pixel."""
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


def _affine(img: Image, inv_coeffs) -> Image:
    """Resample with the inverse map (xo, yo) -> (xs, ys)."""
    h, w = img.height, img.width
    xo, yo = _output_grid(h, w)
    xs, ys = inv_coeffs(xo, yo)
    return Image(_bilinear_sample(img.pixels, xs, ys))


def _resize_bilinear(img: Image, out_w: int, out_h: int) -> Image:
    if out_w < 1 or out_h < 1:
        raise GeometryError("resize target must be at least 1x1")
    xo, yo = _output_grid(out_h, out_w)
    xs = (xo + 0.5) * (img.width / out_w) - 0.5
    ys = (yo + 0.5) * (img.height / out_h) - 0.5
    return Image(_bilinear_sample(img.pixels, xs, ys))


def _crop(img: Image, anchor: str, size: int) -> Image:
    h, w = img.height, img.width
    if size > h or size > w:
        raise GeometryError(f"cannot crop {size}px from a {w}x{h} image")
    top_max, left_max = h - size, w - size
    top, left = {
        "center": (top_max // 2, left_max // 2),
        "tl": (0, 0),
        "tr": (0, left_max),
        "bl": (top_max, 0),
        "br": (top_max, left_max),
    }[anchor]
    return Image(img.pixels[top : top + size, left : left + size])


def _grayscale(img: Image) -> Image:
    if img.channels == 1:
        return Image(img.pixels)
    p = img.pixels.astype(np.uint32)
    gray = (299 * p[:, :, 0] + 587 * p[:, :, 1] + 114 * p[:, :, 2]) // 1000
    return Image(np.repeat(gray.astype(np.uint8)[:, :, None], 3, axis=2))


def _posterize(img: Image, bits: float) -> Image:
    b = int(round(bits))
    mask = np.uint8(0xFF & (0xFF << (8 - b)))
    return Image(img.pixels & mask)


def _solarize(img: Image, threshold: float) -> Image:
    t = int(round(threshold))
    p = img.pixels
    return Image(np.where(p >= t, 255 - p, p).astype(np.uint8))


def _via_pil(img: Image, fn) -> Image:
    return Image.from_pil(fn(img.to_pil()))


def apply(spec: AugmentationSpec, img: Image) -> Image:
    """Apply one transform spec to an image, deterministically."""
    name = spec.name
    if name not in TRANSFORMS:
        raise UnknownTransform(f"no transform named {name!r}")
    p = dict(spec.params)
    h, w = img.height, img.width

    if name == "identity":
        return Image(img.pixels)
    if name == "horizontal-flip":
        return Image(img.pixels[:, ::-1])
    if name == "vertical-flip":
        return Image(img.pixels[::-1, :])
    if name == "transpose":
        return Image(np.swapaxes(img.pixels, 0, 1))
    if name == "invert":
        return Image(255 - img.pixels)
    if name == "grayscale":
        return _grayscale(img)
    if name == "posterize":
        return _posterize(img, p["bits"])
    if name == "solarize":
        return _solarize(img, p["threshold"])
    if name == "auto-contrast":
        return _via_pil(img, ImageOps.autocontrast)
    if name == "equalize":
        return _via_pil(img, ImageOps.equalize)
    if name == "brightness":
        return _via_pil(img, lambda im: ImageEnhance.Brightness(im).enhance(p["factor"]))
    if name == "contrast":
        return _via_pil(img, lambda im: ImageEnhance.Contrast(im).enhance(p["factor"]))
    if name == "color-saturation":
        if img.channels == 1:
            return Image(img.pixels)  # no chroma to adjust
        return _via_pil(img, lambda im: ImageEnhance.Color(im).enhance(p["factor"]))
    if name == "sharpness":
        return _via_pil(img, lambda im: ImageEnhance.Sharpness(im).enhance(p["factor"]))
    if name == "gaussian-blur":
        return _via_pil(img, lambda im: im.filter(ImageFilter.GaussianBlur(p["radius"])))
    if name == "crop":
        return _crop(img, p["anchor"], int(p["size"]))
    if name == "rotate":
        th = math.radians(p["degrees"])
        cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
        cos_t, sin_t = math.cos(th), math.sin(th)

        def inv(xo, yo):
            dx, dy = xo - cx, yo - cy
            return cx + cos_t * dx + sin_t * dy, cy - sin_t * dx + cos_t * dy

        return _affine(img, inv)
    if name == "shear-x":
        f = p["factor"]
        cy = (h - 1) / 2.0
        return _affine(img, lambda xo, yo: (xo - f * (yo - cy), yo))
    if name == "shear-y":
        f = p["factor"]
        cx = (w - 1) / 2.0
        return _affine(img, lambda xo, yo: (xo, yo - f * (xo - cx)))
    if name == "translate-x":
        t = p["frac"] * w
        return _affine(img, lambda xo, yo: (xo - t, yo))
    if name == "translate-y":
        t = p["frac"] * h
        return _affine(img, lambda xo, yo: (xo, yo - t))
    if name == "view":
        scale = p["scale"]
        scaled = _resize_bilinear(
            img, int(round(w * scale)), int(round(h * scale))
        )
        cropped = _crop(scaled, p["crop"], int(p["size"]))
        if p["flip"] == "h":
            return Image(cropped.pixels[:, ::-1])
        return cropped
    raise UnknownTransform(f"transform {name!r} registered but not implemented")


def apply_policy(policy: AugmentationPolicy, img: Image) -> list:
    """All M views of an image, in policy order (index 0 = identity view)."""
    return [apply(spec, img) for spec in policy.specs]


# --- manifest --------------------------------------------------------------

def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def write_manifest(path, policy: AugmentationPolicy) -> None:
    lines = []
    for i, spec in enumerate(policy.specs):
        params = ",".join(f"{k}={_format_value(v)}" for k, v in spec.params)
        lines.append(f"{i}\t{spec.name}\t{params}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path, name: str | None = None) -> AugmentationPolicy:
    text = Path(path).read_text(encoding="utf-8")
    specs = []
    for lineno, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ManifestError(f"line {lineno}: expected 3 tab-separated fields")
        idx_s, tname, params_s = parts
        try:
            idx = int(idx_s)
        except ValueError:
            raise ManifestError(f"line {lineno}: bad index {idx_s!r}") from None
        if idx != len(specs):
            raise ManifestError(f"line {lineno}: indices must ascend from 0")
        params = []
        if params_s:
            for item in params_s.split(","):
                if "=" not in item:
                    raise ManifestError(f"line {lineno}: bad param {item!r}")
                k, v = item.split("=", 1)
                params.append((k, _parse_value(v)))
        try:
            specs.append(AugmentationSpec(tname, tuple(params)))
        except (UnknownTransform, InvariantViolation) as exc:
            raise ManifestError(f"line {lineno}: {exc}") from exc
    if not specs:
        raise ManifestError("manifest has no specs")
    return AugmentationPolicy(tuple(specs), name=name or Path(path).stem)
