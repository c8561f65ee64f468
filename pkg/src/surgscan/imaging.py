"""Deterministic raster operations for augmentation and upload pipelines.

Every operation is a pure function: identical inputs (seed included)
produce bit-identical outputs. Rasters are immutable 8-bit RGB arrays.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, PngImagePlugin, UnidentifiedImageError

from surgscan.core import PixelBBox, SurgScanError, Transform, validate_bbox

CANONICAL_CAPTURE_SIZE = (1600, 1600)  # rig camera output, width x height


class UnsupportedImage(SurgScanError):
    """Payload is not a decodable PNG or JPEG image."""


class InvalidAngle(SurgScanError):
    """Fixed-rotation angle outside {90, 180, 270}."""


@dataclass(frozen=True, eq=False)
class Raster:
    """Immutable 8-bit RGB image: row-major (height, width, 3) samples.

    meta carries text key/value pairs (PNG tEXt chunks survive decode and
    are preserved by every operation), so provenance tags ride along the
    processing pipeline.
    """

    pixels: np.ndarray
    meta: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
            raise ValueError(f"raster must be (H, W, 3) uint8, got {arr.shape} {arr.dtype}")
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)
        object.__setattr__(self, "meta", tuple(sorted(self.meta)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 3

    def tag(self, key: str) -> str | None:
        for k, v in self.meta:
            if k == key:
                return v
        return None

    def with_meta(self, **tags: str) -> "Raster":
        merged = dict(self.meta)
        merged.update(tags)
        return Raster(self.pixels, tuple(merged.items()))

    def _replace_pixels(self, arr: np.ndarray) -> "Raster":
        return Raster(arr, self.meta)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return self.meta == other.meta and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class AugmentParams:
    """Configuration of the augmentation pipeline.

    Rotation angles and the +/-20% photometric magnitudes follow the
    capture protocol; noise sigma, unsharp radius, and unsharp amount are
    repo defaults recorded in each derivative's transform descriptor.
    """

    fixed_rotations: tuple[int, ...] = (90, 180, 270)
    random_rotation_range: float = 20.0
    brightness_delta: float = 0.20
    contrast_delta: float = 0.20
    noise_sigma: float = 10.0
    unsharp_radius: float = 2.0
    unsharp_amount: float = 1.0
    fill: tuple[int, int, int] = (0, 0, 0)
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "fixed_rotations", tuple(sorted(set(self.fixed_rotations))))
        for angle in self.fixed_rotations:
            if angle not in (90, 180, 270):
                raise ValueError(f"fixed rotation must be in {{90,180,270}}, got {angle}")
        if not 0.0 <= self.random_rotation_range <= 45.0:
            raise ValueError("random_rotation_range must be within [0, 45] degrees")
        for name in ("brightness_delta", "contrast_delta"):
            delta = getattr(self, name)
            if not 0.0 <= delta < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {delta}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.unsharp_radius <= 0:
            raise ValueError("unsharp_radius must be > 0")
        if self.unsharp_amount < 0:
            raise ValueError("unsharp_amount must be >= 0")


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5)


def _clamp_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(values, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Decode / encode


def decode_image(src: Union[Path, str, bytes]) -> Raster:
    """Decode a PNG or JPEG file (path or raw bytes) into an RGB raster.

    Grayscale and alpha inputs are expanded/flattened to RGB. PNG text
    chunks are captured into the raster's meta. Raises UnsupportedImage
    for anything that is not a decodable PNG/JPEG.
    """
    try:
        if isinstance(src, bytes):
            im = Image.open(io.BytesIO(src))
        else:
            im = Image.open(src)
        im.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise UnsupportedImage(f"cannot decode image: {exc}") from exc
    if im.format not in ("PNG", "JPEG"):
        raise UnsupportedImage(f"unsupported format {im.format!r}; expected PNG or JPEG")
    meta = tuple((str(k), str(v)) for k, v in getattr(im, "text", {}).items())
    if im.mode != "RGB":
        im = im.convert("RGB")
    return Raster(np.asarray(im), meta)


def encode_png(img: Raster, path: Union[Path, str]) -> Path:
    """Write a raster as PNG (lossless), preserving meta as text chunks."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img.pixels).save(path, format="PNG", pnginfo=_pnginfo(img))
    return Path(path)


def png_bytes(img: Raster) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.pixels).save(buf, format="PNG", pnginfo=_pnginfo(img))
    return buf.getvalue()


def _pnginfo(img: Raster) -> PngImagePlugin.PngInfo:
    info = PngImagePlugin.PngInfo()
    for key, value in img.meta:
        info.add_text(key, value)
    return info


# ---------------------------------------------------------------------------
# Geometry


def resize_preserve_aspect(img: Raster, target_long_side: int) -> Raster:
    """Resize so the long side equals target_long_side, keeping aspect.

    Short side becomes round(short * target / long), at least 1 pixel.
    Bilinear resampling.
    """
    if target_long_side < 1:
        raise ValueError("target_long_side must be >= 1")
    w, h = img.width, img.height
    if w >= h:
        new_w = target_long_side
        new_h = max(1, int(math.floor(h * target_long_side / w + 0.5)))
    else:
        new_h = target_long_side
        new_w = max(1, int(math.floor(w * target_long_side / h + 0.5)))
    if (new_w, new_h) == (w, h):
        return img
    resized = Image.fromarray(img.pixels).resize((new_w, new_h), Image.BILINEAR)
    return img._replace_pixels(np.asarray(resized))


def crop(img: Raster, region: PixelBBox) -> Raster:
    """Copy the region verbatim into a new raster."""
    validate_bbox(region, img.width, img.height)
    return img._replace_pixels(
        img.pixels[region.y_min : region.y_max, region.x_min : region.x_max]
    )


def rotate_fixed(img: Raster, angle: int) -> Raster:
    """Lossless clockwise rotation by 90, 180, or 270 degrees."""
    if angle == 90:
        rotated = np.rot90(img.pixels, k=-1)
    elif angle == 180:
        rotated = np.rot90(img.pixels, k=2)
    elif angle == 270:
        rotated = np.rot90(img.pixels, k=1)
    else:
        raise InvalidAngle(f"fixed rotation angle must be 90/180/270, got {angle}")
    return img._replace_pixels(np.ascontiguousarray(rotated))


def rotate_arbitrary(img: Raster, degrees: float, fill: tuple[int, int, int] = (0, 0, 0)) -> Raster:
    """Rotate about the image center, keeping the input canvas size.

    Positive angles rotate clockwise (matching rotate_fixed). Bilinear
    sampling; destination pixels whose source falls outside the frame
    take the fill color.
    """
    if abs(degrees) > 45.0:
        raise ValueError("rotation magnitude must be <= 45 degrees")
    if degrees == 0.0:
        return img
    h, w = img.height, img.width
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0

    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dx, dy = xs - cx, ys - cy
    # Inverse of the clockwise content rotation: sample counter-clockwise.
    sx = cos_t * dx + sin_t * dy + cx
    sy = -sin_t * dx + cos_t * dy + cy

    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(sx, 0, w - 1) - x0
    fy = np.clip(sy, 0, h - 1) - y0

    src = img.pixels.astype(np.float64)
    out = np.empty((h, w, 3), dtype=np.float64)
    for ch in range(3):
        plane = src[:, :, ch]
        top = plane[y0, x0] * (1 - fx) + plane[y0, x1] * fx
        bottom = plane[y1, x0] * (1 - fx) + plane[y1, x1] * fx
        out[:, :, ch] = top * (1 - fy) + bottom * fy

    result = _clamp_u8(_round_half_up(out))
    result[~inside] = np.asarray(fill, dtype=np.uint8)
    return img._replace_pixels(result)


# ---------------------------------------------------------------------------
# Photometry


def adjust_brightness_contrast(img: Raster, brightness: float, contrast: float) -> Raster:
    """Per-sample v' = clamp((v*(1+brightness) - 128)*(1+contrast) + 128).

    Brightness is applied multiplicatively first, then contrast about the
    128 pivot; the result is rounded half-up and clamped to [0, 255].
    """
    if abs(brightness) >= 1.0 or abs(contrast) >= 1.0:
        raise ValueError("brightness and contrast magnitudes must be < 1")
    v = img.pixels.astype(np.float64)
    out = (v * (1.0 + brightness) - 128.0) * (1.0 + contrast) + 128.0
    return img._replace_pixels(_clamp_u8(_round_half_up(out)))


def add_gaussian_noise(img: Raster, sigma: float, seed: int) -> Raster:
    """Add zero-mean Gaussian noise from a seeded generator."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return img
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=img.pixels.shape)
    out = img.pixels.astype(np.float64) + noise
    return img._replace_pixels(_clamp_u8(_round_half_up(out)))


def _gaussian_kernel(radius: float) -> np.ndarray:
    # Taps truncated at 3*radius from center, normalized to sum 1.
    half = max(1, int(math.floor(3.0 * radius + 1e-9)))
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * radius * radius))
    return kernel / kernel.sum()


def gaussian_blur(img: Raster, radius: float) -> np.ndarray:
    """Separable Gaussian blur with edge-replicate padding; float64 output."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    kernel = _gaussian_kernel(radius)
    half = (len(kernel) - 1) // 2
    src = img.pixels.astype(np.float64)

    padded = np.pad(src, ((0, 0), (half, half), (0, 0)), mode="edge")
    horizontal = np.zeros_like(src)
    for i, weight in enumerate(kernel):
        horizontal += weight * padded[:, i : i + src.shape[1], :]

    padded = np.pad(horizontal, ((half, half), (0, 0), (0, 0)), mode="edge")
    blurred = np.zeros_like(src)
    for i, weight in enumerate(kernel):
        blurred += weight * padded[i : i + src.shape[0], :, :]
    return blurred


def unsharp_mask(img: Raster, radius: float, amount: float) -> Raster:
    """Edge enhancement: v' = clamp(v + amount * (v - gaussian_blur(v)))."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    if amount < 0:
        raise ValueError("amount must be >= 0")
    v = img.pixels.astype(np.float64)
    out = v + amount * (v - gaussian_blur(img, radius))
    return img._replace_pixels(_clamp_u8(_round_half_up(out)))


# ---------------------------------------------------------------------------
# Transform dispatch


def apply_transform(img: Raster, t: Transform, fill: tuple[int, int, int] = (0, 0, 0)) -> Raster:
    """Apply one descriptor-recorded transform to a raster."""
    if t.kind == "rotate90":
        return rotate_fixed(img, 90)
    if t.kind == "rotate180":
        return rotate_fixed(img, 180)
    if t.kind == "rotate270":
        return rotate_fixed(img, 270)
    if t.kind == "rotate_random":
        return rotate_arbitrary(img, t.param("angle"), fill)
    if t.kind == "brightness":
        return adjust_brightness_contrast(img, t.param("delta"), 0.0)
    if t.kind == "contrast":
        return adjust_brightness_contrast(img, 0.0, t.param("delta"))
    if t.kind == "noise":
        return add_gaussian_noise(img, t.param("sigma"), int(t.param("seed")))
    if t.kind == "unsharp":
        return unsharp_mask(img, t.param("radius"), t.param("amount"))
    raise ValueError(f"unknown transform kind {t.kind!r}")
