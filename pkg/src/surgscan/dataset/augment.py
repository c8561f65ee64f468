"""Augmentation orchestration: expand training originals into derivatives.

Every derivative records the exact transform that produced it, including
drawn magnitudes, so the whole expansion is reproducible from the manifest
and one seed.
"""

from __future__ import annotations

import hashlib
import math
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from surgscan.core import (
    AnnotatedImage,
    Augmented,
    DefectClass,
    DegenerateBox,
    NormalizedBBox,
    OutOfBounds,
    Transform,
    validate_bbox,
)
from surgscan.dataset.labels import IoFailure, from_normalized, to_normalized
from surgscan.dataset.manifest import DatasetManifest, Split
from surgscan.imaging import AugmentParams, apply_transform, decode_image, encode_png


@dataclass(frozen=True)
class Dropped:
    """Sentinel: a transformed box kept too little visible area to survive."""


DROPPED = Dropped()

# A rotated box is discarded once less than this share of it stays in frame.
MIN_VISIBLE_FRACTION = 0.25


def derived_seed(seed: int, image_id: str, kind: str) -> int:
    """Stable per-image, per-transform seed (first 8 bytes of a sha256)."""
    digest = hashlib.sha256(f"{seed}:{image_id}:{kind}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# Box geometry


def _rotated_hull(
    n: NormalizedBBox, degrees: float, aspect: float, min_visible: float
) -> Union[NormalizedBBox, Dropped]:
    # Work in aspect-corrected coordinates (x scaled by width/height) so the
    # rotation angle is geometrically true for non-square frames.
    rad = math.radians(degrees)
    c, s = math.cos(rad), math.sin(rad)
    pivot_x, pivot_y = aspect / 2.0, 0.5
    half_w, half_h = n.w * aspect / 2.0, n.h / 2.0
    center_x, center_y = n.cx * aspect, n.cy
    xs: list[float] = []
    ys: list[float] = []
    for ex, ey in (
        (center_x - half_w, center_y - half_h),
        (center_x + half_w, center_y - half_h),
        (center_x - half_w, center_y + half_h),
        (center_x + half_w, center_y + half_h),
    ):
        dx, dy = ex - pivot_x, ey - pivot_y
        xs.append(pivot_x + c * dx - s * dy)
        ys.append(pivot_y + s * dx + c * dy)
    x0, x1 = min(xs) / aspect, max(xs) / aspect
    y0, y1 = min(ys), max(ys)
    x0, x1 = max(x0, 0.0), min(x1, 1.0)
    y0, y1 = max(y0, 0.0), min(y1, 1.0)
    if x1 <= x0 or y1 <= y0:
        return DROPPED
    if (x1 - x0) * (y1 - y0) < min_visible * (n.w * n.h):
        return DROPPED
    return NormalizedBBox(n.class_id, (x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)


def transform_bbox(
    n: NormalizedBBox, t: Transform, min_visible: float = MIN_VISIBLE_FRACTION
) -> Union[NormalizedBBox, Dropped]:
    """Map a normalized box through one transform.

    Fixed rotations permute center/size exactly; photometric transforms leave
    geometry alone; arbitrary rotation takes the axis-aligned hull of the
    rotated corners and drops boxes that mostly leave the frame.
    """
    if t.kind == "rotate90":
        return NormalizedBBox(n.class_id, 1.0 - n.cy, n.cx, n.h, n.w)
    if t.kind == "rotate180":
        return NormalizedBBox(n.class_id, 1.0 - n.cx, 1.0 - n.cy, n.w, n.h)
    if t.kind == "rotate270":
        return NormalizedBBox(n.class_id, n.cy, 1.0 - n.cx, n.h, n.w)
    if t.kind == "rotate_random":
        return _rotated_hull(n, t.param("angle"), t.param("aspect"), min_visible)
    if t.kind in ("brightness", "contrast", "noise", "unsharp"):
        return n
    raise ValueError(f"unknown transform kind {t.kind!r}")


# ---------------------------------------------------------------------------
# Transform planning


def plan_transforms(entry: AnnotatedImage, params: AugmentParams) -> list[Transform]:
    """One descriptor per enabled transform, magnitudes drawn deterministically.

    Drawn values (random rotation angle, brightness and contrast shifts, the
    noise stream seed) come from per-image seeds so the plan is independent
    of processing order.
    """
    transforms = [Transform.rotate_fixed(angle) for angle in params.fixed_rotations]
    if params.random_rotation_range > 0:
        rng = random.Random(derived_seed(params.seed, entry.id, "rotate_random"))
        angle = rng.uniform(-params.random_rotation_range, params.random_rotation_range)
        transforms.append(Transform.rotate_random(angle=angle, aspect=entry.width / entry.height))
    if params.brightness_delta > 0:
        rng = random.Random(derived_seed(params.seed, entry.id, "brightness"))
        transforms.append(
            Transform.brightness(rng.uniform(-params.brightness_delta, params.brightness_delta))
        )
    if params.contrast_delta > 0:
        rng = random.Random(derived_seed(params.seed, entry.id, "contrast"))
        transforms.append(
            Transform.contrast(rng.uniform(-params.contrast_delta, params.contrast_delta))
        )
    if params.noise_sigma > 0:
        noise_seed = derived_seed(params.seed, entry.id, "noise") % (2**32)
        transforms.append(Transform.noise(params.noise_sigma, noise_seed))
    if params.unsharp_amount > 0:
        transforms.append(Transform.unsharp(params.unsharp_radius, params.unsharp_amount))
    return transforms


def _derived_dims(parent: AnnotatedImage, t: Transform) -> tuple[int, int]:
    if t.kind in ("rotate90", "rotate270"):
        return parent.height, parent.width
    return parent.width, parent.height


def _derived_boxes(
    parent: AnnotatedImage, t: Transform, class_map: dict[str, int]
) -> tuple[tuple[DefectClass, "object"], ...]:
    width, height = _derived_dims(parent, t)
    kept = []
    for defect, box in parent.defects:
        normalized = to_normalized(box, class_map[defect.value], parent.width, parent.height)
        moved = transform_bbox(normalized, t)
        if isinstance(moved, Dropped):
            continue
        pixel = from_normalized(moved, width, height)
        try:
            validate_bbox(pixel, width, height)
        except (DegenerateBox, OutOfBounds):
            # Rounding at the frame edge can collapse a sliver box; treat it
            # like a drop rather than emit an invalid annotation.
            continue
        kept.append((defect, pixel))
    return tuple(kept)


def derivative_entry(
    parent: AnnotatedImage,
    t: Transform,
    class_map: dict[str, int],
    out_dir: Optional[Path] = None,
) -> AnnotatedImage:
    """Render one derivative image to disk and describe it."""
    image_id = f"{parent.id}__aug_{t.slug}"
    directory = Path(out_dir) if out_dir is not None else parent.path.parent
    path = directory / f"{image_id}.png"
    width, height = _derived_dims(parent, t)
    try:
        raster = decode_image(parent.path)
        raster = apply_transform(raster, t)
        encode_png(raster, path)
    except OSError as exc:
        raise IoFailure(f"cannot render derivative {image_id}: {exc}") from exc
    if (raster.width, raster.height) != (width, height):
        raise RuntimeError(
            f"derivative {image_id} has size {raster.width}x{raster.height}, "
            f"expected {width}x{height}"
        )
    return AnnotatedImage(
        id=image_id,
        path=path,
        width=width,
        height=height,
        instrument=parent.instrument,
        defects=_derived_boxes(parent, t, class_map),
        provenance=Augmented(parent_id=parent.id, transform=t),
    )


def augment_dataset(
    manifest: DatasetManifest,
    params: AugmentParams,
    out_dir: Optional[Path] = None,
    workers: Optional[int] = None,
) -> DatasetManifest:
    """Append one derivative per enabled transform for every training original.

    Derivatives land next to their parent image unless out_dir is given, are
    always PNG (lossless, so photometric magnitudes survive exactly), and are
    assigned to the training split. Validation images are never expanded, so
    the validation set stays purely original. A manifest with no split yet is
    treated as all-train, which keeps the expansion usable standalone.
    """
    already = [e.id for e in manifest.entries if e.is_augmented]
    if already:
        raise ValueError(f"manifest already contains derivatives (e.g. {already[0]}); refusing to re-expand")

    if manifest.split:
        candidates = [e for e in manifest.entries if manifest.split.get(e.id) is Split.TRAIN]
    else:
        candidates = list(manifest.entries)

    tasks = [
        (parent, transform)
        for parent in candidates
        for transform in plan_transforms(parent, params)
    ]

    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)

    max_workers = workers or min(8, os.cpu_count() or 1)
    if max_workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            derivatives = list(
                pool.map(
                    lambda task: derivative_entry(task[0], task[1], manifest.class_map, out_dir),
                    tasks,
                )
            )
    else:
        derivatives = [
            derivative_entry(parent, transform, manifest.class_map, out_dir)
            for parent, transform in tasks
        ]

    split = dict(manifest.split)
    for entry in derivatives:
        split[entry.id] = Split.TRAIN
    result = DatasetManifest(
        entries=list(manifest.entries) + derivatives,
        class_map=dict(manifest.class_map),
        split=split,
    )
    result.validate()
    return result
