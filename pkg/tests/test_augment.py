"""Augmentation: box transforms, planning, and dataset expansion."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surgscan.core import (
    AnnotatedImage,
    DefectClass,
    InstrumentClass,
    NormalizedBBox,
    Original,
    PixelBBox,
    Transform,
)
from surgscan.dataset import (
    DROPPED,
    DatasetManifest,
    Dropped,
    Split,
    augment_dataset,
    from_normalized,
    to_normalized,
    transform_bbox,
)
from surgscan.dataset.augment import derived_seed, plan_transforms
from surgscan.imaging import AugmentParams, Raster, decode_image, encode_png, rotate_arbitrary

REF = NormalizedBBox(2, 0.375, 0.5, 0.25, 0.5)


class TestFixedRotationBoxes:
    def test_180_reflection(self):
        out = transform_bbox(REF, Transform.rotate_fixed(180))
        assert out == NormalizedBBox(2, 0.625, 0.5, 0.25, 0.5)

    def test_90_clockwise(self):
        out = transform_bbox(REF, Transform.rotate_fixed(90))
        assert out == NormalizedBBox(2, 0.5, 0.375, 0.5, 0.25)

    def test_270_equals_90_thrice(self):
        once = transform_bbox(REF, Transform.rotate_fixed(270))
        thrice = REF
        for _ in range(3):
            thrice = transform_bbox(thrice, Transform.rotate_fixed(90))
        assert once.cx == pytest.approx(thrice.cx)
        assert once.cy == pytest.approx(thrice.cy)
        assert (once.w, once.h) == (thrice.w, thrice.h)

    def test_90_four_times_identity(self):
        box = REF
        for _ in range(4):
            box = transform_bbox(box, Transform.rotate_fixed(90))
        assert box.cx == pytest.approx(REF.cx)
        assert box.cy == pytest.approx(REF.cy)
        assert box.w == pytest.approx(REF.w)
        assert box.h == pytest.approx(REF.h)

    def test_pixel_space_cross_check_180(self):
        # Map the reference box to pixels, reflect the pixel corners
        # directly, and compare with the normalized-space route.
        width, height = 320, 240
        box = PixelBBox(40, 30, 120, 90)
        n = to_normalized(box, 0, width, height)
        moved = transform_bbox(n, Transform.rotate_fixed(180))
        pixel = from_normalized(moved, width, height)
        assert (pixel.x_min, pixel.y_min) == (width - box.x_max, height - box.y_max)
        assert (pixel.x_max, pixel.y_max) == (width - box.x_min, height - box.y_min)

    def test_pixel_space_cross_check_90(self):
        # 90 cw sends (x, y) to (H - 1 - y, x) per pixel; for half-open
        # boxes the new extent is x' in [H - y_max, H - y_min).
        width, height = 320, 240
        box = PixelBBox(40, 30, 120, 90)
        n = to_normalized(box, 0, width, height)
        moved = transform_bbox(n, Transform.rotate_fixed(90))
        pixel = from_normalized(moved, height, width)
        assert (pixel.x_min, pixel.x_max) == (height - box.y_max, height - box.y_min)
        assert (pixel.y_min, pixel.y_max) == (box.x_min, box.x_max)


class TestPhotometricBoxes:
    @pytest.mark.parametrize(
        "t",
        [
            Transform.brightness(0.2),
            Transform.contrast(-0.1),
            Transform.noise(10.0, 7),
            Transform.unsharp(2.0, 1.0),
        ],
    )
    def test_geometry_untouched(self, t):
        assert transform_bbox(REF, t) == REF


class TestArbitraryRotationBoxes:
    def test_zero_angle_identity(self):
        out = transform_bbox(REF, Transform.rotate_random(0.0, 1.0))
        assert out.cx == pytest.approx(REF.cx)
        assert out.cy == pytest.approx(REF.cy)
        assert out.w == pytest.approx(REF.w)
        assert out.h == pytest.approx(REF.h)

    def test_centered_box_hull_growth(self):
        # A square box centered on the pivot grows to w*(cos+sin) per side.
        box = NormalizedBBox(0, 0.5, 0.5, 0.2, 0.2)
        angle = 30.0
        out = transform_bbox(box, Transform.rotate_random(angle, 1.0))
        rad = math.radians(angle)
        expected = 0.2 * (math.cos(rad) + math.sin(rad))
        assert out.w == pytest.approx(expected, abs=1e-12)
        assert out.h == pytest.approx(expected, abs=1e-12)

    def test_corner_box_dropped_at_45(self):
        box = NormalizedBBox(0, 0.05, 0.05, 0.1, 0.1)
        assert isinstance(transform_bbox(box, Transform.rotate_random(45.0, 1.0)), Dropped)

    def test_mostly_visible_box_kept(self):
        box = NormalizedBBox(0, 0.3, 0.3, 0.2, 0.2)
        out = transform_bbox(box, Transform.rotate_random(20.0, 1.0))
        assert isinstance(out, NormalizedBBox)

    def test_independent_pixel_corner_oracle(self):
        # Rotate the box corners directly in pixel coordinates about the
        # frame center and compare hulls; this avoids the aspect-corrected
        # normalized route entirely.
        width, height = 640, 360
        aspect = width / height
        box = NormalizedBBox(1, 0.4, 0.55, 0.2, 0.3)
        degrees = 17.0
        out = transform_bbox(box, Transform.rotate_random(degrees, aspect))

        rad = math.radians(degrees)
        c, s = math.cos(rad), math.sin(rad)
        px_cx, px_cy = box.cx * width, box.cy * height
        half_w, half_h = box.w * width / 2, box.h * height / 2
        xs, ys = [], []
        for ex, ey in (
            (px_cx - half_w, px_cy - half_h),
            (px_cx + half_w, px_cy - half_h),
            (px_cx - half_w, px_cy + half_h),
            (px_cx + half_w, px_cy + half_h),
        ):
            dx, dy = ex - width / 2, ey - height / 2
            xs.append(width / 2 + c * dx - s * dy)
            ys.append(height / 2 + s * dx + c * dy)
        x0, x1 = max(min(xs), 0) / width, min(max(xs), width) / width
        y0, y1 = max(min(ys), 0) / height, min(max(ys), height) / height
        assert out.cx == pytest.approx((x0 + x1) / 2, abs=1e-9)
        assert out.cy == pytest.approx((y0 + y1) / 2, abs=1e-9)
        assert out.w == pytest.approx(x1 - x0, abs=1e-9)
        assert out.h == pytest.approx(y1 - y0, abs=1e-9)

    def test_marker_rectangle_pixel_oracle(self, tmp_path):
        # Render a red rectangle, rotate the raster, recover its bounding
        # box from the pixels, and compare against the geometric route.
        width, height = 200, 200
        arr = np.zeros((height, width, 3), dtype=np.uint8)
        arr[80:120, 50:100, 0] = 255
        img = Raster(arr)
        degrees = 15.0
        rotated = rotate_arbitrary(img, degrees)
        mask = rotated.pixels[:, :, 0] > 128
        ys, xs = np.nonzero(mask)

        n = to_normalized(PixelBBox(50, 80, 100, 120), 0, width, height)
        moved = transform_bbox(n, Transform.rotate_random(degrees, width / height))
        predicted = from_normalized(moved, width, height)
        assert abs(xs.min() - predicted.x_min) <= 2
        assert abs(ys.min() - predicted.y_min) <= 2
        assert abs(xs.max() + 1 - predicted.x_max) <= 2
        assert abs(ys.max() + 1 - predicted.y_max) <= 2


class TestDerivedSeed:
    def test_deterministic(self):
        assert derived_seed(0, "img-1", "noise") == derived_seed(0, "img-1", "noise")

    def test_varies_by_component(self):
        base = derived_seed(0, "img-1", "noise")
        assert derived_seed(1, "img-1", "noise") != base
        assert derived_seed(0, "img-2", "noise") != base
        assert derived_seed(0, "img-1", "brightness") != base


class TestPlanTransforms:
    def make_entry(self, image_id="img-1"):
        return AnnotatedImage(
            id=image_id,
            path=Path("/img.png"),
            width=100,
            height=80,
            instrument=InstrumentClass.Scalpel,
            defects=(),
            provenance=Original(),
        )

    def test_default_plan_has_eight_transforms(self):
        plan = plan_transforms(self.make_entry(), AugmentParams())
        assert [t.slug for t in plan] == [
            "rot90",
            "rot180",
            "rot270",
            "rotrnd",
            "bright",
            "contrast",
            "noise",
            "unsharp",
        ]

    def test_magnitudes_within_configured_bounds(self):
        plan = {t.kind: t for t in plan_transforms(self.make_entry(), AugmentParams())}
        assert abs(plan["rotate_random"].param("angle")) <= 20.0
        assert abs(plan["brightness"].param("delta")) <= 0.20
        assert abs(plan["contrast"].param("delta")) <= 0.20
        assert plan["rotate_random"].param("aspect") == pytest.approx(100 / 80)

    def test_disabled_transforms_omitted(self):
        params = AugmentParams(
            fixed_rotations=(180,),
            random_rotation_range=0.0,
            brightness_delta=0.0,
            contrast_delta=0.0,
            noise_sigma=0.0,
            unsharp_amount=0.0,
        )
        plan = plan_transforms(self.make_entry(), params)
        assert [t.slug for t in plan] == ["rot180"]

    def test_plan_depends_on_image_id_not_order(self):
        a = plan_transforms(self.make_entry("one"), AugmentParams(seed=5))
        b = plan_transforms(self.make_entry("two"), AugmentParams(seed=5))
        again = plan_transforms(self.make_entry("one"), AugmentParams(seed=5))
        assert [t.to_json() for t in a] == [t.to_json() for t in again]
        drawn = {"rotate_random", "brightness", "contrast", "noise"}
        for ta, tb in zip(a, b):
            if ta.kind in drawn:
                assert ta.params != tb.params

    def test_noise_seed_fits_generator_range(self):
        plan = {t.kind: t for t in plan_transforms(self.make_entry(), AugmentParams())}
        seed = plan["noise"].param("seed")
        assert seed == int(seed)
        assert 0 <= int(seed) < 2**32


def seeded_raster(width: int, height: int, seed: int) -> Raster:
    rng = np.random.default_rng(seed)
    return Raster(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


def corpus(tmp_path: Path, count: int = 2) -> DatasetManifest:
    entries = []
    for j in range(count):
        image_id = f"scalpel-def-{j:03d}"
        path = tmp_path / f"{image_id}.png"
        encode_png(seeded_raster(64, 48, seed=j), path)
        entries.append(
            AnnotatedImage(
                id=image_id,
                path=path,
                width=64,
                height=48,
                instrument=InstrumentClass.Scalpel,
                defects=((DefectClass.Crack, PixelBBox(16, 12, 48, 36)),),
                provenance=Original(),
            )
        )
    return DatasetManifest(entries=entries)


class TestAugmentDataset:
    def test_counting_three_rotations(self, tmp_path):
        manifest = corpus(tmp_path, count=1)
        params = AugmentParams(
            fixed_rotations=(90, 180, 270),
            random_rotation_range=0.0,
            brightness_delta=0.0,
            contrast_delta=0.0,
            noise_sigma=0.0,
            unsharp_amount=0.0,
        )
        out = augment_dataset(manifest, params, out_dir=tmp_path / "aug")
        assert len(out.entries) == 4
        slugs = sorted(e.id.split("__aug_")[1] for e in out.entries if e.is_augmented)
        assert slugs == ["rot180", "rot270", "rot90"]

    def test_full_default_expansion_count(self, tmp_path):
        manifest = corpus(tmp_path, count=2)
        out = augment_dataset(manifest, AugmentParams(), out_dir=tmp_path / "aug")
        assert len(out.entries) == 2 * (1 + 8)

    def test_derivative_files_exist_with_swapped_dims(self, tmp_path):
        manifest = corpus(tmp_path, count=1)
        out = augment_dataset(manifest, AugmentParams(), out_dir=tmp_path / "aug")
        for e in out.entries:
            assert e.path.exists()
            img = decode_image(e.path)
            assert (img.width, img.height) == (e.width, e.height)
        rot90 = out.get("scalpel-def-000__aug_rot90")
        assert (rot90.width, rot90.height) == (48, 64)

    def test_derivative_box_reflected_at_180(self, tmp_path):
        manifest = corpus(tmp_path, count=1)
        out = augment_dataset(
            manifest,
            AugmentParams(
                fixed_rotations=(180,),
                random_rotation_range=0.0,
                brightness_delta=0.0,
                contrast_delta=0.0,
                noise_sigma=0.0,
                unsharp_amount=0.0,
            ),
            out_dir=tmp_path / "aug",
        )
        derived = out.get("scalpel-def-000__aug_rot180")
        (defect, box), = derived.defects
        assert defect is DefectClass.Crack
        assert (box.x_min, box.y_min, box.x_max, box.y_max) == (64 - 48, 48 - 36, 64 - 16, 48 - 12)

    def test_deterministic_given_seed(self, tmp_path):
        out1 = augment_dataset(corpus(tmp_path), AugmentParams(seed=9), out_dir=tmp_path / "a1")
        out2 = augment_dataset(corpus(tmp_path), AugmentParams(seed=9), out_dir=tmp_path / "a2")
        strip = lambda m: m.to_jsonl().replace("/a1/", "/./").replace("/a2/", "/./")
        assert strip(out1) == strip(out2)
        for e1 in out1.entries:
            if e1.is_augmented:
                e2 = out2.get(e1.id)
                assert decode_image(e1.path) == decode_image(e2.path)

    def test_val_entries_not_expanded(self, tmp_path):
        manifest = corpus(tmp_path, count=2)
        manifest.split = {"scalpel-def-000": Split.TRAIN, "scalpel-def-001": Split.VAL}
        out = augment_dataset(manifest, AugmentParams(), out_dir=tmp_path / "aug")
        parents = {e.provenance.parent_id for e in out.entries if e.is_augmented}
        assert parents == {"scalpel-def-000"}
        assert all(out.split[e.id] is Split.TRAIN for e in out.entries if e.is_augmented)

    def test_unsplit_manifest_expands_everything(self, tmp_path):
        out = augment_dataset(corpus(tmp_path, count=2), AugmentParams(), out_dir=tmp_path / "aug")
        parents = {e.provenance.parent_id for e in out.entries if e.is_augmented}
        assert parents == {"scalpel-def-000", "scalpel-def-001"}

    def test_refuses_double_expansion(self, tmp_path):
        out = augment_dataset(corpus(tmp_path, count=1), AugmentParams(), out_dir=tmp_path / "aug")
        with pytest.raises(ValueError, match="refusing"):
            augment_dataset(out, AugmentParams(), out_dir=tmp_path / "aug2")

    def test_single_worker_matches_pool(self, tmp_path):
        pooled = augment_dataset(
            corpus(tmp_path), AugmentParams(seed=3), out_dir=tmp_path / "p", workers=4
        )
        serial = augment_dataset(
            corpus(tmp_path), AugmentParams(seed=3), out_dir=tmp_path / "s", workers=1
        )
        strip = lambda m: m.to_jsonl().replace("/p/", "/./").replace("/s/", "/./")
        assert strip(pooled) == strip(serial)


@settings(max_examples=80, deadline=None)
@given(
    cx=st.floats(min_value=0.05, max_value=0.95),
    cy=st.floats(min_value=0.05, max_value=0.95),
    data=st.data(),
)
def test_fixed_rotation_box_composition_property(cx, cy, data):
    w = data.draw(st.floats(min_value=0.01, max_value=2 * min(cx, 1 - cx)))
    h = data.draw(st.floats(min_value=0.01, max_value=2 * min(cy, 1 - cy)))
    box = NormalizedBBox(0, cx, cy, w, h)
    out = box
    for _ in range(4):
        out = transform_bbox(out, Transform.rotate_fixed(90))
    assert out.cx == pytest.approx(box.cx, abs=1e-12)
    assert out.cy == pytest.approx(box.cy, abs=1e-12)
    assert out.w == pytest.approx(box.w, abs=1e-12)
    assert out.h == pytest.approx(box.h, abs=1e-12)
