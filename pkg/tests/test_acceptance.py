"""Acceptance suite: one test per contract criterion, each with a wall-clock
budget. These intentionally re-verify behavior covered in the per-module
suites, using independent oracles throughout."""

from __future__ import annotations

import random
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from surgscan.core import (
    AnnotatedImage,
    DefectClass,
    InstrumentClass,
    PixelBBox,
)
from surgscan.dataset import (
    DatasetManifest,
    Split,
    SplitConfig,
    augment_dataset,
    format_label_line,
    from_normalized,
    parse_label_file,
    stratified_split,
    to_normalized,
)
from surgscan.fixtures import generate_cascade_fixtures, load_fixture
from surgscan.imaging import (
    AugmentParams,
    Raster,
    add_gaussian_noise,
    encode_png,
    png_bytes,
    rotate_fixed,
    unsharp_mask,
)
from surgscan.inference import TAGS_KEY, inspect
from surgscan.metrics import (
    ConfusionMatrix,
    macro_prf1,
    render_comparison,
    roc_auc,
)
from surgscan.service import SeedUser, ServiceConfig, create_app
from surgscan.service.store import Store

from reference_tables import ALL_TABLES

YOLO8 = "YOLOv8"


@contextmanager
def budget(seconds: float):
    start = time.monotonic()
    yield
    elapsed = time.monotonic() - start
    assert elapsed < seconds, f"exceeded {seconds}s budget: took {elapsed:.1f}s"


def test_label_format_golden(tmp_path):
    with budget(1.0):
        golden = to_normalized(PixelBBox(400, 400, 800, 1200), class_id=2, width=1600, height=1600)
        assert format_label_line(golden) == "2 0.375000 0.500000 0.250000 0.500000"

        rng = random.Random(2024)
        lines = []
        boxes = []
        for _ in range(1000):
            width = rng.randint(8, 4000)
            height = rng.randint(8, 4000)
            x_min = rng.randint(0, width - 2)
            y_min = rng.randint(0, height - 2)
            box = PixelBBox(
                x_min,
                y_min,
                rng.randint(x_min + 1, width),
                rng.randint(y_min + 1, height),
            )
            boxes.append((box, width, height))
            lines.append(format_label_line(to_normalized(box, 0, width, height)))

        path = tmp_path / "roundtrip.txt"
        path.write_text("\n".join(lines) + "\n")
        records = parse_label_file(path)
        assert len(records) == 1000
        for record, (box, width, height) in zip(records, boxes):
            back = from_normalized(record, width, height)
            for got, want in (
                (back.x_min, box.x_min),
                (back.y_min, box.y_min),
                (back.x_max, box.x_max),
                (back.y_max, box.y_max),
            ):
                assert abs(got - want) <= 0.5


def test_augmentation_suite():
    with budget(30.0):
        rng = np.random.default_rng(7)
        for _ in range(100):
            h = int(rng.integers(4, 64))
            w = int(rng.integers(4, 64))
            img = Raster(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))
            twice = rotate_fixed(rotate_fixed(img, 180), 180)
            assert np.array_equal(twice.pixels, img.pixels)

        img = Raster(rng.integers(0, 256, size=(33, 57, 3), dtype=np.uint8))
        four = img
        for _ in range(4):
            four = rotate_fixed(four, 90)
        assert np.array_equal(four.pixels, img.pixels)

        flat = Raster(np.full((48, 48, 3), 77, dtype=np.uint8))
        sharpened = unsharp_mask(flat, radius=2.0, amount=1.0)
        assert np.array_equal(sharpened.pixels, flat.pixels)

        base = Raster(np.full((1000, 1000, 3), 128, dtype=np.uint8))
        noisy = add_gaussian_noise(base, sigma=10.0, seed=99).pixels.astype(np.float64)
        assert 127.9 <= noisy.mean() <= 128.1
        assert 9.8 <= noisy.std() <= 10.2


def _split_corpus(root: Path) -> DatasetManifest:
    """11 instruments x (20 defective + 20 clean) tiny real images."""
    entries = []
    rng = np.random.default_rng(0)
    for i, instrument in enumerate(InstrumentClass):
        for j in range(40):
            stem = f"{instrument.name.lower()}-{j:03d}"
            path = root / f"{stem}.png"
            pixels = rng.integers(0, 256, size=(12, 16, 3), dtype=np.uint8)
            encode_png(Raster(pixels), path)
            defects = ()
            if j < 20:
                defects = ((DefectClass.Crack, PixelBBox(4, 3, 12, 9)),)
            entries.append(
                AnnotatedImage(
                    id=stem,
                    path=path,
                    width=16,
                    height=12,
                    instrument=instrument,
                    defects=defects,
                )
            )
    return DatasetManifest(entries=entries)


def test_split_suite(tmp_path):
    with budget(5.0):
        manifest = _split_corpus(tmp_path / "imgs")
        cfg = SplitConfig(train_fraction=0.80, seed=7)
        result = stratified_split(manifest, cfg)

        for instrument in InstrumentClass:
            for defective in (True, False):
                stratum = [
                    e.id
                    for e in result.entries
                    if e.instrument is instrument and e.is_defective == defective
                ]
                assert len(stratum) == 20
                train = sum(1 for image_id in stratum if result.split[image_id] is Split.TRAIN)
                assert train == 16

        again = stratified_split(manifest, cfg)
        assert again.to_jsonl() == result.to_jsonl()

        params = AugmentParams(
            fixed_rotations=(180,),
            random_rotation_range=0.0,
            brightness_delta=0.0,
            contrast_delta=0.0,
            noise_sigma=0.0,
            unsharp_amount=0.0,
            seed=7,
        )
        expanded = augment_dataset(result, params, out_dir=tmp_path / "derived")
        val_ids = {
            image_id for image_id, split in expanded.split.items() if split is Split.VAL
        }
        parents_with_derivatives = set()
        for entry in expanded.entries:
            if entry.is_augmented:
                assert expanded.split[entry.id] is Split.TRAIN
                parents_with_derivatives.add(entry.provenance.parent_id)
        assert parents_with_derivatives.isdisjoint(val_ids)
        assert parents_with_derivatives  # the expansion actually happened


def test_metrics_oracle():
    with budget(30.0):
        rng = np.random.default_rng(123)
        for _ in range(1000):
            k = int(rng.integers(2, 7))
            counts = rng.integers(0, 50, size=(k, k))
            if counts.sum() == 0:
                counts[0, 0] = 1
            names = [f"c{i}" for i in range(k)]
            m = ConfusionMatrix(classes=tuple(names), counts=counts.astype(np.int64))
            precision, recall, f1 = macro_prf1(m)

            precisions, recalls, f1s = [], [], []
            for i in range(k):
                tp = float(counts[i, i])
                fp = float(counts[:, i].sum() - counts[i, i])
                fn = float(counts[i, :].sum() - counts[i, i])
                p = tp / (tp + fp) if tp + fp > 0 else 0.0
                r = tp / (tp + fn) if tp + fn > 0 else 0.0
                f = 2 * p * r / (p + r) if p + r > 0 else 0.0
                precisions.append(p)
                recalls.append(r)
                f1s.append(f)
            assert abs(precision - sum(precisions) / k) < 1e-9
            assert abs(recall - sum(recalls) / k) < 1e-9
            assert abs(f1 - sum(f1s) / k) < 1e-9

        for _ in range(1000):
            n = int(rng.integers(4, 80))
            # Quantized scores force ties through the tie-handling path.
            scores = np.round(rng.random(n), 2)
            positives = rng.random(n) < 0.5
            if positives.all() or not positives.any():
                positives[0] = True
                positives[1] = False
            got = roc_auc(scores.tolist(), positives.tolist())

            pos = scores[positives][:, None]
            neg = scores[~positives][None, :]
            wins = (pos > neg).sum() + 0.5 * (pos == neg).sum()
            want = float(wins) / (pos.size * neg.size)
            assert abs(got - want) < 1e-9


def test_table_reproduction():
    with budget(1.0):
        for title, rows in ALL_TABLES.items():
            for column in range(6):
                values = [row.values[column] for row in rows]
                yolo8_value = next(r for r in rows if r.model_name == YOLO8).values[column]
                assert yolo8_value == max(values)

            rendered = render_comparison(rows, title)
            yolo8_line = next(
                line for line in rendered.splitlines() if line.startswith(YOLO8)
            )
            assert yolo8_line.count("*") == 12


def test_cascade_dispatch(tmp_path, stub_cascade):
    with budget(10.0):
        registry, cfg = stub_cascade
        paths = generate_cascade_fixtures(tmp_path, per_instrument=10)
        assert len(paths) == 110

        import json

        for path in paths:
            img = load_fixture(path)
            tags = json.loads(img.tag(TAGS_KEY))
            result = inspect(img, cfg, registry)

            assert result.instrument.value == tags["instrument"]
            want_defects = [(d, c) for d, c in tags["defects"] if c >= cfg.defect_threshold]
            assert [(d.value, c) for d, c in result.defects] == want_defects
            defective = any(d != "Non-Defective" for d, _ in want_defects)
            assert (result.overall.value == "Defective") == defective

            slug = result.instrument.value.lower().replace(" ", "-")
            assert result.backend_ids == ("stub-instrument", f"stub-defect-{slug}")
            assert cfg.defect_backends[result.instrument] == f"stub-defect-{slug}"


def test_service_contract(tmp_path):
    with budget(60.0):
        from surgscan.fixtures import make_fixture_raster

        users = (
            SeedUser(name="Root", email="root@example.com", password="root-pw", role="Admin"),
            SeedUser(name="Op", email="op@example.com", password="op-pw", role="User"),
        )
        config = ServiceConfig(data_dir=tmp_path / "data", users=users)
        app = create_app(config)
        with TestClient(app) as client:
            # Login: 200 / 401 / 403.
            ok = client.post(
                "/api/login", json={"email": "op@example.com", "password": "op-pw"}
            )
            assert ok.status_code == 200
            token = ok.json()["token"]
            admin_token = client.post(
                "/api/login", json={"email": "root@example.com", "password": "root-pw"}
            ).json()["token"]
            headers = {"Authorization": f"Bearer {token}"}
            admin_headers = {"Authorization": f"Bearer {admin_token}"}

            bad = client.post(
                "/api/login", json={"email": "op@example.com", "password": "wrong"}
            )
            assert bad.status_code == 401

            users_list = client.get("/api/admin/users", headers=admin_headers).json()["users"]
            op_id = next(u["id"] for u in users_list if u["email"] == "op@example.com")
            client.patch(
                f"/api/admin/users/{op_id}", headers=admin_headers, json={"status": "Inactive"}
            )
            blocked = client.post(
                "/api/login", json={"email": "op@example.com", "password": "op-pw"}
            )
            assert blocked.status_code == 403
            client.patch(
                f"/api/admin/users/{op_id}", headers=admin_headers, json={"status": "Active"}
            )

            # Batch lifecycle: create, then 409 on the second open batch.
            batch = client.post("/api/batches", headers=headers)
            assert batch.status_code == 200
            number = batch.json()["batch_number"]
            conflict = client.post("/api/batches", headers=headers)
            assert conflict.status_code == 409
            assert conflict.json()["error"] == "AlreadyAssigned"

            # Upload: 400 on a non-image, 200 on fixtures.
            bad_upload = client.post(
                f"/api/batches/{number}/images",
                headers=headers,
                files={"file": ("junk.png", b"not an image", "image/png")},
            )
            assert bad_upload.status_code == 400
            assert bad_upload.json()["error"] == "BadImage"

            plan = [
                (InstrumentClass.Scalpel, ((DefectClass.Crack, 0.9),)),
                (InstrumentClass.Scalpel, ((DefectClass.Pore, 0.8), (DefectClass.Cut, 0.7))),
                (InstrumentClass.Carver, ()),
                (InstrumentClass.Probe, ()),
                (InstrumentClass.Probe, ((DefectClass.Scratch, 0.95),)),
            ]
            for i, (instrument, defects) in enumerate(plan):
                data = png_bytes(make_fixture_raster(instrument, list(defects), seed=i))
                response = client.post(
                    f"/api/batches/{number}/images",
                    headers=headers,
                    files={"file": (f"img-{i}.png", data, "image/png")},
                )
                assert response.status_code == 200

            stats = client.get(f"/api/batches/{number}/stats", headers=headers).json()

        # Recount straight from storage with a second store handle.
        store = Store(config.database_path, config.images_dir)
        rows = store.batch_images(store.get_batch(number).id)
        inspected = [row["result"] for row in rows if row["result"] is not None]
        defected = sum(1 for result in inspected if result["overall"] == "Defective")
        per_class: dict[str, int] = {}
        for result in inspected:
            for name in {d for d, _ in result["defects"] if d != "Non-Defective"}:
                per_class[name] = per_class.get(name, 0) + 1

        assert stats["total_inspected"] == len(inspected) == 5
        assert stats["defected"] == defected == 3
        assert stats["non_defected"] == len(inspected) - defected == 2
        assert stats["per_defect_class"] == per_class
