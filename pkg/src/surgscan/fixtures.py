"""Synthetic fixture generation.

The real capture corpus is proprietary, so every test and demo runs on small
generated images instead. Each fixture embeds its ground truth twice: as a
JSON payload in the PNG text metadata (survives re-encoding and uploads) and
as a sidecar .json next to the file (for tools that only see paths). The
reference stub backends read the embedded payload.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from surgscan.core import (
    AnnotatedImage,
    DefectClass,
    InstrumentClass,
    PixelBBox,
)
from surgscan.imaging import Raster, decode_image, encode_png
from surgscan.inference import TAGS_KEY

BOXED_DEFECTS = tuple(d for d in DefectClass if d is not DefectClass.NonDefective)


def instrument_slug(instrument: InstrumentClass) -> str:
    return instrument.value.lower().replace(" ", "-")


def fixture_tags(
    instrument: InstrumentClass,
    defects: Sequence[tuple[DefectClass, float]] = (),
    instrument_confidence: float = 1.0,
) -> dict:
    return {
        "instrument": instrument.value,
        "instrument_confidence": instrument_confidence,
        "defects": [[d.value, c] for d, c in defects],
    }


def _defect_box(width: int, height: int) -> PixelBBox:
    # Centered box covering a quarter of each dimension; deterministic so
    # annotation oracles can be computed by hand.
    return PixelBBox(
        x_min=width // 4,
        y_min=height // 4,
        x_max=width // 4 + max(1, width // 4),
        y_max=height // 4 + max(1, height // 4),
    )


def make_fixture_raster(
    instrument: InstrumentClass,
    defects: Sequence[tuple[DefectClass, float]] = (),
    size: tuple[int, int] = (96, 96),
    seed: int = 0,
    instrument_confidence: float = 1.0,
) -> Raster:
    """Deterministic little test card with ground truth embedded as metadata."""
    width, height = size
    rng = np.random.default_rng(seed)
    instrument_index = list(InstrumentClass).index(instrument)
    base = 60 + 12 * (instrument_index % 8)
    pixels = np.full((height, width, 3), base, dtype=np.uint8)
    ramp = np.linspace(0, 80, height, dtype=np.uint8)[:, None]
    pixels[:, :, 0] = np.clip(pixels[:, :, 0].astype(np.int32) + ramp, 0, 255).astype(np.uint8)
    speckle = rng.integers(-10, 11, size=(height, width, 3))
    pixels = np.clip(pixels.astype(np.int32) + speckle, 0, 255).astype(np.uint8)
    if defects:
        box = _defect_box(width, height)
        pixels[box.y_min : box.y_max, box.x_min : box.x_max] = (150, 40, 30)
    tags = fixture_tags(instrument, defects, instrument_confidence)
    return Raster(pixels, meta=((TAGS_KEY, json.dumps(tags, sort_keys=True)),))


def write_fixture(
    directory: Union[Path, str],
    stem: str,
    instrument: InstrumentClass,
    defects: Sequence[tuple[DefectClass, float]] = (),
    size: tuple[int, int] = (96, 96),
    seed: int = 0,
    instrument_confidence: float = 1.0,
) -> Path:
    """Write one fixture PNG plus its sidecar ground-truth file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    raster = make_fixture_raster(instrument, defects, size, seed, instrument_confidence)
    path = directory / f"{stem}.png"
    encode_png(raster, path)
    sidecar = directory / f"{stem}.json"
    sidecar.write_text(
        json.dumps(fixture_tags(instrument, defects, instrument_confidence), sort_keys=True) + "\n"
    )
    return path


def load_fixture(path: Union[Path, str]) -> Raster:
    """Decode an image, pulling ground truth from the sidecar if the PNG
    itself carries none (e.g. after conversion through a tool that strips
    text metadata)."""
    path = Path(path)
    img = decode_image(path)
    if img.tag(TAGS_KEY) is None:
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            img = img.with_meta(**{TAGS_KEY: sidecar.read_text().strip()})
    return img


# ---------------------------------------------------------------------------
# Annotation XML (the conversion source format)


def write_annotation_xml(
    path: Union[Path, str],
    filename: str,
    width: int,
    height: int,
    instrument: InstrumentClass,
    objects: Sequence[tuple[DefectClass, PixelBBox]] = (),
) -> Path:
    """Per-image annotation file consumed by the convert command.

    Schema: <annotation> with <filename>, <size><width/height>,
    <instrument>, and one <object><name/bndbox(xmin..ymax)> per box.
    Box coordinates are half-open pixel bounds (xmax/ymax exclusive).
    """
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = filename
    size_el = ET.SubElement(root, "size")
    ET.SubElement(size_el, "width").text = str(width)
    ET.SubElement(size_el, "height").text = str(height)
    ET.SubElement(root, "instrument").text = instrument.value
    for defect, box in objects:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = defect.value
        bnd = ET.SubElement(obj, "bndbox")
        ET.SubElement(bnd, "xmin").text = str(box.x_min)
        ET.SubElement(bnd, "ymin").text = str(box.y_min)
        ET.SubElement(bnd, "xmax").text = str(box.x_max)
        ET.SubElement(bnd, "ymax").text = str(box.y_max)
    tree = ET.ElementTree(root)
    ET.indent(tree)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tree.write(path, encoding="unicode")
    path.write_text(path.read_text() + "\n")
    return path


# ---------------------------------------------------------------------------
# Corpus generators


def generate_cascade_fixtures(
    root: Union[Path, str], per_instrument: int = 10, size: tuple[int, int] = (96, 96)
) -> list[Path]:
    """The dispatch-test corpus: every instrument, half the images defective.

    Even indices get one cycling defect class; odd indices are clean.
    """
    root = Path(root)
    paths = []
    for i, instrument in enumerate(InstrumentClass):
        for j in range(per_instrument):
            defects: tuple = ()
            if j % 2 == 0:
                defect = BOXED_DEFECTS[(i + j) % len(BOXED_DEFECTS)]
                defects = ((defect, 1.0),)
            stem = f"{instrument_slug(instrument)}-{j:03d}"
            paths.append(
                write_fixture(root, stem, instrument, defects, size=size, seed=i * 1000 + j)
            )
    return paths


def generate_annotated_corpus(
    root: Union[Path, str],
    per_instrument: int = 4,
    size: tuple[int, int] = (96, 96),
) -> list[AnnotatedImage]:
    """Images plus XML annotations, for exercising conversion end to end.

    Writes root/images/*.png and root/annotations/*.xml; defective images
    (every other one) carry exactly one box.
    """
    root = Path(root)
    width, height = size
    entries = []
    for i, instrument in enumerate(InstrumentClass):
        for j in range(per_instrument):
            stem = f"{instrument_slug(instrument)}-{j:03d}"
            objects: tuple = ()
            tag_defects: tuple = ()
            if j % 2 == 0:
                defect = BOXED_DEFECTS[(i + j) % len(BOXED_DEFECTS)]
                objects = ((defect, _defect_box(width, height)),)
                tag_defects = ((defect, 1.0),)
            path = write_fixture(
                root / "images", stem, instrument, tag_defects, size=size, seed=i * 1000 + j
            )
            write_annotation_xml(
                root / "annotations" / f"{stem}.xml",
                filename=path.name,
                width=width,
                height=height,
                instrument=instrument,
                objects=objects,
            )
            entries.append(
                AnnotatedImage(
                    id=stem,
                    path=path,
                    width=width,
                    height=height,
                    instrument=instrument,
                    defects=objects,
                )
            )
    return entries


def synthetic_manifest_entries(
    per_instrument_defective: int,
    per_instrument_clean: int,
    size: tuple[int, int] = (96, 96),
    path_root: Union[Path, str] = "mem://fixtures",
) -> list[AnnotatedImage]:
    """Manifest entries without backing files, for split arithmetic tests."""
    width, height = size
    entries = []
    for instrument in InstrumentClass:
        slug = instrument_slug(instrument)
        for j in range(per_instrument_defective):
            entries.append(
                AnnotatedImage(
                    id=f"{slug}-def-{j:03d}",
                    path=Path(path_root) / f"{slug}-def-{j:03d}.png",
                    width=width,
                    height=height,
                    instrument=instrument,
                    defects=((BOXED_DEFECTS[j % len(BOXED_DEFECTS)], _defect_box(width, height)),),
                )
            )
        for j in range(per_instrument_clean):
            entries.append(
                AnnotatedImage(
                    id=f"{slug}-cln-{j:03d}",
                    path=Path(path_root) / f"{slug}-cln-{j:03d}.png",
                    width=width,
                    height=height,
                    instrument=instrument,
                )
            )
    return entries
