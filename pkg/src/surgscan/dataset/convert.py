"""Annotation conversion: per-image XML files into label files + manifest.

Accepted source schema (one file per image):

    <annotation>
      <filename>scalpel-000.png</filename>
      <size><width>96</width><height>96</height></size>
      <instrument>Scalpel</instrument>
      <object>
        <name>Crack</name>
        <bndbox><xmin>24</xmin><ymin>24</ymin><xmax>48</xmax><ymax>48</ymax></bndbox>
      </object>
    </annotation>

Box bounds are half-open pixel coordinates (xmax/ymax exclusive). Instrument
and defect names tolerate case and punctuation variants.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from surgscan.core import (
    AnnotatedImage,
    PixelBBox,
    SurgScanError,
    parse_defect,
    parse_instrument,
)
from surgscan.dataset.labels import to_normalized, write_label_file
from surgscan.dataset.manifest import DatasetManifest, default_class_map


class MalformedAnnotation(SurgScanError):
    pass


def _text(parent: ET.Element, tag_path: str, path: Path) -> str:
    node = parent.find(tag_path)
    if node is None or node.text is None or not node.text.strip():
        raise MalformedAnnotation(f"{path.name}: missing <{tag_path}>")
    return node.text.strip()


def _int(parent: ET.Element, tag_path: str, path: Path) -> int:
    raw = _text(parent, tag_path, path)
    try:
        return int(raw)
    except ValueError:
        raise MalformedAnnotation(f"{path.name}: <{tag_path}> is not an integer: {raw!r}") from None


def parse_annotation_xml(
    path: Union[Path, str], images_dir: Optional[Union[Path, str]] = None
) -> AnnotatedImage:
    """Parse one annotation file; box/vocabulary violations raise per file."""
    path = Path(path)
    try:
        tree = ET.parse(path)
    except ET.ParseError as exc:
        raise MalformedAnnotation(f"{path.name}: not well-formed XML: {exc}") from exc
    root = tree.getroot()
    if root.tag != "annotation":
        raise MalformedAnnotation(f"{path.name}: root element must be <annotation>, got <{root.tag}>")
    filename = _text(root, "filename", path)
    width = _int(root, "size/width", path)
    height = _int(root, "size/height", path)
    try:
        instrument = parse_instrument(_text(root, "instrument", path))
        defects = []
        for obj in root.findall("object"):
            name = parse_defect(_text(obj, "name", path))
            bndbox = obj.find("bndbox")
            if bndbox is None:
                raise MalformedAnnotation(f"{path.name}: <object> without <bndbox>")
            box = PixelBBox(
                x_min=_int(bndbox, "xmin", path),
                y_min=_int(bndbox, "ymin", path),
                x_max=_int(bndbox, "xmax", path),
                y_max=_int(bndbox, "ymax", path),
            )
            defects.append((name, box))
        image_path = Path(images_dir) / filename if images_dir is not None else Path(filename)
        if images_dir is not None and not image_path.is_file():
            raise MalformedAnnotation(f"{path.name}: referenced image {filename} not found")
        return AnnotatedImage(
            id=Path(filename).stem,
            path=image_path,
            width=width,
            height=height,
            instrument=instrument,
            defects=tuple(defects),
        )
    except MalformedAnnotation:
        raise
    except (SurgScanError, ValueError) as exc:
        raise MalformedAnnotation(f"{path.name}: {exc}") from exc


@dataclass
class ConversionResult:
    entries: list[AnnotatedImage] = field(default_factory=list)
    boxes_written: int = 0
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def convert_annotations(
    annotations_dir: Union[Path, str],
    images_dir: Union[Path, str],
    labels_dir: Union[Path, str],
    class_map: Optional[dict[str, int]] = None,
) -> ConversionResult:
    """Convert every .xml under annotations_dir into a label file.

    Files that fail to parse are reported in the result and skipped; valid
    files are still converted, so one bad annotation cannot block a corpus.
    """
    annotations_dir = Path(annotations_dir)
    labels_dir = Path(labels_dir)
    labels_dir.mkdir(parents=True, exist_ok=True)
    class_map = dict(class_map) if class_map else default_class_map()
    result = ConversionResult()
    for xml_path in sorted(annotations_dir.glob("*.xml")):
        try:
            entry = parse_annotation_xml(xml_path, images_dir)
        except MalformedAnnotation as exc:
            result.problems.append(str(exc))
            continue
        records = [
            to_normalized(box, class_map[defect.value], entry.width, entry.height)
            for defect, box in entry.defects
        ]
        write_label_file(records, entry.id, labels_dir)
        result.entries.append(entry)
        result.boxes_written += len(records)
    return result


def manifest_from_entries(entries: list[AnnotatedImage]) -> DatasetManifest:
    manifest = DatasetManifest(entries=list(entries))
    manifest.validate()
    return manifest
