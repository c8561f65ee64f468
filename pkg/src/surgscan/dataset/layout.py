"""Dataset layout on disk: emit the train/val tree and validate it.

Layout under a root directory:

    root/images/{train,val}/<id>.<ext>
    root/labels/{train,val}/<id>.txt
    root/manifest/manifest.jsonl
    root/dataset.yaml
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

from surgscan.dataset.labels import (
    IoFailure,
    MalformedLine,
    OutOfRangeValue,
    parse_label_file,
    to_normalized,
    write_label_file,
)
from surgscan.dataset.manifest import DatasetManifest, Split

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
AUG_STEM_MARKER = "__aug_"


def emit_dataset_config(manifest: DatasetManifest, root: Union[Path, str]) -> Path:
    """Materialize the dataset tree and write its config file.

    Copies every image into images/{split}, writes the matching label file in
    the mirrored labels/{split} path, persists the relocated manifest, and
    writes a key/value config naming the split directories, class count, and
    class names in id order. Output is deterministic, so re-emitting an
    unchanged manifest is byte-identical.
    """
    manifest.validate(require_split=True)
    root = Path(root)
    names = manifest.class_names
    try:
        for split in Split:
            (root / "images" / split.value).mkdir(parents=True, exist_ok=True)
            (root / "labels" / split.value).mkdir(parents=True, exist_ok=True)
        relocated = []
        for entry in sorted(manifest.entries, key=lambda e: e.id):
            split = manifest.split[entry.id]
            suffix = entry.path.suffix.lower()
            if suffix not in IMAGE_SUFFIXES:
                suffix = ".png"
            rel = Path("images") / split.value / f"{entry.id}{suffix}"
            destination = root / rel
            if entry.path.resolve() != destination.resolve():
                shutil.copyfile(entry.path, destination)
            records = [
                to_normalized(box, manifest.class_map[defect.value], entry.width, entry.height)
                for defect, box in entry.defects
            ]
            write_label_file(records, entry.id, root / "labels" / split.value)
            relocated.append(replace(entry, path=rel))
        layout_manifest = DatasetManifest(
            entries=relocated,
            class_map=dict(manifest.class_map),
            split=dict(manifest.split),
        )
        layout_manifest.save(root / "manifest" / "manifest.jsonl")
        config = root / "dataset.yaml"
        config.write_text(
            "train: images/train\n"
            "val: images/val\n"
            f"nc: {len(names)}\n"
            f"names: [{', '.join(names)}]\n"
        )
    except OSError as exc:
        raise IoFailure(f"cannot materialize dataset under {root}: {exc}") from exc
    return config


@dataclass(frozen=True)
class Finding:
    kind: str  # orphan_image | orphan_label | malformed_label | leakage
    path: Path
    detail: str = ""

    def __str__(self) -> str:
        suffix = f": {self.detail}" if self.detail else ""
        return f"[{self.kind}] {self.path}{suffix}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)
    images_checked: int = 0
    labels_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.findings

    def by_kind(self, kind: str) -> list[Finding]:
        return [f for f in self.findings if f.kind == kind]

    def summary(self) -> str:
        lines = [
            f"checked {self.images_checked} images, {self.labels_checked} label files: "
            + ("OK" if self.ok else f"{len(self.findings)} problem(s)")
        ]
        lines.extend(str(f) for f in self.findings)
        return "\n".join(lines)


def validate_layout(root: Union[Path, str]) -> ValidationReport:
    """Audit a materialized dataset tree.

    Reports images without labels, labels without images, label lines that do
    not parse, and augmentation leakage (derivative stems under val). Missing
    split directories just count as empty.
    """
    root = Path(root)
    if not root.is_dir():
        raise IoFailure(f"dataset root {root} does not exist")
    report = ValidationReport()
    for split in Split:
        images_dir = root / "images" / split.value
        labels_dir = root / "labels" / split.value
        images: dict[str, Path] = {}
        if images_dir.is_dir():
            images = {
                p.stem: p
                for p in sorted(images_dir.iterdir())
                if p.suffix.lower() in IMAGE_SUFFIXES
            }
        labels: dict[str, Path] = {}
        if labels_dir.is_dir():
            labels = {p.stem: p for p in sorted(labels_dir.iterdir()) if p.suffix.lower() == ".txt"}
        report.images_checked += len(images)
        report.labels_checked += len(labels)
        for stem, path in images.items():
            if stem not in labels:
                report.findings.append(Finding("orphan_image", path, "no matching label file"))
            if split is Split.VAL and AUG_STEM_MARKER in stem:
                report.findings.append(
                    Finding("leakage", path, "augmented derivative in validation split")
                )
        for stem, path in labels.items():
            if stem not in images:
                report.findings.append(Finding("orphan_label", path, "no matching image"))
            try:
                parse_label_file(path)
            except (MalformedLine, OutOfRangeValue) as exc:
                report.findings.append(
                    Finding("malformed_label", path, f"line {exc.line_no}: {exc}")
                )
    return report
