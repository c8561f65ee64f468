"""Dataset manifest: inventory of originals, derivatives, and split assignments."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Union

from surgscan.core import (
    AnnotatedImage,
    Augmented,
    DefectClass,
    PixelBBox,
    parse_defect,
    parse_instrument,
    provenance_from_json,
)
from surgscan.dataset.labels import IoFailure

MANIFEST_VERSION = 1


class Split(Enum):
    TRAIN = "train"
    VAL = "val"


def default_class_map() -> dict[str, int]:
    """Class ids in stable alphabetical order of defect names.

    NonDefective is a verdict, not a box class, so it gets no id; ids are
    written into the dataset config so they never depend on enum order.
    """
    names = sorted(d.value for d in DefectClass if d is not DefectClass.NonDefective)
    return {name: i for i, name in enumerate(names)}


@dataclass
class DatasetManifest:
    """Inventory of annotated images with split assignments and class ids."""

    entries: list[AnnotatedImage] = field(default_factory=list)
    class_map: dict[str, int] = field(default_factory=default_class_map)
    split: dict[str, Split] = field(default_factory=dict)

    def get(self, image_id: str) -> AnnotatedImage:
        for entry in self.entries:
            if entry.id == image_id:
                return entry
        raise KeyError(image_id)

    def originals(self) -> list[AnnotatedImage]:
        return [e for e in self.entries if not e.is_augmented]

    def entries_for(self, split: Split) -> list[AnnotatedImage]:
        return [e for e in self.entries if self.split.get(e.id) is split]

    @property
    def class_names(self) -> list[str]:
        """Class names ordered by class id."""
        return [name for name, _ in sorted(self.class_map.items(), key=lambda kv: kv[1])]

    def validate(self, require_split: bool = False) -> None:
        """Check manifest invariants; raises ValueError on violation."""
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate image ids in manifest")
        known = set(ids)
        original_ids = {e.id for e in self.entries if not e.is_augmented}
        counts = list(self.class_map.values())
        if len(set(counts)) != len(counts) or any(c < 0 for c in counts):
            raise ValueError("class_map ids must be unique and non-negative")
        for entry in self.entries:
            if isinstance(entry.provenance, Augmented):
                parent = entry.provenance.parent_id
                if parent not in known:
                    raise ValueError(f"augmented entry {entry.id} has missing parent {parent}")
                if parent not in original_ids:
                    raise ValueError(f"augmented entry {entry.id} has non-original parent {parent}")
                if self.split.get(entry.id) is Split.VAL:
                    raise ValueError(f"augmented entry {entry.id} assigned to validation split")
                if self.split.get(parent) is Split.VAL:
                    raise ValueError(
                        f"augmented entry {entry.id} derives from validation image {parent}"
                    )
        if require_split:
            missing = [e.id for e in self.entries if e.id not in self.split]
            if missing:
                raise ValueError(f"{len(missing)} entries missing split assignment")

    # -- persistence: line-delimited JSON, sorted for byte-stable output --

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "record": "meta",
                    "version": MANIFEST_VERSION,
                    "class_map": self.class_map,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        ]
        for entry in sorted(self.entries, key=lambda e: e.id):
            split = self.split.get(entry.id)
            lines.append(
                json.dumps(
                    {
                        "record": "image",
                        "id": entry.id,
                        "path": str(entry.path),
                        "width": entry.width,
                        "height": entry.height,
                        "instrument": entry.instrument.value,
                        "defects": [
                            [d.value, [b.x_min, b.y_min, b.x_max, b.y_max]]
                            for d, b in entry.defects
                        ],
                        "provenance": entry.provenance.to_json(),
                        "split": split.value if split else None,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
            )
        return "".join(line + "\n" for line in lines)

    def save(self, path: Union[Path, str]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_jsonl())
        except OSError as exc:
            raise IoFailure(f"cannot write manifest {path}: {exc}") from exc
        return path

    @classmethod
    def load(cls, path: Union[Path, str]) -> "DatasetManifest":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
        manifest = cls(entries=[], class_map={}, split={})
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.get("record")
            if kind == "meta":
                manifest.class_map = {str(k): int(v) for k, v in obj["class_map"].items()}
            elif kind == "image":
                entry = AnnotatedImage(
                    id=obj["id"],
                    path=Path(obj["path"]),
                    width=obj["width"],
                    height=obj["height"],
                    instrument=parse_instrument(obj["instrument"]),
                    defects=tuple(
                        (parse_defect(name), PixelBBox(*box)) for name, box in obj["defects"]
                    ),
                    provenance=provenance_from_json(obj["provenance"]),
                )
                manifest.entries.append(entry)
                if obj.get("split"):
                    manifest.split[entry.id] = Split(obj["split"])
            else:
                raise ValueError(f"{path}:{line_no}: unknown record kind {kind!r}")
        if not manifest.class_map:
            manifest.class_map = default_class_map()
        return manifest


def build_manifest(
    entries: Iterable[AnnotatedImage], class_map: dict[str, int] | None = None
) -> DatasetManifest:
    manifest = DatasetManifest(
        entries=list(entries), class_map=dict(class_map) if class_map else default_class_map()
    )
    manifest.validate()
    return manifest
