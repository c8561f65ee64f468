"""Domain vocabulary and validated value types shared by every other module.

All types here are immutable values and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Union


class SurgScanError(Exception):
    """Base class for all errors raised by this package."""


class UnknownInstrument(SurgScanError):
    """A label does not name any instrument in the closed vocabulary."""


class UnknownDefect(SurgScanError):
    """A label does not name any defect class in the closed vocabulary."""


class DegenerateBox(SurgScanError):
    """A bounding box with zero (or negative) area."""


class OutOfBounds(SurgScanError):
    """A bounding box that exceeds the image dimensions."""


class InvalidBox(SurgScanError):
    """A normalized bounding box violating its range invariants."""


class InstrumentClass(Enum):
    """The 11 instrument classes of the inspection vocabulary."""

    Carver = "Carver"
    ExProbe = "Ex-Probe"
    Probe = "Probe"
    Scalpel = "Scalpel"
    Scissors = "Scissors"
    BandageScissors = "Bandage Scissors"
    DressingForceps = "Dressing Forceps"
    McIndoeForceps = "McIndoe Forceps"
    NailClippers = "Nail Clippers"
    TealeVulsellumForceps = "Teale Vulsellum Forceps"
    UterineCurettes = "Uterine Curettes"

    def __str__(self) -> str:
        return self.value


class DefectClass(Enum):
    """Per-image defect verdict vocabulary.

    NonDefective is a verdict label only; it never appears in box
    annotations and is mutually exclusive with every other label on a
    single verdict.
    """

    Pore = "Pore"
    Crack = "Crack"
    Corrosion = "Corrosion"
    Cut = "Cut"
    Scratch = "Scratch"
    NonDefective = "NonDefective"

    def __str__(self) -> str:
        return self.value


def _normalize_label(label: str) -> str:
    return "".join(ch for ch in label.lower() if ch not in " -_/")


_INSTRUMENT_LOOKUP = {_normalize_label(m.value): m for m in InstrumentClass}
# "Nail cutter" appears as a synonym for the clippers in annotation sources.
_INSTRUMENT_LOOKUP["nailcutter"] = InstrumentClass.NailClippers

_DEFECT_LOOKUP = {_normalize_label(m.value): m for m in DefectClass}
# Aliases seen in annotation sources: plural forms and "rust" for corrosion.
_DEFECT_LOOKUP.update(
    {
        "pores": DefectClass.Pore,
        "cracks": DefectClass.Crack,
        "cuts": DefectClass.Cut,
        "scratches": DefectClass.Scratch,
        "rust": DefectClass.Corrosion,
        "corrosionrust": DefectClass.Corrosion,
    }
)


def parse_instrument(label: str) -> InstrumentClass:
    """Parse an instrument label, tolerating case, hyphens, and spaces.

    Raises UnknownInstrument for anything outside the closed set.
    """
    member = _INSTRUMENT_LOOKUP.get(_normalize_label(label))
    if member is None:
        raise UnknownInstrument(f"unknown instrument label: {label!r}")
    return member


def parse_defect(label: str) -> DefectClass:
    """Parse a defect label, tolerating case, hyphens, and spaces."""
    member = _DEFECT_LOOKUP.get(_normalize_label(label))
    if member is None:
        raise UnknownDefect(f"unknown defect label: {label!r}")
    return member


@dataclass(frozen=True)
class PixelBBox:
    """Axis-aligned box in integer pixel coordinates.

    Half-open semantics: x_max and y_max are exclusive, so
    width = x_max - x_min exactly. Construction is permissive; use
    validate_bbox for the full invariant check against an image.
    """

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height


def validate_bbox(b: PixelBBox, width: int, height: int) -> PixelBBox:
    """Check a pixel box against image dimensions and return it unchanged.

    Raises DegenerateBox for zero-area boxes and OutOfBounds for boxes
    that leave the image. Image dimensions must be positive.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    if b.x_min >= b.x_max or b.y_min >= b.y_max:
        raise DegenerateBox(f"zero-area box {b}")
    if b.x_min < 0 or b.y_min < 0 or b.x_max > width or b.y_max > height:
        raise OutOfBounds(f"box {b} exceeds {width}x{height} image")
    return b


_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class NormalizedBBox:
    """Center/size box in [0,1] fractions of image width and height."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise InvalidBox(f"negative class id {self.class_id}")
        if not (0.0 < self.w <= 1.0) or not (0.0 < self.h <= 1.0):
            raise InvalidBox(f"box size out of (0,1]: w={self.w} h={self.h}")
        if not (0.0 <= self.cx <= 1.0) or not (0.0 <= self.cy <= 1.0):
            raise InvalidBox(f"box center out of [0,1]: cx={self.cx} cy={self.cy}")
        for edge in (
            self.cx - self.w / 2,
            self.cx + self.w / 2,
            self.cy - self.h / 2,
            self.cy + self.h / 2,
        ):
            if not (-_EDGE_TOL <= edge <= 1.0 + _EDGE_TOL):
                raise InvalidBox(f"box edge {edge} outside [0,1]")


_TRANSFORM_KINDS = (
    "rotate90",
    "rotate180",
    "rotate270",
    "rotate_random",
    "brightness",
    "contrast",
    "noise",
    "unsharp",
)

_TRANSFORM_SLUGS = {
    "rotate90": "rot90",
    "rotate180": "rot180",
    "rotate270": "rot270",
    "rotate_random": "rotrnd",
    "brightness": "bright",
    "contrast": "contrast",
    "noise": "noise",
    "unsharp": "unsharp",
}


@dataclass(frozen=True)
class Transform:
    """Descriptor of one augmentation transform, recorded in provenance.

    kind is one of the fixed transform names; params holds the concrete
    magnitudes that were applied (drawn values included, so any
    derivative is reproducible from its descriptor alone).
    """

    kind: str
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(sorted(self.params)))

    def param(self, name: str) -> float:
        for key, value in self.params:
            if key == name:
                return value
        raise KeyError(f"transform {self.kind} has no param {name!r}")

    @property
    def slug(self) -> str:
        """Filesystem-safe short name; unique per kind within one parent."""
        return _TRANSFORM_SLUGS[self.kind]

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": {k: v for k, v in self.params}}

    @classmethod
    def from_json(cls, obj: dict) -> "Transform":
        return cls(kind=obj["kind"], params=tuple(obj.get("params", {}).items()))

    @classmethod
    def rotate_fixed(cls, angle: int) -> "Transform":
        if angle not in (90, 180, 270):
            raise ValueError(f"fixed rotation angle must be 90/180/270, got {angle}")
        return cls(kind=f"rotate{angle}")

    @classmethod
    def rotate_random(cls, angle: float, aspect: float = 1.0) -> "Transform":
        return cls(kind="rotate_random", params=(("angle", angle), ("aspect", aspect)))

    @classmethod
    def brightness(cls, delta: float) -> "Transform":
        return cls(kind="brightness", params=(("delta", delta),))

    @classmethod
    def contrast(cls, delta: float) -> "Transform":
        return cls(kind="contrast", params=(("delta", delta),))

    @classmethod
    def noise(cls, sigma: float, seed: int) -> "Transform":
        return cls(kind="noise", params=(("sigma", sigma), ("seed", seed)))

    @classmethod
    def unsharp(cls, radius: float, amount: float) -> "Transform":
        return cls(kind="unsharp", params=(("radius", radius), ("amount", amount)))


@dataclass(frozen=True)
class Original:
    """Provenance of an image captured on the rig (not derived)."""

    def to_json(self) -> dict:
        return {"kind": "original"}


@dataclass(frozen=True)
class Augmented:
    """Provenance of a derivative produced by one augmentation transform."""

    parent_id: str
    transform: Transform

    def to_json(self) -> dict:
        return {
            "kind": "augmented",
            "parent": self.parent_id,
            "transform": self.transform.to_json(),
        }


Provenance = Union[Original, Augmented]


def provenance_from_json(obj: dict) -> Provenance:
    if obj["kind"] == "original":
        return Original()
    if obj["kind"] == "augmented":
        return Augmented(parent_id=obj["parent"], transform=Transform.from_json(obj["transform"]))
    raise ValueError(f"unknown provenance kind {obj['kind']!r}")


@dataclass(frozen=True)
class AnnotatedImage:
    """An image plus its class labels and pixel bounding boxes."""

    id: str
    path: Path
    width: int
    height: int
    instrument: InstrumentClass
    defects: tuple[tuple[DefectClass, PixelBBox], ...] = ()
    provenance: Provenance = field(default_factory=Original)

    def __post_init__(self) -> None:
        object.__setattr__(self, "path", Path(self.path))
        object.__setattr__(self, "defects", tuple(self.defects))
        for defect, box in self.defects:
            if defect is DefectClass.NonDefective:
                raise ValueError("NonDefective cannot carry a box annotation")
            validate_bbox(box, self.width, self.height)

    @property
    def is_defective(self) -> bool:
        return len(self.defects) > 0

    @property
    def is_augmented(self) -> bool:
        return isinstance(self.provenance, Augmented)
