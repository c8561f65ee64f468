"""SurgScan: automated optical inspection stack for surgical instruments."""

__version__ = "0.1.0"

from surgscan.core import (
    AnnotatedImage,
    DefectClass,
    InstrumentClass,
    NormalizedBBox,
    PixelBBox,
    parse_defect,
    parse_instrument,
    validate_bbox,
)

__all__ = [
    "AnnotatedImage",
    "DefectClass",
    "InstrumentClass",
    "NormalizedBBox",
    "PixelBBox",
    "parse_defect",
    "parse_instrument",
    "validate_bbox",
]
