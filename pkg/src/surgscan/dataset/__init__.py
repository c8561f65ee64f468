"""Dataset curation: label conversion, augmentation, splitting, layout."""

from surgscan.dataset.augment import DROPPED, Dropped, augment_dataset, transform_bbox
from surgscan.dataset.convert import (
    ConversionResult,
    MalformedAnnotation,
    convert_annotations,
    parse_annotation_xml,
)
from surgscan.dataset.labels import (
    IoFailure,
    LabelRecord,
    MalformedLine,
    OutOfRangeValue,
    format_label_line,
    from_normalized,
    parse_label_file,
    to_normalized,
    write_label_file,
)
from surgscan.dataset.layout import ValidationReport, emit_dataset_config, validate_layout
from surgscan.dataset.manifest import DatasetManifest, Split, default_class_map
from surgscan.dataset.split import EmptyDataset, SplitConfig, stratified_split

__all__ = [
    "DROPPED",
    "ConversionResult",
    "DatasetManifest",
    "Dropped",
    "EmptyDataset",
    "IoFailure",
    "MalformedAnnotation",
    "convert_annotations",
    "parse_annotation_xml",
    "LabelRecord",
    "MalformedLine",
    "OutOfRangeValue",
    "Split",
    "SplitConfig",
    "ValidationReport",
    "augment_dataset",
    "default_class_map",
    "emit_dataset_config",
    "format_label_line",
    "from_normalized",
    "parse_label_file",
    "stratified_split",
    "to_normalized",
    "transform_bbox",
    "validate_layout",
    "write_label_file",
]
