"""DICOM Part-10 parsing, serialization, rendering, and derived objects."""

from .dataset import (
    DataElement,
    DicomDataset,
    EXPLICIT_VR_LE,
    FileMeta,
    IMPLEMENTATION_CLASS_UID,
    IMPLICIT_VR_LE,
    RasterImage,
    SECONDARY_CAPTURE_STORAGE,
    CT_IMAGE_STORAGE,
    MR_IMAGE_STORAGE,
    SUPPORTED_TRANSFER_SYNTAXES,
    VERIFICATION_SOP_CLASS,
    new_uid,
)
from .derive import file_meta_for, new_derived_series
from .errors import (
    DecodeError,
    DepthExceeded,
    DicomError,
    InvalidVr,
    MalformedElement,
    MissingStudyUid,
    NoPixelData,
    NotDicom,
    OddLengthValue,
    Truncated,
    UnsupportedBitsAllocated,
    UnsupportedPhotometric,
    UnsupportedTransferSyntax,
    ValueTooLong,
)
from .metadata import extract_metadata
from .parser import parse_dataset, parse_part10, parse_part10_ex
from .preview import (
    auto_window,
    downsample_nearest,
    raster_from_dataset,
    render_preview,
    window_samples,
)
from .writer import assemble_part10, serialize_dataset, serialize_part10
from .tags import Tag
from . import tags

__all__ = [
    "Tag",
    "DataElement",
    "DicomDataset",
    "FileMeta",
    "RasterImage",
    "DicomError",
    "NotDicom",
    "Truncated",
    "UnsupportedTransferSyntax",
    "InvalidVr",
    "DepthExceeded",
    "MalformedElement",
    "OddLengthValue",
    "ValueTooLong",
    "DecodeError",
    "NoPixelData",
    "UnsupportedPhotometric",
    "UnsupportedBitsAllocated",
    "MissingStudyUid",
    "IMPLICIT_VR_LE",
    "EXPLICIT_VR_LE",
    "SUPPORTED_TRANSFER_SYNTAXES",
    "VERIFICATION_SOP_CLASS",
    "CT_IMAGE_STORAGE",
    "MR_IMAGE_STORAGE",
    "SECONDARY_CAPTURE_STORAGE",
    "IMPLEMENTATION_CLASS_UID",
    "new_uid",
    "parse_part10",
    "parse_part10_ex",
    "parse_dataset",
    "serialize_part10",
    "serialize_dataset",
    "assemble_part10",
    "extract_metadata",
    "render_preview",
    "raster_from_dataset",
    "window_samples",
    "auto_window",
    "downsample_nearest",
    "new_derived_series",
    "file_meta_for",
    "tags",
]
