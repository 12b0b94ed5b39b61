"""Construction of derived series for writing results back into the archive."""
from __future__ import annotations

import random

import numpy as np

from .dataset import (
    DataElement,
    DicomDataset,
    FileMeta,
    EXPLICIT_VR_LE,
    RasterImage,
    SECONDARY_CAPTURE_STORAGE,
    new_uid,
)
from .errors import MissingStudyUid
from .tags import (
    BITS_ALLOCATED,
    BITS_STORED,
    COLUMNS,
    HIGH_BIT,
    INSTANCE_NUMBER,
    MODALITY,
    PATIENT_BIRTH_DATE,
    PATIENT_ID,
    PATIENT_NAME,
    PATIENT_SEX,
    PHOTOMETRIC_INTERPRETATION,
    PIXEL_DATA,
    PIXEL_REPRESENTATION,
    ROWS,
    SAMPLES_PER_PIXEL,
    SERIES_DESCRIPTION,
    SERIES_INSTANCE_UID,
    SOP_CLASS_UID,
    SOP_INSTANCE_UID,
    STUDY_DATE,
    STUDY_ID,
    STUDY_INSTANCE_UID,
    Tag,
)

# Attributes copied verbatim from the source so the derived series lands in
# the same patient/study context.
_INHERITED: tuple[Tag, ...] = (
    STUDY_DATE,
    PATIENT_NAME,
    PATIENT_ID,
    PATIENT_BIRTH_DATE,
    PATIENT_SEX,
    STUDY_INSTANCE_UID,
    STUDY_ID,
)


def new_derived_series(
    source: DicomDataset,
    pixels: RasterImage,
    description: str,
    rng: random.Random | None = None,
) -> DicomDataset:
    """New single-instance OT series under the source's study."""
    if STUDY_INSTANCE_UID not in source:
        raise MissingStudyUid("source has no StudyInstanceUID")
    ds = DicomDataset()
    for tag in _INHERITED:
        el = source.get(tag)
        if el is not None:
            ds.put(DataElement(el.tag, el.vr, el.value))
    sop_uid = new_uid(rng)
    series_uid = new_uid(rng)
    ds.put_string(SOP_CLASS_UID, "UI", SECONDARY_CAPTURE_STORAGE)
    ds.put_string(SOP_INSTANCE_UID, "UI", sop_uid)
    ds.put_string(MODALITY, "CS", "OT")
    ds.put_string(SERIES_DESCRIPTION, "LO", description)
    ds.put_string(SERIES_INSTANCE_UID, "UI", series_uid)
    ds.put_string(INSTANCE_NUMBER, "IS", "1")
    ds.put_int(SAMPLES_PER_PIXEL, "US", 1)
    ds.put_string(PHOTOMETRIC_INTERPRETATION, "CS", "MONOCHROME2")
    ds.put_int(ROWS, "US", pixels.rows)
    ds.put_int(COLUMNS, "US", pixels.cols)
    ds.put_int(BITS_ALLOCATED, "US", pixels.bits_allocated)
    ds.put_int(BITS_STORED, "US", pixels.bits_allocated)
    ds.put_int(HIGH_BIT, "US", pixels.bits_allocated - 1)
    ds.put_int(PIXEL_REPRESENTATION, "US", 0)
    dtype = np.uint8 if pixels.bits_allocated == 8 else np.dtype("<u2")
    raw = np.ascontiguousarray(pixels.pixels.astype(dtype)).tobytes()
    if len(raw) % 2:
        raw += b"\x00"
    ds.put(DataElement(PIXEL_DATA, "OW" if pixels.bits_allocated == 16 else "OB", raw))
    return ds


def file_meta_for(ds: DicomDataset, transfer_syntax_uid: str = EXPLICIT_VR_LE) -> FileMeta:
    """Meta group matching a dataset's SOP identity."""
    return FileMeta(
        transfer_syntax_uid=transfer_syntax_uid,
        media_sop_class_uid=ds.get_string(SOP_CLASS_UID) or "",
        media_sop_instance_uid=ds.get_string(SOP_INSTANCE_UID) or "",
    )
