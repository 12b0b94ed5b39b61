"""DICOM tags and the minimal data dictionary used by the platform."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Tag:
    """A (group, element) pair; ordering is lexicographic."""

    group: int
    element: int

    def __post_init__(self) -> None:
        if not (0 <= self.group <= 0xFFFF and 0 <= self.element <= 0xFFFF):
            raise ValueError(f"tag components out of range: {self.group:#x},{self.element:#x}")

    @property
    def is_file_meta(self) -> bool:
        return self.group == 0x0002

    def __str__(self) -> str:
        return f"({self.group:04X},{self.element:04X})"


# Sequence item framing (PS3.5 section 7.5); never stored in datasets.
ITEM = Tag(0xFFFE, 0xE000)
ITEM_DELIMITER = Tag(0xFFFE, 0xE00D)
SEQUENCE_DELIMITER = Tag(0xFFFE, 0xE0DD)

# Command set (group 0000), used by the DIMSE services
COMMAND_GROUP_LENGTH = Tag(0x0000, 0x0000)
AFFECTED_SOP_CLASS = Tag(0x0000, 0x0002)
COMMAND_FIELD = Tag(0x0000, 0x0100)
MESSAGE_ID = Tag(0x0000, 0x0110)
MESSAGE_ID_RESPONDED = Tag(0x0000, 0x0120)
PRIORITY = Tag(0x0000, 0x0700)
COMMAND_DATA_SET_TYPE = Tag(0x0000, 0x0800)
STATUS = Tag(0x0000, 0x0900)
AFFECTED_SOP_INSTANCE = Tag(0x0000, 0x1000)

# File meta group
FILE_META_GROUP_LENGTH = Tag(0x0002, 0x0000)
FILE_META_VERSION = Tag(0x0002, 0x0001)
MEDIA_SOP_CLASS_UID = Tag(0x0002, 0x0002)
MEDIA_SOP_INSTANCE_UID = Tag(0x0002, 0x0003)
TRANSFER_SYNTAX_UID = Tag(0x0002, 0x0010)
IMPLEMENTATION_CLASS_UID_TAG = Tag(0x0002, 0x0012)

# Main dataset tags the platform touches directly
SPECIFIC_CHARACTER_SET = Tag(0x0008, 0x0005)
IMAGE_TYPE = Tag(0x0008, 0x0008)
SOP_CLASS_UID = Tag(0x0008, 0x0016)
SOP_INSTANCE_UID = Tag(0x0008, 0x0018)
STUDY_DATE = Tag(0x0008, 0x0020)
SERIES_DATE = Tag(0x0008, 0x0021)
STUDY_TIME = Tag(0x0008, 0x0030)
MODALITY = Tag(0x0008, 0x0060)
MANUFACTURER = Tag(0x0008, 0x0070)
REFERRING_PHYSICIAN = Tag(0x0008, 0x0090)
STUDY_DESCRIPTION = Tag(0x0008, 0x1030)
SERIES_DESCRIPTION = Tag(0x0008, 0x103E)
PATIENT_NAME = Tag(0x0010, 0x0010)
PATIENT_ID = Tag(0x0010, 0x0020)
PATIENT_BIRTH_DATE = Tag(0x0010, 0x0030)
PATIENT_SEX = Tag(0x0010, 0x0040)
BODY_PART_EXAMINED = Tag(0x0018, 0x0015)
PATIENT_POSITION = Tag(0x0018, 0x5100)
STUDY_INSTANCE_UID = Tag(0x0020, 0x000D)
SERIES_INSTANCE_UID = Tag(0x0020, 0x000E)
STUDY_ID = Tag(0x0020, 0x0010)
SERIES_NUMBER = Tag(0x0020, 0x0011)
INSTANCE_NUMBER = Tag(0x0020, 0x0013)
SAMPLES_PER_PIXEL = Tag(0x0028, 0x0002)
PHOTOMETRIC_INTERPRETATION = Tag(0x0028, 0x0004)
NUMBER_OF_FRAMES = Tag(0x0028, 0x0008)
ROWS = Tag(0x0028, 0x0010)
COLUMNS = Tag(0x0028, 0x0011)
BITS_ALLOCATED = Tag(0x0028, 0x0100)
BITS_STORED = Tag(0x0028, 0x0101)
HIGH_BIT = Tag(0x0028, 0x0102)
PIXEL_REPRESENTATION = Tag(0x0028, 0x0103)
WINDOW_CENTER = Tag(0x0028, 0x1050)
WINDOW_WIDTH = Tag(0x0028, 0x1051)
PIXEL_DATA = Tag(0x7FE0, 0x0010)

# Minimal data dictionary: VR + keyword for the tags the platform needs.
# Implicit VR parsing falls back to UN for anything not listed here.
DATA_DICTIONARY: dict[Tag, tuple[str, str]] = {
    COMMAND_GROUP_LENGTH: ("UL", "CommandGroupLength"),
    AFFECTED_SOP_CLASS: ("UI", "AffectedSOPClassUID"),
    COMMAND_FIELD: ("US", "CommandField"),
    MESSAGE_ID: ("US", "MessageID"),
    MESSAGE_ID_RESPONDED: ("US", "MessageIDBeingRespondedTo"),
    PRIORITY: ("US", "Priority"),
    COMMAND_DATA_SET_TYPE: ("US", "CommandDataSetType"),
    STATUS: ("US", "Status"),
    AFFECTED_SOP_INSTANCE: ("UI", "AffectedSOPInstanceUID"),
    FILE_META_GROUP_LENGTH: ("UL", "FileMetaInformationGroupLength"),
    FILE_META_VERSION: ("OB", "FileMetaInformationVersion"),
    MEDIA_SOP_CLASS_UID: ("UI", "MediaStorageSOPClassUID"),
    MEDIA_SOP_INSTANCE_UID: ("UI", "MediaStorageSOPInstanceUID"),
    TRANSFER_SYNTAX_UID: ("UI", "TransferSyntaxUID"),
    IMPLEMENTATION_CLASS_UID_TAG: ("UI", "ImplementationClassUID"),
    Tag(0x0002, 0x0013): ("SH", "ImplementationVersionName"),
    SPECIFIC_CHARACTER_SET: ("CS", "SpecificCharacterSet"),
    IMAGE_TYPE: ("CS", "ImageType"),
    Tag(0x0008, 0x0012): ("DA", "InstanceCreationDate"),
    Tag(0x0008, 0x0013): ("TM", "InstanceCreationTime"),
    SOP_CLASS_UID: ("UI", "SOPClassUID"),
    SOP_INSTANCE_UID: ("UI", "SOPInstanceUID"),
    STUDY_DATE: ("DA", "StudyDate"),
    SERIES_DATE: ("DA", "SeriesDate"),
    Tag(0x0008, 0x0022): ("DA", "AcquisitionDate"),
    STUDY_TIME: ("TM", "StudyTime"),
    Tag(0x0008, 0x0031): ("TM", "SeriesTime"),
    Tag(0x0008, 0x0050): ("SH", "AccessionNumber"),
    MODALITY: ("CS", "Modality"),
    Tag(0x0008, 0x0064): ("CS", "ConversionType"),
    MANUFACTURER: ("LO", "Manufacturer"),
    Tag(0x0008, 0x0080): ("LO", "InstitutionName"),
    REFERRING_PHYSICIAN: ("PN", "ReferringPhysicianName"),
    Tag(0x0008, 0x0100): ("SH", "CodeValue"),
    Tag(0x0008, 0x0102): ("SH", "CodingSchemeDesignator"),
    Tag(0x0008, 0x0104): ("LO", "CodeMeaning"),
    Tag(0x0008, 0x1010): ("SH", "StationName"),
    STUDY_DESCRIPTION: ("LO", "StudyDescription"),
    SERIES_DESCRIPTION: ("LO", "SeriesDescription"),
    Tag(0x0008, 0x1090): ("LO", "ManufacturerModelName"),
    Tag(0x0008, 0x1110): ("SQ", "ReferencedStudySequence"),
    Tag(0x0008, 0x1111): ("SQ", "ReferencedPerformedProcedureStepSequence"),
    Tag(0x0008, 0x1115): ("SQ", "ReferencedSeriesSequence"),
    Tag(0x0008, 0x1140): ("SQ", "ReferencedImageSequence"),
    Tag(0x0008, 0x1150): ("UI", "ReferencedSOPClassUID"),
    Tag(0x0008, 0x1155): ("UI", "ReferencedSOPInstanceUID"),
    PATIENT_NAME: ("PN", "PatientName"),
    PATIENT_ID: ("LO", "PatientID"),
    PATIENT_BIRTH_DATE: ("DA", "PatientBirthDate"),
    PATIENT_SEX: ("CS", "PatientSex"),
    Tag(0x0010, 0x1010): ("AS", "PatientAge"),
    Tag(0x0010, 0x1030): ("DS", "PatientWeight"),
    BODY_PART_EXAMINED: ("CS", "BodyPartExamined"),
    Tag(0x0018, 0x0050): ("DS", "SliceThickness"),
    Tag(0x0018, 0x0060): ("DS", "KVP"),
    Tag(0x0018, 0x1030): ("LO", "ProtocolName"),
    PATIENT_POSITION: ("CS", "PatientPosition"),
    STUDY_INSTANCE_UID: ("UI", "StudyInstanceUID"),
    SERIES_INSTANCE_UID: ("UI", "SeriesInstanceUID"),
    STUDY_ID: ("SH", "StudyID"),
    SERIES_NUMBER: ("IS", "SeriesNumber"),
    INSTANCE_NUMBER: ("IS", "InstanceNumber"),
    Tag(0x0020, 0x0032): ("DS", "ImagePositionPatient"),
    Tag(0x0020, 0x0037): ("DS", "ImageOrientationPatient"),
    Tag(0x0020, 0x1041): ("DS", "SliceLocation"),
    SAMPLES_PER_PIXEL: ("US", "SamplesPerPixel"),
    PHOTOMETRIC_INTERPRETATION: ("CS", "PhotometricInterpretation"),
    NUMBER_OF_FRAMES: ("IS", "NumberOfFrames"),
    ROWS: ("US", "Rows"),
    COLUMNS: ("US", "Columns"),
    Tag(0x0028, 0x0030): ("DS", "PixelSpacing"),
    BITS_ALLOCATED: ("US", "BitsAllocated"),
    BITS_STORED: ("US", "BitsStored"),
    HIGH_BIT: ("US", "HighBit"),
    PIXEL_REPRESENTATION: ("US", "PixelRepresentation"),
    WINDOW_CENTER: ("DS", "WindowCenter"),
    WINDOW_WIDTH: ("DS", "WindowWidth"),
    Tag(0x0028, 0x1052): ("DS", "RescaleIntercept"),
    Tag(0x0028, 0x1053): ("DS", "RescaleSlope"),
    Tag(0x0040, 0x0275): ("SQ", "RequestAttributesSequence"),
    Tag(0x0040, 0xA043): ("SQ", "ConceptNameCodeSequence"),
    PIXEL_DATA: ("OW", "PixelData"),
}

KEYWORD_TO_TAG: dict[str, Tag] = {kw: tag for tag, (_, kw) in DATA_DICTIONARY.items()}


def vr_of(tag: Tag) -> str:
    """Dictionary VR for implicit-VR decoding; UN when unknown."""
    entry = DATA_DICTIONARY.get(tag)
    return entry[0] if entry else "UN"


def keyword_of(tag: Tag) -> str | None:
    entry = DATA_DICTIONARY.get(tag)
    return entry[1] if entry else None
