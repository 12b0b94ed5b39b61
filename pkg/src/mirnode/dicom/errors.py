"""Error types raised by the DICOM layer."""


class DicomError(Exception):
    """Base for all DICOM parse/serialize/render failures."""


class NotDicom(DicomError):
    """No 'DICM' marker at offset 128."""


class Truncated(DicomError):
    """Input ended mid-element or below the preamble minimum."""


class UnsupportedTransferSyntax(DicomError):
    """Transfer syntax outside {Implicit, Explicit} VR Little Endian."""


class InvalidVr(DicomError):
    """Explicit VR bytes not in the supported set."""


class DepthExceeded(DicomError):
    """Sequence nesting beyond the depth-8 parser limit."""


class MalformedElement(DicomError):
    """Structurally invalid element (bad framing, duplicate tag, stray group 0002)."""


class OddLengthValue(DicomError):
    """Fixed-width binary value whose length cannot be padded even."""


class ValueTooLong(DicomError):
    """Value exceeds the VR's length field capacity."""


class DecodeError(DicomError):
    """Value bytes invalid for the VR's character repertoire."""


class NoPixelData(DicomError):
    """Dataset lacks PixelData or the geometry needed to frame it."""


class UnsupportedPhotometric(DicomError):
    """Photometric interpretation other than MONOCHROME2."""


class UnsupportedBitsAllocated(DicomError):
    """BitsAllocated outside {8, 16}."""


class MissingStudyUid(DicomError):
    """Source dataset lacks StudyInstanceUID."""
