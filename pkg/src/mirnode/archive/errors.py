"""Archive and index error taxonomy."""


class ArchiveError(Exception):
    """Base class for archive failures."""


class UidConflict(ArchiveError):
    """Same SOP instance UID ingested with different content."""


class MissingRequiredUid(ArchiveError):
    """Instance lacks one of the patient/study/series hierarchy UIDs."""


class StorageFull(ArchiveError):
    """Underlying volume rejected the write."""


class UnknownAttribute(ArchiveError):
    """Query names an attribute outside the indexed set."""


class InvalidTagName(ArchiveError):
    """Tag fails the [A-Za-z0-9_-]{1,64} shape."""


class UnknownSeries(ArchiveError):
    """Tag selection references a series the archive does not hold."""


class NotFound(ArchiveError):
    """Object (bucket, key) absent."""


class InvalidKey(ArchiveError):
    """Object bucket or key fails validation."""


class DuplicateName(ArchiveError):
    """Cohort name already taken."""


class UnknownCohort(ArchiveError):
    """Cohort name not present."""


class IntegrityError(ArchiveError):
    """Index and blob store disagree in a way reconciliation cannot repair."""
