"""Content-addressed instance archive with a queryable metadata index."""
from .blobs import BlobStore
from .db import Database
from .errors import (
    ArchiveError,
    DuplicateName,
    IntegrityError,
    InvalidKey,
    InvalidTagName,
    MissingRequiredUid,
    NotFound,
    StorageFull,
    UidConflict,
    UnknownAttribute,
    UnknownCohort,
    UnknownSeries,
)
from .query import (
    CohortQuery,
    DateRange,
    Equals,
    HasTag,
    In,
    INDEXED_ATTRIBUTES,
    Prefix,
    query_from_json,
    query_matches,
    query_to_json,
)
from .store import (
    Archive,
    Cohort,
    InstanceRecord,
    ObjectRef,
    SeriesRollup,
    StudyRollup,
)

__all__ = [
    "Archive",
    "ArchiveError",
    "BlobStore",
    "Cohort",
    "CohortQuery",
    "Database",
    "DateRange",
    "DuplicateName",
    "Equals",
    "HasTag",
    "In",
    "INDEXED_ATTRIBUTES",
    "InstanceRecord",
    "IntegrityError",
    "InvalidKey",
    "InvalidTagName",
    "MissingRequiredUid",
    "NotFound",
    "ObjectRef",
    "Prefix",
    "query_from_json",
    "query_matches",
    "query_to_json",
    "SeriesRollup",
    "StorageFull",
    "StudyRollup",
    "UidConflict",
    "UnknownAttribute",
    "UnknownCohort",
    "UnknownSeries",
]
