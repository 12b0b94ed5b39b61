"""Instance archive: blob-then-index ingest, queries, tags, objects, cohorts."""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from ..dicom import DicomDataset, FileMeta, extract_metadata, tags
from .blobs import BlobStore
from .db import Database
from .errors import (
    DuplicateName,
    IntegrityError,
    InvalidKey,
    InvalidTagName,
    MissingRequiredUid,
    NotFound,
    UidConflict,
    UnknownAttribute,
    UnknownCohort,
    UnknownSeries,
)
from .query import (
    CohortQuery,
    INDEX_TAGS,
    INDEXED_ATTRIBUTES,
    TAG_NAME_RE,
    query_from_json,
    query_matches,
    query_to_json,
)

_KEY_RE = re.compile(r"^[A-Za-z0-9._/-]+$")

_SCHEMA = """
CREATE TABLE IF NOT EXISTS instances (
    sop_uid TEXT PRIMARY KEY,
    series_uid TEXT NOT NULL,
    study_uid TEXT NOT NULL,
    patient_id TEXT NOT NULL DEFAULT '',
    sha256 TEXT NOT NULL,
    size INTEGER NOT NULL,
    received_at TEXT NOT NULL,
    attrs TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_instances_series ON instances(series_uid);
CREATE INDEX IF NOT EXISTS idx_instances_study ON instances(study_uid);
CREATE TABLE IF NOT EXISTS series_tags (
    series_uid TEXT NOT NULL,
    tag TEXT NOT NULL,
    PRIMARY KEY (series_uid, tag)
);
CREATE TABLE IF NOT EXISTS objects (
    bucket TEXT NOT NULL,
    key TEXT NOT NULL,
    sha256 TEXT NOT NULL,
    size INTEGER NOT NULL,
    media_type TEXT NOT NULL,
    stored_at TEXT NOT NULL,
    PRIMARY KEY (bucket, key)
);
CREATE TABLE IF NOT EXISTS cohorts (
    name TEXT PRIMARY KEY,
    series_uids TEXT NOT NULL,
    query_json TEXT NOT NULL,
    created_at TEXT NOT NULL,
    created_by TEXT NOT NULL
);
"""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class InstanceRecord:
    sop_instance_uid: str
    series_instance_uid: str
    study_instance_uid: str
    patient_id: str
    indexed_attributes: dict[str, str]
    content_sha256: str
    size: int
    received_at: str
    user_tags: frozenset[str]

    @property
    def study_date(self) -> str:
        return self.indexed_attributes.get("StudyDate", "")


@dataclass(frozen=True)
class SeriesRollup:
    series_uid: str
    study_uid: str
    representative: InstanceRecord
    instance_count: int
    user_tags: frozenset[str]


@dataclass(frozen=True)
class StudyRollup:
    study_uid: str
    representative: InstanceRecord
    series_count: int
    instance_count: int


@dataclass(frozen=True)
class ObjectRef:
    bucket: str
    key: str
    sha256: str
    size: int
    media_type: str
    stored_at: str


@dataclass(frozen=True)
class Cohort:
    name: str
    series_uids: tuple[str, ...]
    origin_query: CohortQuery
    created_at: str
    created_by: str


class Archive:
    """All public methods are safe to call from multiple threads."""

    def __init__(self, db: Database, blob_root: str | Path):
        self.db = db
        self.blobs = BlobStore(blob_root)
        db.ensure_schema(_SCHEMA)
        self.reconcile()

    # -- ingest -------------------------------------------------------------

    def ingest_instance(self, meta: FileMeta, ds: DicomDataset,
                        raw: bytes) -> InstanceRecord:
        sop = ds.get_string(tags.SOP_INSTANCE_UID)
        series = ds.get_string(tags.SERIES_INSTANCE_UID)
        study = ds.get_string(tags.STUDY_INSTANCE_UID)
        if not sop or not series or not study:
            raise MissingRequiredUid(
                f"sop={sop!r} series={series!r} study={study!r}")
        digest = hashlib.sha256(raw).hexdigest()
        existing = self.get_instance(sop)
        if existing is not None:
            if existing.content_sha256 == digest:
                return existing
            raise UidConflict(f"{sop}: stored {existing.content_sha256}, got {digest}")
        attrs = extract_metadata(ds, list(INDEX_TAGS))
        # Blob first, then the index row: a crash in between leaves only an
        # orphan blob, which startup reconciliation removes.
        self.blobs.put(raw)
        record = InstanceRecord(
            sop_instance_uid=sop,
            series_instance_uid=series,
            study_instance_uid=study,
            patient_id=attrs.get("PatientID", ""),
            indexed_attributes=attrs,
            content_sha256=digest,
            size=len(raw),
            received_at=_now(),
            user_tags=frozenset(),
        )
        with self.db.tx() as conn:
            row = conn.execute(
                "SELECT sha256 FROM instances WHERE sop_uid = ?", (sop,)).fetchone()
            if row is not None:
                # lost a race with a concurrent ingest of the same UID
                if row["sha256"] == digest:
                    pass
                else:
                    raise UidConflict(f"{sop}: stored {row['sha256']}, got {digest}")
            else:
                conn.execute(
                    "INSERT INTO instances (sop_uid, series_uid, study_uid,"
                    " patient_id, sha256, size, received_at, attrs)"
                    " VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                    (sop, series, study, record.patient_id, digest, len(raw),
                     record.received_at, json.dumps(attrs, sort_keys=True)))
        stored = self.get_instance(sop)
        assert stored is not None
        return stored

    def get_instance(self, sop_uid: str) -> InstanceRecord | None:
        row = self.db.query_one(
            "SELECT * FROM instances WHERE sop_uid = ?", (sop_uid,))
        if row is None:
            return None
        return self._record(row, self._tags_for(row["series_uid"]))

    def get_instance_bytes(self, sop_uid: str) -> bytes:
        row = self.db.query_one(
            "SELECT sha256 FROM instances WHERE sop_uid = ?", (sop_uid,))
        if row is None:
            raise NotFound(f"instance {sop_uid}")
        return self.blobs.get(row["sha256"])

    def instance_count(self) -> int:
        row = self.db.query_one("SELECT COUNT(*) AS n FROM instances")
        return int(row["n"])

    def _tags_for(self, series_uid: str) -> frozenset[str]:
        rows = self.db.query(
            "SELECT tag FROM series_tags WHERE series_uid = ?", (series_uid,))
        return frozenset(r["tag"] for r in rows)

    def _record(self, row, user_tags: frozenset[str]) -> InstanceRecord:
        return InstanceRecord(
            sop_instance_uid=row["sop_uid"],
            series_instance_uid=row["series_uid"],
            study_instance_uid=row["study_uid"],
            patient_id=row["patient_id"],
            indexed_attributes=json.loads(row["attrs"]),
            content_sha256=row["sha256"],
            size=row["size"],
            received_at=row["received_at"],
            user_tags=user_tags,
        )

    def _all_records(self) -> list[InstanceRecord]:
        tag_rows = self.db.query("SELECT series_uid, tag FROM series_tags")
        tag_map: dict[str, set[str]] = {}
        for row in tag_rows:
            tag_map.setdefault(row["series_uid"], set()).add(row["tag"])
        out = []
        for row in self.db.query("SELECT * FROM instances"):
            out.append(self._record(
                row, frozenset(tag_map.get(row["series_uid"], ()))))
        return out

    # -- queries ------------------------------------------------------------

    def query_index(self, q: CohortQuery, level: str = "instance"):
        if level not in ("instance", "series", "study"):
            raise ValueError(f"level must be instance/series/study, got {level!r}")
        q.validate()
        matching = [r for r in self._all_records()
                    if query_matches(q, r.indexed_attributes, r.user_tags)]
        if level == "instance":
            return _sorted_by_date_then(matching,
                                        lambda r: r.study_date,
                                        lambda r: r.sop_instance_uid)
        by_series: dict[str, list[InstanceRecord]] = {}
        for r in matching:
            by_series.setdefault(r.series_instance_uid, []).append(r)
        rollups = []
        for series_uid, records in by_series.items():
            rep = min(records, key=lambda r: r.sop_instance_uid)
            rollups.append(SeriesRollup(
                series_uid=series_uid,
                study_uid=rep.study_instance_uid,
                representative=rep,
                instance_count=len(records),
                user_tags=rep.user_tags,
            ))
        if level == "series":
            return _sorted_by_date_then(rollups,
                                        lambda s: s.representative.study_date,
                                        lambda s: s.series_uid)
        by_study: dict[str, list[SeriesRollup]] = {}
        for s in rollups:
            by_study.setdefault(s.study_uid, []).append(s)
        studies = []
        for study_uid, members in by_study.items():
            rep = min((s.representative for s in members),
                      key=lambda r: r.sop_instance_uid)
            studies.append(StudyRollup(
                study_uid=study_uid,
                representative=rep,
                series_count=len(members),
                instance_count=sum(s.instance_count for s in members),
            ))
        return _sorted_by_date_then(studies,
                                    lambda s: s.representative.study_date,
                                    lambda s: s.study_uid)

    def aggregate_values(self, attr: str, q: CohortQuery) -> dict[str, int]:
        if attr not in INDEXED_ATTRIBUTES:
            raise UnknownAttribute(attr)
        counts: dict[str, int] = {}
        for rollup in self.query_index(q, "series"):
            value = rollup.representative.indexed_attributes.get(attr, "(missing)")
            counts[value] = counts.get(value, 0) + 1
        return counts

    # -- tags ---------------------------------------------------------------

    def apply_tags(self, selection: list[str], add: set[str],
                   remove: set[str]) -> int:
        for tag in list(add) + list(remove):
            if not TAG_NAME_RE.match(tag):
                raise InvalidTagName(tag)
        series = list(dict.fromkeys(selection))
        with self.db.tx() as conn:
            for series_uid in series:
                row = conn.execute(
                    "SELECT 1 FROM instances WHERE series_uid = ? LIMIT 1",
                    (series_uid,)).fetchone()
                if row is None:
                    raise UnknownSeries(series_uid)
            for series_uid in series:
                for tag in sorted(add):
                    conn.execute(
                        "INSERT OR IGNORE INTO series_tags (series_uid, tag)"
                        " VALUES (?, ?)", (series_uid, tag))
                for tag in sorted(remove):
                    conn.execute(
                        "DELETE FROM series_tags WHERE series_uid = ? AND tag = ?",
                        (series_uid, tag))
        return len(series)

    # -- objects ------------------------------------------------------------

    def store_object(self, bucket: str, key: str, media_type: str,
                     data: bytes) -> ObjectRef:
        _check_name(bucket, "bucket")
        _check_name(key, "key")
        digest = self.blobs.put(data)
        ref = ObjectRef(bucket=bucket, key=key, sha256=digest, size=len(data),
                        media_type=media_type, stored_at=_now())
        with self.db.tx() as conn:
            conn.execute(
                "INSERT INTO objects (bucket, key, sha256, size, media_type, stored_at)"
                " VALUES (?, ?, ?, ?, ?, ?)"
                " ON CONFLICT (bucket, key) DO UPDATE SET"
                " sha256=excluded.sha256, size=excluded.size,"
                " media_type=excluded.media_type, stored_at=excluded.stored_at",
                (bucket, key, digest, len(data), media_type, ref.stored_at))
        return ref

    def fetch_object(self, bucket: str, key: str) -> bytes:
        return self.blobs.get(self.get_object_ref(bucket, key).sha256)

    def get_object_ref(self, bucket: str, key: str) -> ObjectRef:
        _check_name(bucket, "bucket")
        _check_name(key, "key")
        row = self.db.query_one(
            "SELECT * FROM objects WHERE bucket = ? AND key = ?", (bucket, key))
        if row is None:
            raise NotFound(f"{bucket}/{key}")
        return ObjectRef(bucket=row["bucket"], key=row["key"], sha256=row["sha256"],
                         size=row["size"], media_type=row["media_type"],
                         stored_at=row["stored_at"])

    def list_objects(self, bucket: str, prefix: str = "") -> list[ObjectRef]:
        _check_name(bucket, "bucket")
        rows = self.db.query(
            "SELECT * FROM objects WHERE bucket = ? ORDER BY key", (bucket,))
        return [ObjectRef(bucket=r["bucket"], key=r["key"], sha256=r["sha256"],
                          size=r["size"], media_type=r["media_type"],
                          stored_at=r["stored_at"])
                for r in rows if r["key"].startswith(prefix)]

    # -- cohorts ------------------------------------------------------------

    def create_cohort(self, name: str, q: CohortQuery,
                      created_by: str) -> Cohort:
        if not name or len(name) > 128:
            raise ValueError("cohort name must be 1-128 characters")
        q.validate()
        snapshot = tuple(s.series_uid for s in self.query_index(q, "series"))
        cohort = Cohort(name=name, series_uids=snapshot, origin_query=q,
                        created_at=_now(), created_by=created_by)
        with self.db.tx() as conn:
            row = conn.execute(
                "SELECT 1 FROM cohorts WHERE name = ?", (name,)).fetchone()
            if row is not None:
                raise DuplicateName(name)
            conn.execute(
                "INSERT INTO cohorts (name, series_uids, query_json, created_at,"
                " created_by) VALUES (?, ?, ?, ?, ?)",
                (name, json.dumps(list(snapshot)),
                 json.dumps(query_to_json(q)), cohort.created_at, created_by))
        return cohort

    def get_cohort(self, name: str) -> Cohort:
        row = self.db.query_one("SELECT * FROM cohorts WHERE name = ?", (name,))
        if row is None:
            raise UnknownCohort(name)
        return Cohort(
            name=row["name"],
            series_uids=tuple(json.loads(row["series_uids"])),
            origin_query=query_from_json(json.loads(row["query_json"])),
            created_at=row["created_at"],
            created_by=row["created_by"],
        )

    def resolve_cohort(self, name: str) -> list[str]:
        return list(self.get_cohort(name).series_uids)

    def list_cohorts(self) -> list[Cohort]:
        rows = self.db.query("SELECT name FROM cohorts ORDER BY name")
        return [self.get_cohort(r["name"]) for r in rows]

    # -- maintenance ----------------------------------------------------------

    def reconcile(self) -> dict:
        """Startup repair: drop blobs nothing references; verify referenced
        blobs exist."""
        referenced = {r["sha256"] for r in self.db.query("SELECT sha256 FROM instances")}
        referenced |= {r["sha256"] for r in self.db.query("SELECT sha256 FROM objects")}
        removed = []
        for digest in list(self.blobs.iter_digests()):
            if digest not in referenced:
                self.blobs.delete(digest)
                removed.append(digest)
        missing = [d for d in referenced if not self.blobs.has(d)]
        if missing:
            raise IntegrityError(f"index references absent blobs: {missing[:3]}")
        return {"orphan_blobs_removed": removed}

    def verify_integrity(self) -> dict:
        """Re-hash every referenced blob against its recorded digest."""
        mismatched = []
        checked = 0
        for row in self.db.query("SELECT sop_uid, sha256 FROM instances"):
            actual = hashlib.sha256(self.blobs.get(row["sha256"])).hexdigest()
            checked += 1
            if actual != row["sha256"]:
                mismatched.append(row["sop_uid"])
        for row in self.db.query("SELECT bucket, key, sha256 FROM objects"):
            actual = hashlib.sha256(self.blobs.get(row["sha256"])).hexdigest()
            checked += 1
            if actual != row["sha256"]:
                mismatched.append(f"{row['bucket']}/{row['key']}")
        return {"checked": checked, "mismatched": mismatched}


def _sorted_by_date_then(items: list, date_key, uid_key) -> list:
    # ascending UID within equal dates, dates descending; both sorts stable
    items.sort(key=uid_key)
    items.sort(key=date_key, reverse=True)
    return items


def _check_name(value: str, what: str) -> None:
    if not _KEY_RE.match(value or ""):
        raise InvalidKey(f"{what} {value!r} must match [A-Za-z0-9._/-]+")
    if ".." in value.split("/"):
        raise InvalidKey(f"{what} {value!r} contains a '..' segment")
