"""Registry index: a JSON document naming versions, archive URLs, and digests.

The index carries no dependency metadata; the resolver learns a candidate's
dependencies by fetching its digest-pinned archive and reading the manifest
(fetched archives are cached, so each candidate is downloaded at most once).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable

from .errors import DigestMismatch, NotInRegistry, SchemaError
from .manifest import NAME_RE, ExtensionManifest
from .package_archive import read_package_archive
from .semver import Version, format_version, parse_version

_ENTRY_FIELDS = {"version", "url", "sha256"}


@dataclass(frozen=True)
class IndexEntry:
    version: Version
    url: str
    sha256: str


class RegistryIndex:
    def __init__(self, packages: dict[str, tuple[IndexEntry, ...]]):
        self._packages = packages

    def names(self) -> list[str]:
        return sorted(self._packages)

    def versions(self, name: str) -> list[Version]:
        """Known versions, highest first; empty when the name is unknown."""
        return sorted((e.version for e in self._packages.get(name, ())),
                      reverse=True)

    def entry(self, name: str, version: Version) -> IndexEntry:
        for candidate in self._packages.get(name, ()):
            if candidate.version == version:
                return candidate
        raise NotInRegistry(f"{name} {format_version(version)}")


def index_from_json(raw: bytes) -> RegistryIndex:
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"index is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != {"packages"} \
            or not isinstance(doc["packages"], dict):
        raise SchemaError("index must be {\"packages\": {name: [entries]}}")
    packages: dict[str, tuple[IndexEntry, ...]] = {}
    for name, raw_entries in doc["packages"].items():
        if not NAME_RE.match(name):
            raise SchemaError(f"index package name {name!r} invalid")
        if not isinstance(raw_entries, list):
            raise SchemaError(f"index entries for {name} must be a list")
        entries = []
        seen = set()
        for item in raw_entries:
            if not isinstance(item, dict) or set(item) != _ENTRY_FIELDS:
                raise SchemaError(
                    f"index entry for {name} must have exactly"
                    f" {sorted(_ENTRY_FIELDS)}")
            version = parse_version(item["version"])
            if version in seen:
                raise SchemaError(f"index lists {name}"
                                  f" {item['version']} twice")
            seen.add(version)
            digest = item["sha256"]
            if not (isinstance(digest, str) and len(digest) == 64
                    and all(c in "0123456789abcdef" for c in digest)):
                raise SchemaError(f"index entry {name} {item['version']}:"
                                  " bad sha256")
            if not isinstance(item["url"], str) or not item["url"]:
                raise SchemaError(f"index entry {name} {item['version']}:"
                                  " bad url")
            entries.append(IndexEntry(version, item["url"], digest))
        packages[name] = tuple(entries)
    return RegistryIndex(packages)


class Registry:
    """Index plus a fetch callable; verifies every fetched archive's digest."""

    def __init__(self, index: RegistryIndex, fetch: Callable[[str], bytes]):
        self.index = index
        self._fetch = fetch
        self._archives: dict[tuple[str, Version], bytes] = {}
        self._manifests: dict[tuple[str, Version], ExtensionManifest] = {}

    def versions(self, name: str) -> list[Version]:
        return self.index.versions(name)

    def archive_bytes(self, name: str, version: Version) -> bytes:
        key = (name, version)
        if key not in self._archives:
            entry = self.index.entry(name, version)
            data = self._fetch(entry.url)
            got = hashlib.sha256(data).hexdigest()
            if got != entry.sha256:
                raise DigestMismatch(
                    f"{name} {format_version(version)}: archive digest {got}"
                    f" != index digest {entry.sha256}")
            self._archives[key] = data
        return self._archives[key]

    def manifest(self, name: str, version: Version) -> ExtensionManifest:
        key = (name, version)
        if key not in self._manifests:
            manifest, _ = read_package_archive(self.archive_bytes(name, version))
            if manifest.name != name or manifest.version != version:
                raise SchemaError(
                    f"archive for {name} {format_version(version)} declares"
                    f" {manifest.name} {manifest.version_text}")
            self._manifests[key] = manifest
        return self._manifests[key]


EMPTY_REGISTRY = Registry(RegistryIndex({}), lambda url: (_ for _ in ()).throw(
    NotInRegistry(url)))
