"""Package archive codec: tar+gzip with manifest.json and checksums.sha256.

The checksums file lists one "<hex>  <path>" line per content file. Every
file in the archive other than manifest.json and the checksums file must
appear there with a matching digest, and every content file the manifest
lists must be present.
"""
from __future__ import annotations

import gzip
import hashlib
import io
import tarfile

from .errors import DigestMismatch, SchemaError
from .manifest import ExtensionManifest, check_relative_path, parse_manifest

MANIFEST_NAME = "manifest.json"
CHECKSUMS_NAME = "checksums.sha256"

_MAX_MEMBER = 64 * 1024 * 1024


def read_package_archive(data: bytes) -> tuple[ExtensionManifest, dict[str, bytes]]:
    """Parses and fully verifies an archive; returns (manifest, files).

    files maps archive-relative content paths to bytes (manifest and
    checksums excluded)."""
    files = _extract(data)
    if MANIFEST_NAME not in files:
        raise SchemaError(f"archive has no {MANIFEST_NAME} at its root")
    if CHECKSUMS_NAME not in files:
        raise SchemaError(f"archive has no {CHECKSUMS_NAME} at its root")
    manifest = parse_manifest(files.pop(MANIFEST_NAME))
    declared = _parse_checksums(files.pop(CHECKSUMS_NAME))

    for path, blob in sorted(files.items()):
        want = declared.get(path)
        if want is None:
            raise DigestMismatch(f"{path} is present but not in {CHECKSUMS_NAME}")
        got = hashlib.sha256(blob).hexdigest()
        if got != want:
            raise DigestMismatch(f"{path}: digest {got} != declared {want}")
    for path in sorted(declared):
        if path not in files:
            raise DigestMismatch(f"{path} is listed in {CHECKSUMS_NAME} but absent")
    for path in manifest.content_paths():
        if path not in files:
            raise SchemaError(f"manifest lists {path} but the archive lacks it")
    if manifest.ui_root is not None:
        prefix = manifest.ui_root.rstrip("/") + "/"
        if not any(p.startswith(prefix) for p in files):
            raise SchemaError(f"manifest declares ui root {manifest.ui_root!r}"
                              " but the archive has no files under it")
    return manifest, files


def _extract(data: bytes) -> dict[str, bytes]:
    try:
        # decompress first so a non-gzip payload fails with a clear error
        tar_bytes = gzip.decompress(data)
        archive = tarfile.open(fileobj=io.BytesIO(tar_bytes), mode="r:")
    except (OSError, tarfile.TarError, EOFError) as exc:
        raise SchemaError(f"not a tar+gzip archive: {exc}") from exc
    files: dict[str, bytes] = {}
    with archive:
        for member in archive.getmembers():
            if member.isdir():
                continue
            if not member.isfile():
                raise SchemaError(f"archive member {member.name!r} is not a"
                                  " regular file")
            if member.size > _MAX_MEMBER:
                raise SchemaError(f"archive member {member.name!r} too large")
            path = check_relative_path(member.name)
            stream = archive.extractfile(member)
            files[path] = stream.read() if stream else b""
    return files


def _parse_checksums(raw: bytes) -> dict[str, str]:
    declared: dict[str, str] = {}
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SchemaError(f"{CHECKSUMS_NAME} is not UTF-8") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        digest, sep, path = line.partition("  ")
        if not sep or len(digest) != 64 or not all(
                c in "0123456789abcdef" for c in digest):
            raise SchemaError(f"{CHECKSUMS_NAME} line {lineno} is not"
                              " '<sha256-hex>  <path>'")
        path = check_relative_path(path)
        if path in declared:
            raise SchemaError(f"{CHECKSUMS_NAME} lists {path} twice")
        declared[path] = digest
    return declared


def build_package_archive(manifest_json: bytes, files: dict[str, bytes]) -> bytes:
    """Deterministic inverse of read_package_archive, used by the CLI packer."""
    checksums = "".join(
        f"{hashlib.sha256(blob).hexdigest()}  {path}\n"
        for path, blob in sorted(files.items()))
    members = {MANIFEST_NAME: manifest_json,
               CHECKSUMS_NAME: checksums.encode("utf-8"), **files}
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:") as tar:
        for path in sorted(members):
            blob = members[path]
            info = tarfile.TarInfo(name=path)
            info.size = len(blob)
            info.mtime = 0
            info.uid = info.gid = 0
            info.uname = info.gname = ""
            tar.addfile(info, io.BytesIO(blob))
    return gzip.compress(buf.getvalue(), mtime=0)
