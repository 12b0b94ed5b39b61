"""Extension manifest: strict-schema JSON codec and path hygiene."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import PathEscape, SchemaError
from .semver import Range, Version, format_version, parse_range, parse_version

NAME_RE = re.compile(r"^[a-z0-9-]{1,64}$")

_TOP_FIELDS = {"name", "version", "dependencies", "contents"}
_CONTENT_FIELDS = {"workflows", "operators", "ui"}
_DEP_FIELDS = {"name", "range"}


@dataclass(frozen=True)
class Dependency:
    name: str
    range: Range


@dataclass(frozen=True)
class ExtensionManifest:
    name: str
    version: Version
    dependencies: tuple[Dependency, ...] = ()
    workflows: tuple[str, ...] = ()
    operators: tuple[str, ...] = ()
    ui_root: str | None = None

    @property
    def version_text(self) -> str:
        return format_version(self.version)

    def content_paths(self) -> list[str]:
        return list(self.workflows) + list(self.operators)


def check_relative_path(path: str) -> str:
    """Archive-relative, forward slashes, no traversal; returns the path."""
    if not isinstance(path, str) or not path:
        raise PathEscape(f"content path must be a non-empty string, got {path!r}")
    if path.startswith("/") or "\\" in path or ":" in path:
        raise PathEscape(f"content path {path!r} is not archive-relative")
    segments = path.split("/")
    if any(seg in ("", ".", "..") for seg in segments):
        raise PathEscape(f"content path {path!r} contains a traversal segment")
    return path


def parse_manifest(raw: bytes) -> ExtensionManifest:
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("manifest must be a JSON object")
    unknown = sorted(set(doc) - _TOP_FIELDS)
    if unknown:
        raise SchemaError(f"unknown manifest field {unknown[0]!r}")
    name = doc.get("name")
    if not isinstance(name, str) or not NAME_RE.match(name):
        raise SchemaError(f"'name' must match [a-z0-9-]{{1,64}}, got {name!r}")
    version = parse_version(doc.get("version"))

    dependencies = []
    raw_deps = doc.get("dependencies", [])
    if not isinstance(raw_deps, list):
        raise SchemaError("'dependencies' must be a list")
    for i, item in enumerate(raw_deps):
        if not isinstance(item, dict):
            raise SchemaError(f"dependencies[{i}] must be an object")
        unknown = sorted(set(item) - _DEP_FIELDS)
        if unknown:
            raise SchemaError(f"unknown dependency field {unknown[0]!r}")
        dep_name = item.get("name")
        if not isinstance(dep_name, str) or not NAME_RE.match(dep_name):
            raise SchemaError(f"dependencies[{i}].name invalid: {dep_name!r}")
        dependencies.append(Dependency(dep_name, parse_range(item.get("range", ""))))

    contents = doc.get("contents", {})
    if not isinstance(contents, dict):
        raise SchemaError("'contents' must be an object")
    unknown = sorted(set(contents) - _CONTENT_FIELDS)
    if unknown:
        raise SchemaError(f"unknown contents field {unknown[0]!r}")
    workflows = _path_list(contents.get("workflows", []), "contents.workflows")
    operators = _path_list(contents.get("operators", []), "contents.operators")
    ui_root = contents.get("ui")
    if ui_root is not None:
        check_relative_path(ui_root)

    return ExtensionManifest(
        name=name, version=version, dependencies=tuple(dependencies),
        workflows=workflows, operators=operators, ui_root=ui_root)


def _path_list(value, label: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(p, str) for p in value):
        raise SchemaError(f"'{label}' must be a list of strings")
    if len(set(value)) != len(value):
        raise SchemaError(f"'{label}' has duplicate entries")
    return tuple(check_relative_path(p) for p in value)


def manifest_to_json(manifest: ExtensionManifest) -> dict:
    doc: dict = {"name": manifest.name, "version": manifest.version_text}
    if manifest.dependencies:
        doc["dependencies"] = [{"name": d.name, "range": str(d.range)
                                if str(d.range) != "*" else ""}
                               for d in manifest.dependencies]
    contents: dict = {}
    if manifest.workflows:
        contents["workflows"] = list(manifest.workflows)
    if manifest.operators:
        contents["operators"] = list(manifest.operators)
    if manifest.ui_root is not None:
        contents["ui"] = manifest.ui_root
    if contents:
        doc["contents"] = contents
    return doc
