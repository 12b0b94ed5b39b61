"""Extension manager: verified, dependency-resolved, all-or-nothing installs.

Every check (archive digests, manifest schema, workflow validation,
descriptor schema, ownership conflicts) runs before any byte of platform
state changes; the commit phase then extracts each package into a staging
directory and swaps it in. Installs are globally serialized; readers only
ever see fully committed state.
"""
from __future__ import annotations

import json
import shutil
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from ..workflow import (
    OperatorRegistry,
    WorkflowDefinition,
    builtin_registry,
    definition_from_json,
    definition_to_json,
    validate_definition,
)
from ..workflow.errors import WorkflowError
from .errors import (
    AlreadyInstalled,
    Conflict,
    ExtensionInUse,
    NotInRegistry,
    NotInstalled,
    SanityCheckFailed,
    SchemaError,
)
from .descriptors import descriptor_to_json, parse_operator_descriptor
from .manifest import ExtensionManifest, manifest_to_json
from .package_archive import read_package_archive
from .registry import EMPTY_REGISTRY, Registry
from .resolver import ResolvedPackage, resolve_dependencies
from .semver import parse_version

_SCHEMA = """
CREATE TABLE IF NOT EXISTS extensions (
    name TEXT PRIMARY KEY,
    version TEXT NOT NULL,
    manifest_json TEXT NOT NULL,
    installed_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS ext_workflows (
    workflow_name TEXT PRIMARY KEY,
    extension TEXT NOT NULL,
    definition_json TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS ext_operators (
    operator_name TEXT PRIMARY KEY,
    extension TEXT NOT NULL,
    descriptor_json TEXT NOT NULL
);
"""


@dataclass(frozen=True)
class InstalledExtension:
    name: str
    version: str
    workflows: tuple[str, ...]
    operators: tuple[str, ...]
    ui_root: str | None
    installed_at: str

    def to_json(self) -> dict:
        return {"name": self.name, "version": self.version,
                "workflows": list(self.workflows),
                "operators": list(self.operators),
                "ui_root": self.ui_root, "installed_at": self.installed_at}


class _RegistryView:
    """Base operators plus the plan's staged descriptors, for validation."""

    def __init__(self, base: OperatorRegistry, staged: dict):
        self._base = base
        self._staged = staged

    def find(self, name: str):
        return self._staged.get(name) or self._base.find(name)


class ExtensionManager:
    def __init__(self, db, ext_root: str | Path,
                 operator_registry: OperatorRegistry | None = None,
                 registry: Registry | None = None,
                 active_workflows=None):
        self.db = db
        self.ext_root = Path(ext_root)
        self.ext_root.mkdir(parents=True, exist_ok=True)
        self.registry = registry if registry is not None else EMPTY_REGISTRY
        self.operators = operator_registry if operator_registry is not None \
            else builtin_registry()
        self._builtin_names = set(self.operators.names())
        self._active_workflows = active_workflows or (lambda: set())
        self._install_lock = threading.Lock()
        db.ensure_schema(_SCHEMA)
        self._register_installed_operators()

    # -- queries ------------------------------------------------------------------

    def installed_map(self) -> dict[str, str]:
        return {row["name"]: row["version"]
                for row in self.db.query("SELECT name, version FROM extensions")}

    def list_installed(self) -> list[InstalledExtension]:
        return [self._record(row["name"]) for row in
                self.db.query("SELECT name FROM extensions ORDER BY name")]

    def get(self, name: str) -> InstalledExtension:
        row = self.db.query_one("SELECT name FROM extensions WHERE name = ?",
                                (name,))
        if row is None:
            raise NotInstalled(name)
        return self._record(name)

    def workflow(self, workflow_name: str) -> WorkflowDefinition:
        row = self.db.query_one(
            "SELECT definition_json FROM ext_workflows WHERE workflow_name = ?",
            (workflow_name,))
        if row is None:
            raise NotInstalled(f"workflow {workflow_name!r}")
        return definition_from_json(json.loads(row["definition_json"]))

    def list_workflows(self) -> list[tuple[str, str]]:
        return [(row["workflow_name"], row["extension"]) for row in
                self.db.query("SELECT workflow_name, extension FROM"
                              " ext_workflows ORDER BY workflow_name")]

    def ui_root(self, name: str) -> Path | None:
        record = self.get(name)
        if record.ui_root is None:
            return None
        return self.ext_root / name / record.ui_root

    # -- installs -----------------------------------------------------------------

    def install_upload(self, data: bytes) -> list[InstalledExtension]:
        with self._install_lock:
            manifest, files = read_package_archive(data)
            plan = resolve_dependencies(manifest, self.installed_map(),
                                        self.registry)
            archives = self._fetch_plan(plan, {manifest.name: (manifest, files)})
            return self._install_plan(plan, archives)

    def install_from_registry(self, name: str,
                              version: str | None = None) -> list[InstalledExtension]:
        with self._install_lock:
            if version is None:
                known = self.registry.versions(name)
                if not known:
                    raise NotInRegistry(name)
                target = known[0]
            else:
                target = parse_version(version)
            manifest, files = read_package_archive(
                self.registry.archive_bytes(name, target))
            if manifest.name != name or manifest.version != target:
                raise SchemaError(
                    f"archive for {name} declares {manifest.name}"
                    f" {manifest.version_text}")
            plan = resolve_dependencies(manifest, self.installed_map(),
                                        self.registry)
            archives = self._fetch_plan(plan, {name: (manifest, files)})
            return self._install_plan(plan, archives)

    def uninstall(self, name: str) -> None:
        with self._install_lock:
            record = self.get(name)
            for other_name, version in sorted(self.installed_map().items()):
                if other_name == name:
                    continue
                manifest = self._load_manifest(other_name)
                if any(dep.name == name for dep in manifest.dependencies):
                    raise ExtensionInUse(
                        f"{other_name} {version} depends on {name}")
            active = self._active_workflows() & set(record.workflows)
            if active:
                raise ExtensionInUse(
                    f"workflows in use by active runs: {sorted(active)}")
            with self.db.tx() as conn:
                conn.execute("DELETE FROM extensions WHERE name = ?", (name,))
                conn.execute("DELETE FROM ext_workflows WHERE extension = ?",
                             (name,))
                conn.execute("DELETE FROM ext_operators WHERE extension = ?",
                             (name,))
            for operator_name in record.operators:
                self.operators.remove(operator_name)
            shutil.rmtree(self.ext_root / name, ignore_errors=True)

    # -- internals ------------------------------------------------------------------

    def _fetch_plan(self, plan: list[ResolvedPackage], seed: dict) -> dict:
        archives = dict(seed)
        for item in plan:
            if item.reused or item.name in archives:
                continue
            blob = self.registry.archive_bytes(item.name,
                                               parse_version(item.version))
            archives[item.name] = read_package_archive(blob)
        return archives

    def _install_plan(self, plan: list[ResolvedPackage],
                      archives: dict) -> list[InstalledExtension]:
        installed = self.installed_map()
        root = plan[-1]
        if installed.get(root.name) == root.version:
            raise AlreadyInstalled(f"{root.name} {root.version}")
        to_install = [item for item in plan if not item.reused
                      and installed.get(item.name) != item.version]

        # sanity phase: nothing below may mutate platform state
        replacing = {item.name for item in to_install}
        staged_ops: dict[str, object] = {}
        validated: list[tuple[ExtensionManifest, dict, dict, dict]] = []
        staged_workflow_owner: dict[str, str] = {}
        for item in to_install:
            manifest, files = archives[item.name]
            ops: dict[str, object] = {}
            for path in manifest.operators:
                try:
                    spec = parse_operator_descriptor(files[path])
                except SchemaError as exc:
                    raise SanityCheckFailed(exc) from exc
                self._check_operator_ownership(spec.name, manifest.name,
                                               replacing, staged_ops)
                ops[spec.name] = spec
                staged_ops[spec.name] = spec
            view = _RegistryView(self.operators, staged_ops)
            workflows: dict[str, dict] = {}
            for path in manifest.workflows:
                try:
                    defn = validate_definition(
                        definition_from_json(json.loads(files[path].decode("utf-8"))),
                        view)
                except (ValueError, WorkflowError) as exc:
                    raise SanityCheckFailed(exc) from exc
                self._check_workflow_ownership(defn.name, manifest.name,
                                               replacing, staged_workflow_owner)
                staged_workflow_owner[defn.name] = manifest.name
                workflows[defn.name] = definition_to_json(defn)
            validated.append((manifest, files, ops, workflows))

        # commit phase
        records = []
        for manifest, files, ops, workflows in validated:
            self._commit_one(manifest, files, ops, workflows)
            records.append(self._record(manifest.name))
        return records

    def _check_operator_ownership(self, operator_name: str, extension: str,
                                  replacing: set, staged_ops: dict) -> None:
        if operator_name in self._builtin_names:
            raise Conflict(f"operator {operator_name!r} is built in")
        if operator_name in staged_ops:
            raise Conflict(f"operator {operator_name!r} contributed twice"
                           " in one install")
        row = self.db.query_one(
            "SELECT extension FROM ext_operators WHERE operator_name = ?",
            (operator_name,))
        if row and row["extension"] != extension \
                and row["extension"] not in replacing:
            raise Conflict(f"operator {operator_name!r} is owned by"
                           f" {row['extension']}")

    def _check_workflow_ownership(self, workflow_name: str, extension: str,
                                  replacing: set, staged: dict) -> None:
        owner = staged.get(workflow_name)
        if owner is not None and owner != extension:
            raise Conflict(f"workflow {workflow_name!r} contributed twice"
                           " in one install")
        row = self.db.query_one(
            "SELECT extension FROM ext_workflows WHERE workflow_name = ?",
            (workflow_name,))
        if row and row["extension"] != extension \
                and row["extension"] not in replacing:
            raise Conflict(f"workflow {workflow_name!r} is owned by"
                           f" {row['extension']}")

    def _commit_one(self, manifest: ExtensionManifest, files: dict,
                    ops: dict, workflows: dict) -> None:
        staging = self.ext_root / f".staging-{uuid.uuid4().hex}"
        staging.mkdir(parents=True, exist_ok=True)
        for path, blob in files.items():
            target = staging / path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(blob)
        final = self.ext_root / manifest.name
        stale = None
        if final.exists():
            stale = self.ext_root / f".old-{uuid.uuid4().hex}"
            final.rename(stale)
        staging.rename(final)
        if stale is not None:
            shutil.rmtree(stale, ignore_errors=True)

        old_operators = [row["operator_name"] for row in self.db.query(
            "SELECT operator_name FROM ext_operators WHERE extension = ?",
            (manifest.name,))]
        with self.db.tx() as conn:
            conn.execute(
                "INSERT INTO extensions (name, version, manifest_json,"
                " installed_at) VALUES (?, ?, ?, ?) ON CONFLICT(name) DO UPDATE"
                " SET version = excluded.version,"
                " manifest_json = excluded.manifest_json,"
                " installed_at = excluded.installed_at",
                (manifest.name, manifest.version_text,
                 json.dumps(manifest_to_json(manifest), sort_keys=True),
                 datetime.now(timezone.utc).isoformat()))
            conn.execute("DELETE FROM ext_workflows WHERE extension = ?",
                         (manifest.name,))
            conn.execute("DELETE FROM ext_operators WHERE extension = ?",
                         (manifest.name,))
            for workflow_name, doc in sorted(workflows.items()):
                conn.execute(
                    "INSERT INTO ext_workflows (workflow_name, extension,"
                    " definition_json) VALUES (?, ?, ?)",
                    (workflow_name, manifest.name,
                     json.dumps(doc, sort_keys=True)))
            for operator_name, spec in sorted(ops.items()):
                conn.execute(
                    "INSERT INTO ext_operators (operator_name, extension,"
                    " descriptor_json) VALUES (?, ?, ?)",
                    (operator_name, manifest.name,
                     json.dumps(descriptor_to_json(spec), sort_keys=True)))
        for operator_name in old_operators:
            if operator_name not in ops:
                self.operators.remove(operator_name)
        for operator_name, spec in ops.items():
            self.operators.register(spec)

    def _record(self, name: str) -> InstalledExtension:
        row = self.db.query_one(
            "SELECT version, manifest_json, installed_at FROM extensions"
            " WHERE name = ?", (name,))
        manifest = _manifest_from_json(row["manifest_json"])
        workflows = tuple(r["workflow_name"] for r in self.db.query(
            "SELECT workflow_name FROM ext_workflows WHERE extension = ?"
            " ORDER BY workflow_name", (name,)))
        operators = tuple(r["operator_name"] for r in self.db.query(
            "SELECT operator_name FROM ext_operators WHERE extension = ?"
            " ORDER BY operator_name", (name,)))
        return InstalledExtension(
            name=name, version=row["version"], workflows=workflows,
            operators=operators, ui_root=manifest.ui_root,
            installed_at=row["installed_at"])

    def _load_manifest(self, name: str) -> ExtensionManifest:
        row = self.db.query_one(
            "SELECT manifest_json FROM extensions WHERE name = ?", (name,))
        return _manifest_from_json(row["manifest_json"])

    def _register_installed_operators(self) -> None:
        for row in self.db.query("SELECT descriptor_json FROM ext_operators"
                                 " ORDER BY operator_name"):
            spec = parse_operator_descriptor(row["descriptor_json"].encode())
            self.operators.register(spec)


def _manifest_from_json(raw: str) -> ExtensionManifest:
    from .manifest import parse_manifest

    return parse_manifest(raw.encode("utf-8"))
