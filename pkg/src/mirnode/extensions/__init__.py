"""Extension packaging, registry resolution, and atomic installation."""
from .descriptors import descriptor_to_json, parse_operator_descriptor
from .errors import (
    AlreadyInstalled,
    BadSemver,
    Conflict,
    DependencyCycle,
    DigestMismatch,
    ExtensionError,
    ExtensionInUse,
    NotInRegistry,
    NotInstalled,
    PathEscape,
    SanityCheckFailed,
    SchemaError,
    UnsatisfiableConstraint,
)
from .manager import ExtensionManager, InstalledExtension
from .manifest import (
    Dependency,
    ExtensionManifest,
    check_relative_path,
    manifest_to_json,
    parse_manifest,
)
from .package_archive import (
    CHECKSUMS_NAME,
    MANIFEST_NAME,
    build_package_archive,
    read_package_archive,
)
from .registry import (
    EMPTY_REGISTRY,
    IndexEntry,
    Registry,
    RegistryIndex,
    index_from_json,
)
from .resolver import ResolvedPackage, resolve_dependencies
from .semver import (
    Constraint,
    Range,
    format_version,
    parse_range,
    parse_version,
)

__all__ = [
    "AlreadyInstalled",
    "BadSemver",
    "CHECKSUMS_NAME",
    "Conflict",
    "Constraint",
    "Dependency",
    "DependencyCycle",
    "DigestMismatch",
    "EMPTY_REGISTRY",
    "ExtensionError",
    "ExtensionInUse",
    "ExtensionManager",
    "ExtensionManifest",
    "IndexEntry",
    "InstalledExtension",
    "MANIFEST_NAME",
    "NotInRegistry",
    "NotInstalled",
    "PathEscape",
    "Range",
    "Registry",
    "RegistryIndex",
    "ResolvedPackage",
    "SanityCheckFailed",
    "SchemaError",
    "UnsatisfiableConstraint",
    "build_package_archive",
    "check_relative_path",
    "descriptor_to_json",
    "format_version",
    "index_from_json",
    "manifest_to_json",
    "parse_manifest",
    "parse_operator_descriptor",
    "parse_range",
    "parse_version",
    "read_package_archive",
    "resolve_dependencies",
]
