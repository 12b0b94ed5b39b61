class ExtensionError(Exception):
    """Base for extension packaging, resolution, and install errors."""


class SchemaError(ExtensionError):
    """Manifest, descriptor, or index document violates the strict schema."""


class BadSemver(ExtensionError):
    """Version or constraint string is not strict MAJOR.MINOR.PATCH."""


class PathEscape(ExtensionError):
    """Content path is absolute or traverses outside the archive."""


class UnsatisfiableConstraint(ExtensionError):
    """No version assignment satisfies every constraint reaching a package."""


class DependencyCycle(ExtensionError):
    """The chosen packages depend on each other in a cycle."""


class NotInRegistry(ExtensionError):
    """A required package or version has no registry entry."""


class DigestMismatch(ExtensionError):
    """Fetched or contained bytes do not hash to the declared digest."""


class SanityCheckFailed(ExtensionError):
    """A pre-install check failed; carries the inner error."""

    def __init__(self, inner: Exception):
        super().__init__(f"{type(inner).__name__}: {inner}")
        self.inner = inner


class AlreadyInstalled(ExtensionError):
    """The same name and version is already installed."""


class Conflict(ExtensionError):
    """A contributed workflow or operator name is owned by another extension."""


class NotInstalled(ExtensionError):
    """No installed extension has that name."""


class ExtensionInUse(ExtensionError):
    """Uninstall refused: active runs or installed dependents reference it."""
