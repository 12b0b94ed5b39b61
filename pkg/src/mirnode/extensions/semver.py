"""Strict MAJOR.MINOR.PATCH versions and the four-operator constraint language.

A range is a space-separated conjunction of simple constraints:

    simple  :=  ">=" version | "<" version | "^" version | version (exact)

Caret follows the usual convention: ^1.2.3 means >=1.2.3 <2.0.0; with a zero
major the first non-zero field is the breaking one (^0.2.3 -> <0.3.0,
^0.0.3 -> <0.0.4). The empty range accepts every version.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import BadSemver

_VERSION_RE = re.compile(r"^(0|[1-9]\d*)\.(0|[1-9]\d*)\.(0|[1-9]\d*)$")

Version = tuple[int, int, int]


def parse_version(text: str) -> Version:
    m = _VERSION_RE.match(text) if isinstance(text, str) else None
    if m is None:
        raise BadSemver(f"version {text!r} is not MAJOR.MINOR.PATCH")
    return (int(m.group(1)), int(m.group(2)), int(m.group(3)))


def format_version(version: Version) -> str:
    return "{}.{}.{}".format(*version)


@dataclass(frozen=True)
class Constraint:
    op: str          # ">=", "<", "^", "=="
    version: Version

    def accepts(self, version: Version) -> bool:
        if self.op == ">=":
            return version >= self.version
        if self.op == "<":
            return version < self.version
        if self.op == "==":
            return version == self.version
        return self.version <= version < _caret_ceiling(self.version)

    def __str__(self) -> str:
        op = {"==": "", "^": "^"}.get(self.op, self.op)
        return f"{op}{format_version(self.version)}"


def _caret_ceiling(floor: Version) -> Version:
    major, minor, patch = floor
    if major > 0:
        return (major + 1, 0, 0)
    if minor > 0:
        return (0, minor + 1, 0)
    return (0, 0, patch + 1)


@dataclass(frozen=True)
class Range:
    """Conjunction of constraints; empty means 'any version'."""
    constraints: tuple[Constraint, ...] = ()

    def accepts(self, version: Version) -> bool:
        return all(c.accepts(version) for c in self.constraints)

    def __str__(self) -> str:
        return " ".join(str(c) for c in self.constraints) or "*"


def parse_range(text: str) -> Range:
    if not isinstance(text, str):
        raise BadSemver(f"range must be a string, got {type(text).__name__}")
    parts = text.split()
    constraints = []
    for part in parts:
        if part.startswith(">="):
            constraints.append(Constraint(">=", parse_version(part[2:])))
        elif part.startswith("<"):
            constraints.append(Constraint("<", parse_version(part[1:])))
        elif part.startswith("^"):
            constraints.append(Constraint("^", parse_version(part[1:])))
        else:
            constraints.append(Constraint("==", parse_version(part)))
    return Range(tuple(constraints))
