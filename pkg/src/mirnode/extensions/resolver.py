"""Dependency resolution: highest-version-first backtracking search.

Semantics (deterministic):
  - the root package is pre-assigned at its own version;
  - pending packages are resolved in lexicographic name order;
  - candidates for a package are its installed version first (reuse is
    preferred over any reinstall), then index versions highest-first;
  - the first complete assignment satisfying every reaching constraint wins,
    so each package gets the highest workable version subject to choices made
    for alphabetically-earlier packages;
  - reused installed packages contribute no dependencies of their own (the
    installed set is kept dependency-closed by install/uninstall).

The returned plan is topologically ordered (dependencies first, root last)
and includes reused packages flagged as such; installers skip those.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DependencyCycle, NotInRegistry, UnsatisfiableConstraint
from .manifest import ExtensionManifest
from .registry import Registry
from .semver import Range, Version, format_version, parse_version


@dataclass(frozen=True)
class ResolvedPackage:
    name: str
    version: str
    reused: bool = False


def resolve_dependencies(root: ExtensionManifest, installed: dict[str, str],
                         registry: Registry) -> list[ResolvedPackage]:
    assignment: dict[str, tuple[Version, bool]] = {root.name: (root.version, False)}
    constraints: dict[str, list[tuple[str, Range]]] = {}
    first_failure: list[tuple[str, str, str]] = []  # (kind, name, detail)

    def note_failure(kind: str, name: str, extra: tuple[str, Range] | None = None):
        if first_failure:
            return
        reaching = list(constraints.get(name, []))
        if extra is not None:
            reaching.append(extra)
        detail = ", ".join(f"{rng} (from {origin})" for origin, rng in reaching)
        first_failure.append((kind, name, detail))

    def candidates(name: str) -> list[tuple[Version, bool]]:
        out: list[tuple[Version, bool]] = []
        if name in installed:
            out.append((parse_version(installed[name]), True))
        for version in registry.versions(name):
            if not any(version == v for v, _ in out):
                out.append((version, False))
        return out

    def search(pending: frozenset[str]) -> bool:
        if not pending:
            return True
        name = min(pending)
        reaching = constraints.get(name, [])
        options = candidates(name)
        viable = [(v, reused) for v, reused in options
                  if all(rng.accepts(v) for _, rng in reaching)]
        if not viable:
            note_failure("unknown" if not options else "conflict", name)
            return False
        rest = pending - {name}
        for version, reused in viable:
            assignment[name] = (version, reused)
            deps = () if reused else registry.manifest(name, version).dependencies
            appended: list[str] = []
            fresh: set[str] = set()
            ok = True
            for dep in deps:
                if dep.name in assignment:
                    held, _ = assignment[dep.name]
                    if not dep.range.accepts(held):
                        note_failure("conflict", dep.name, (name, dep.range))
                        ok = False
                        break
                    constraints.setdefault(dep.name, []).append((name, dep.range))
                    appended.append(dep.name)
                else:
                    constraints.setdefault(dep.name, []).append((name, dep.range))
                    appended.append(dep.name)
                    if dep.name not in rest:
                        fresh.add(dep.name)
            if ok and search(rest | fresh):
                return True
            for dep_name in appended:
                constraints[dep_name].pop()
                if not constraints[dep_name]:
                    del constraints[dep_name]
            del assignment[name]
        return False

    initial: set[str] = set()
    for dep in root.dependencies:
        if dep.name == root.name:
            if not dep.range.accepts(root.version):
                raise UnsatisfiableConstraint(
                    f"{root.name}: {dep.range} (from {root.name}) excludes its"
                    f" own version {root.version_text}")
            constraints.setdefault(root.name, []).append((root.name, dep.range))
            continue
        constraints.setdefault(dep.name, []).append((root.name, dep.range))
        initial.add(dep.name)

    if not search(frozenset(initial)):
        kind, name, detail = first_failure[0]
        if kind == "unknown":
            raise NotInRegistry(f"{name} (required via {detail or 'root'})")
        raise UnsatisfiableConstraint(f"{name}: no version satisfies {detail}")

    return _ordered(root, assignment, installed, registry)


def _ordered(root: ExtensionManifest, assignment: dict[str, tuple[Version, bool]],
             installed: dict[str, str], registry: Registry) -> list[ResolvedPackage]:
    def deps_of(name: str) -> list[str]:
        version, reused = assignment[name]
        if reused:
            return []
        manifest = root if name == root.name else registry.manifest(name, version)
        return [d.name for d in manifest.dependencies if d.name in assignment]

    indegree = {name: 0 for name in assignment}
    dependents: dict[str, list[str]] = {name: [] for name in assignment}
    for name in assignment:
        for dep_name in deps_of(name):
            if dep_name == name:
                raise DependencyCycle(f"{name} -> {name}")
            indegree[name] += 1
            dependents[dep_name].append(name)

    order: list[str] = []
    ready = sorted(n for n, d in indegree.items() if d == 0)
    while ready:
        name = ready.pop(0)
        order.append(name)
        for dependent in dependents[name]:
            indegree[dependent] -= 1
            if indegree[dependent] == 0:
                ready.append(dependent)
                ready.sort()
    if len(order) != len(assignment):
        cycle = sorted(set(assignment) - set(order))
        raise DependencyCycle(" -> ".join(cycle))
    return [
        ResolvedPackage(name, format_version(assignment[name][0]),
                        assignment[name][1])
        for name in order
    ]
