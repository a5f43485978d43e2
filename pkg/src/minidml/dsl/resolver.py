"""Binding of ``source("...") as alias`` imports to namespaces.

Library paths such as ``nn/layers/affine.dml`` bind to the builtin layer and
optimizer namespaces. Any other path is read as a script file (relative to
the importing script) and resolved recursively; cycles are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Union

from ..errors import DSLSyntaxError, ImportResolutionError
from . import nodes as N
from .builtins import LIBRARY, LibraryNamespace
from .parser import parse


@dataclass
class ResolvedProgram:
    """A parsed program with every import alias bound to a namespace."""

    program: N.Program
    namespaces: dict = field(default_factory=dict)  # alias -> LibraryNamespace | ResolvedProgram
    path: str | None = None

    @property
    def functions(self) -> dict[str, N.FunctionDef]:
        return self.program.functions


RegistryEntry = Union[LibraryNamespace, N.Program, str]


def _key(path: str, base: Path | None) -> str:
    p = Path(path)
    if not p.is_absolute() and base is not None:
        p = base / p
    return str(p.resolve())


def resolve_imports(program: N.Program, module_registry: Mapping[str, RegistryEntry] | None = None,
                    path=None, _stack: tuple = ()) -> ResolvedProgram:
    """Bind the imports of ``program``.

    ``module_registry`` maps import paths to a library namespace, a parsed
    program, or script text; it is consulted before the builtin library and
    the file system. ``path`` is the file the program came from, used both to
    resolve relative imports and to detect a script importing itself.
    """
    registry = dict(LIBRARY)
    registry.update(module_registry or {})
    base = Path(path).parent if path is not None else None
    own = _key(str(path), None) if path is not None else None
    stack = _stack + ((own,) if own is not None else ())

    resolved = ResolvedProgram(program, {}, str(path) if path is not None else None)
    for imp in program.imports:
        if imp.alias in resolved.namespaces:
            raise ImportResolutionError(f"line {imp.line}: alias {imp.alias!r} imported twice")
        if imp.path in registry:
            entry = registry[imp.path]
            key = f"registry:{imp.path}"
            if isinstance(entry, LibraryNamespace):
                resolved.namespaces[imp.alias] = entry
                continue
            if key in stack:
                raise ImportResolutionError(f"line {imp.line}: import cycle through {imp.path!r}")
            sub = entry if isinstance(entry, N.Program) else _parse_text(entry, imp.path)
            resolved.namespaces[imp.alias] = resolve_imports(sub, module_registry, None, stack + (key,))
            continue
        key = _key(imp.path, base)
        if key in stack:
            raise ImportResolutionError(f"line {imp.line}: import cycle through {imp.path!r}")
        file = Path(key)
        if not file.is_file():
            raise ImportResolutionError(f"line {imp.line}: cannot resolve import {imp.path!r}")
        sub = _parse_text(file.read_text(encoding="utf-8"), imp.path)
        resolved.namespaces[imp.alias] = resolve_imports(sub, module_registry, file, stack)
    return resolved


def _parse_text(text: str, where: str) -> N.Program:
    try:
        return parse(text)
    except DSLSyntaxError as e:
        raise ImportResolutionError(f"in {where}: {e}") from e
