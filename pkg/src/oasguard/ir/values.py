"""JSON-like runtime values and path resolution over them.

``ABSENT`` marks a path that is not present in a document; it is distinct
from ``None`` (present with a JSON ``null``).
"""

from __future__ import annotations

from typing import Any

from ..paths import WILDCARD, PropertyPath


class _Absent:
    _instance = None

    def __new__(cls) -> "_Absent":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ABSENT"

    def __bool__(self) -> bool:
        return False


ABSENT = _Absent()

Value = Any  # None | bool | int | float | str | list | dict | ABSENT


def is_number(v: Value) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def get_at_path(root: Value, path: PropertyPath) -> Value:
    """Resolve a wildcard-free path; ABSENT when any step is missing."""
    current = root
    for seg in path.segments:
        if seg == WILDCARD:
            raise ValueError("get_at_path does not accept wildcard paths")
        if not isinstance(current, dict) or seg not in current:
            return ABSENT
        current = current[seg]
    return current


def collect_at_path(root: Value, path: PropertyPath) -> list[Value]:
    """Resolve a path that may contain wildcards; missing leaves are dropped."""
    results: list[Value] = []

    def walk(value: Value, segments: tuple[str, ...]) -> None:
        if not segments:
            results.append(value)
            return
        head, rest = segments[0], segments[1:]
        if head == WILDCARD:
            if isinstance(value, list):
                for item in value:
                    walk(item, rest)
            return
        if isinstance(value, dict) and head in value:
            walk(value[head], rest)

    walk(root, path.segments)
    return results


def build_at_path(path: PropertyPath, leaf: Value) -> Value:
    """Smallest document containing ``leaf`` at ``path``.

    Wildcard segments become single-element arrays; everything else is a
    nested object.  Used by the example verifier to synthesize a minimal
    response around a documented example value.
    """
    value = leaf
    for seg in reversed(path.segments):
        if seg == WILDCARD:
            value = [value]
        else:
            value = {seg: value}
    return value
