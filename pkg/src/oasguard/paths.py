"""Canonical dot/bracket paths into JSON-like documents.

A path is a sequence of field names and array-wildcard steps, rendered as
``items[].created`` (descend into ``items``, then into every array element,
then read ``created``).  Only the bare ``[]`` suffix is a wildcard; bracketed
parameter names such as ``created[gt]`` are ordinary field names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

WILDCARD = "[]"

_PART_RE = re.compile(r"^(.*?)((?:\[\])*)$")


class PathError(ValueError):
    """Raised when a path string cannot be parsed."""


@dataclass(frozen=True)
class PropertyPath:
    """Immutable path; segments are field names or the ``[]`` wildcard."""

    segments: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise PathError("path must have at least one segment")
        for seg in self.segments:
            if seg != WILDCARD and (not seg or "." in seg or "[]" in seg):
                raise PathError(f"invalid path segment: {seg!r}")

    @classmethod
    def parse(cls, text: str) -> PropertyPath:
        if not text:
            raise PathError("empty path")
        segments: list[str] = []
        for part in text.split("."):
            m = _PART_RE.match(part)
            if m is None:  # pragma: no cover - regex always matches
                raise PathError(f"unparseable path part: {part!r}")
            name, brackets = m.group(1), m.group(2)
            if not name and not brackets:
                raise PathError(f"empty path part in {text!r}")
            if name:
                segments.append(name)
            segments.extend(WILDCARD for _ in range(len(brackets) // 2))
        return cls(tuple(segments))

    def render(self) -> str:
        out: list[str] = []
        for seg in self.segments:
            if seg == WILDCARD:
                out.append(WILDCARD)
            else:
                if out:
                    out.append(".")
                out.append(seg)
        return "".join(out)

    def child(self, segment: str) -> PropertyPath:
        return PropertyPath(self.segments + (segment,))

    @property
    def leaf_name(self) -> str | None:
        """Last named (non-wildcard) segment, if any."""
        for seg in reversed(self.segments):
            if seg != WILDCARD:
                return seg
        return None

    def has_wildcard(self) -> bool:
        return WILDCARD in self.segments

    def __str__(self) -> str:
        return self.render()
