"""Three-valued outcomes and their aggregation.

Matched (+1), Unknown (0) and Mismatched (-1) form a strong Kleene lattice
ordered Mismatched < Unknown < Matched: conjunction is ``min``, disjunction
is ``max``, negation flips the sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable


class VerdictState(IntEnum):
    MATCHED = 1
    UNKNOWN = 0
    MISMATCHED = -1

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    VerdictState.MATCHED: "matched",
    VerdictState.UNKNOWN: "unknown",
    VerdictState.MISMATCHED: "mismatched",
}
_BY_LABEL = {label: state for state, label in _LABELS.items()}


class EmptyInput(ValueError):
    """Raised when aggregating an empty verdict list."""


@dataclass(frozen=True)
class Verdict:
    state: VerdictState
    detail: str | None = None

    @staticmethod
    def matched() -> "Verdict":
        return Verdict(VerdictState.MATCHED)

    @staticmethod
    def unknown(detail: str | None = None) -> "Verdict":
        return Verdict(VerdictState.UNKNOWN, detail)

    @staticmethod
    def mismatched(detail: str | None = None) -> "Verdict":
        return Verdict(VerdictState.MISMATCHED, detail)

    @staticmethod
    def from_label(label: str, detail: str | None = None) -> "Verdict":
        return Verdict(_BY_LABEL[label], detail)

    @property
    def label(self) -> str:
        return self.state.label


def kleene_and(a: Verdict, b: Verdict) -> Verdict:
    return a if a.state <= b.state else b


def kleene_or(a: Verdict, b: Verdict) -> Verdict:
    return a if a.state >= b.state else b


def kleene_not(a: Verdict) -> Verdict:
    return Verdict(VerdictState(-a.state), a.detail)


def aggregate(verdicts: Iterable[Verdict]) -> Verdict:
    """Final outcome over many evaluations of the same program.

    Any mismatch wins; otherwise one positive match suffices (unknowns are
    acceptable); only an all-unknown run stays unknown.
    """
    items = list(verdicts)
    if not items:
        raise EmptyInput("aggregate requires at least one verdict")
    for v in items:
        if v.state is VerdictState.MISMATCHED:
            return v
    for v in items:
        if v.state is VerdictState.MATCHED:
            return v
    return Verdict.unknown("all evaluations returned unknown")
