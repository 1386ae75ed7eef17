"""Measurement machinery: precision/recall over human judgments, variable
grouping, and overlap analysis against an external invariant dump.

Correctness judgments are an input file, never computed here; this module
only does the arithmetic.  Fractional TP/FP/FN are supported because
reference results are often means over repeated runs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .mining import Constraint


class MissingJudgment(KeyError):
    pass


@dataclass(frozen=True)
class GroundTruthEntry:
    operation: str
    variables: tuple[str, ...]  # qualified, e.g. ("input.limit", "return.items[]")
    description: str
    category: str = "Uncategorized"


@dataclass(frozen=True)
class GroundTruth:
    entries: tuple[GroundTruthEntry, ...]

    def __post_init__(self) -> None:
        seen = set()
        for e in self.entries:
            key = (e.operation, tuple(sorted(e.variables)), e.description)
            if key in seen:
                raise ValueError(f"duplicate ground-truth entry: {key}")
            seen.add(key)

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        data = json.loads(text)
        return cls(
            tuple(
                GroundTruthEntry(
                    operation=raw["operation"],
                    variables=tuple(raw["variables"]),
                    description=raw["description"],
                    category=raw.get("category", "Uncategorized"),
                )
                for raw in data["entries"]
            )
        )


_VARIABLE_TOKEN_RE = re.compile(r"(?:input|return)\.[A-Za-z0-9_$.\[\]-]*[A-Za-z0-9_$\]]")


@dataclass(frozen=True)
class ExternalInvariant:
    operation: str
    variables: tuple[str, ...]
    text: str

    def __post_init__(self) -> None:
        if not self.variables:
            raise ValueError("an invariant must reference at least one variable")


def parse_invariant_text(operation: str, text: str) -> ExternalInvariant:
    """Extract the variable set from a Daikon-style invariant string."""
    tokens = sorted(set(_VARIABLE_TOKEN_RE.findall(text)))
    return ExternalInvariant(operation=operation, variables=tuple(tokens), text=text)


def external_invariants_from_json(text: str) -> list[ExternalInvariant]:
    data = json.loads(text)
    out = []
    for raw in data["invariants"]:
        if "variables" in raw:
            out.append(
                ExternalInvariant(raw["operation"], tuple(raw["variables"]), raw.get("text", ""))
            )
        else:
            out.append(parse_invariant_text(raw["operation"], raw["text"]))
    return out


def variable_key(variables: tuple[str, ...] | list[str]) -> tuple[str, ...]:
    """Canonical grouping key: the sorted, case-sensitive variable set."""
    return tuple(sorted(set(variables)))


def group_by_variables(items) -> dict[tuple[str, ...], list]:
    """Group constraints or invariants by their exact variable set."""
    groups: dict[tuple[str, ...], list] = {}
    for item in items:
        if isinstance(item, Constraint):
            key = variable_key(item.variable_names())
        elif isinstance(item, ExternalInvariant):
            key = variable_key(item.variables)
        elif isinstance(item, GroundTruthEntry):
            key = variable_key(item.variables)
        else:
            raise TypeError(f"cannot group {type(item).__name__}")
        groups.setdefault(key, []).append(item)
    return groups


@dataclass(frozen=True)
class Metrics:
    tp: float
    fp: float
    fn: float
    precision: float | None
    recall: float | None
    f1: float | None

    @classmethod
    def from_counts(cls, tp: float, fp: float, fn: float) -> "Metrics":
        precision = tp / (tp + fp) if tp + fp > 0 else None
        recall = tp / (tp + fn) if tp + fn > 0 else None
        f1 = None
        if precision is not None and recall is not None and precision + recall > 0:
            f1 = 2 * precision * recall / (precision + recall)
        return cls(tp=tp, fp=fp, fn=fn, precision=precision, recall=recall, f1=f1)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "precision_defined": self.precision is not None,
            "recall_defined": self.recall is not None,
        }


def macro_average(cells: list[float]) -> float:
    """Unweighted mean over per-group metric cells (reference-table totals)."""
    if not cells:
        raise ValueError("macro_average needs at least one cell")
    return sum(cells) / len(cells)


def score(
    mined: list[Constraint],
    gt: GroundTruth,
    judgments: dict[str, dict],
) -> Metrics:
    """Precision/recall arithmetic over human-supplied judgments.

    ``judgments`` maps constraint id to {"verdict": "correct"|"incorrect",
    "matches": [ground-truth indices]}; every mined id must be judged.
    A ground-truth entry is covered when some correct mined constraint
    either lists its index or shares its exact variable set.
    """
    tp = 0.0
    fp = 0.0
    covered: set[int] = set()
    gt_by_key: dict[tuple[str, ...], list[int]] = {}
    for i, entry in enumerate(gt.entries):
        gt_by_key.setdefault(variable_key(entry.variables), []).append(i)

    for constraint in mined:
        judgment = judgments.get(constraint.id)
        if judgment is None:
            raise MissingJudgment(constraint.id)
        verdict = judgment.get("verdict")
        if verdict == "correct":
            tp += 1
            for idx in judgment.get("matches", ()):
                covered.add(int(idx))
            key = variable_key(constraint.variable_names())
            for idx in gt_by_key.get(key, ()):
                if gt.entries[idx].operation == constraint.operation:
                    covered.add(idx)
        elif verdict == "incorrect":
            fp += 1
        else:
            raise MissingJudgment(f"{constraint.id}: verdict must be correct|incorrect")
    fn = float(len(gt.entries) - len(covered))
    return Metrics.from_counts(tp, fp, fn)


@dataclass(frozen=True)
class OverlapPartition:
    shared: tuple[tuple[str, ...], ...]
    unique_to_mined: tuple[tuple[str, ...], ...]
    unique_to_external: tuple[tuple[str, ...], ...]

    def to_dict(self) -> dict:
        return {
            "shared": [list(k) for k in self.shared],
            "unique_to_mined": [list(k) for k in self.unique_to_mined],
            "unique_to_external": [list(k) for k in self.unique_to_external],
            "counts": {
                "shared": len(self.shared),
                "unique_to_mined": len(self.unique_to_mined),
                "unique_to_external": len(self.unique_to_external),
            },
        }


def overlap(mined: list[Constraint], external: list[ExternalInvariant]) -> OverlapPartition:
    """Partition variable-set groups into shared / unique-to-either-side.

    Which side is "better" on shared groups is a recorded human judgment,
    not computed here.
    """
    mined_keys = set(group_by_variables(mined))
    external_keys = set(group_by_variables(external))
    return OverlapPartition(
        shared=tuple(sorted(mined_keys & external_keys)),
        unique_to_mined=tuple(sorted(mined_keys - external_keys)),
        unique_to_external=tuple(sorted(external_keys - mined_keys)),
    )
