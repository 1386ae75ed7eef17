"""Replay recorded exchanges through validator programs and report mismatches.

Traces are JSON-lines, one request/response pair per line; only 2xx
exchanges are evaluated (the rest are counted and dropped).  Every program
contributes exactly one final verdict, so matched + mismatched + unknown
always equals the number of programs run.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from . import ir
from .ir.serialize import canonical_json
from .paths import PathError, PropertyPath
from .specmodel import ApiSpec

ROOT_CAUSE_FORMAT = "IncompatibleDataFormat"
ROOT_CAUSE_NULLABLE = "ImplicitNullable"
ROOT_CAUSE_INTER_PARAM = "InterParameterDependency"
ROOT_CAUSE_OTHER = "Other"

EXIT_OK = 0
EXIT_TOOL_ERROR = 1
EXIT_MISMATCHES = 2

REPORT_VERSION = 1


class TraceParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"trace line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Exchange:
    operation: str  # "GET /v1/charges"
    request: dict
    status: int
    response_body: ir.Value
    captured_at: str | None = None

    def __post_init__(self) -> None:
        if not (100 <= self.status <= 599):
            raise ValueError(f"implausible HTTP status {self.status}")


@dataclass
class TraceStats:
    total_lines: int = 0
    retained: int = 0
    filtered_non_2xx: int = 0


def parse_trace_line(line: str, line_no: int) -> Exchange:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceParseError(line_no, f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise TraceParseError(line_no, "each line must be an object")
    op = data.get("operation")
    if not isinstance(op, dict) or "method" not in op or "path" not in op:
        raise TraceParseError(line_no, "operation must carry method and path")
    status = data.get("status")
    if not isinstance(status, int):
        raise TraceParseError(line_no, "status must be an integer")
    request = data.get("request")
    if request is None:
        request = {}
    if not isinstance(request, dict):
        raise TraceParseError(line_no, "request must be an object of wire parameters")
    try:
        return Exchange(
            operation=f"{str(op['method']).upper()} {op['path']}",
            request=request,
            status=status,
            response_body=data.get("response_body"),
            captured_at=data.get("captured_at"),
        )
    except ValueError as exc:
        raise TraceParseError(line_no, str(exc)) from exc


def load_traces(path: str | Path) -> tuple[list[Exchange], TraceStats]:
    """Load a trace file, retaining only 2xx exchanges."""
    stats = TraceStats()
    exchanges: list[Exchange] = []
    text = Path(path).read_text()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        stats.total_lines += 1
        exchange = parse_trace_line(line, line_no)
        if 200 <= exchange.status <= 299:
            exchanges.append(exchange)
            stats.retained += 1
        else:
            stats.filtered_non_2xx += 1
    return exchanges, stats


@dataclass(frozen=True)
class ConstraintResult:
    constraint_id: str
    operation: str | None
    per_exchange: tuple[tuple[int, ir.Verdict], ...]
    final: ir.Verdict
    evidence: tuple[int, str] | None  # (exchange index, detail) for mismatches
    meta: dict | None = None


def run(
    programs: list[ir.ValidatorProgram],
    exchanges: list[Exchange],
    *,
    lenient_formats: bool = False,
) -> list[ConstraintResult]:
    """Evaluate each program on every exchange of its operation."""
    by_operation: dict[str, list[tuple[int, Exchange]]] = {}
    for idx, exchange in enumerate(exchanges):
        by_operation.setdefault(exchange.operation, []).append((idx, exchange))

    results: list[ConstraintResult] = []
    for program in sorted(programs, key=lambda p: (p.operation or "", p.constraint_id)):
        if program.operation is None:
            matching = list(enumerate(exchanges))
        else:
            matching = by_operation.get(program.operation, [])
        per_exchange: list[tuple[int, ir.Verdict]] = []
        for idx, exchange in matching:
            verdict = ir.evaluate(
                program,
                exchange.request,
                exchange.response_body,
                lenient_formats=lenient_formats,
            )
            per_exchange.append((idx, verdict))
        if per_exchange:
            final = ir.aggregate([v for _, v in per_exchange])
        else:
            final = ir.Verdict.unknown("no recorded exchanges for this operation")
        evidence = None
        if final.state is ir.VerdictState.MISMATCHED:
            for idx, verdict in per_exchange:
                if verdict.state is ir.VerdictState.MISMATCHED:
                    evidence = (idx, verdict.detail or "mismatched")
                    break
        results.append(
            ConstraintResult(
                constraint_id=program.constraint_id,
                operation=program.operation,
                per_exchange=tuple(per_exchange),
                final=final,
                evidence=evidence,
                meta=program.meta,
            )
        )
    return results


_NULL_DETAIL_RE = re.compile(r"null (?:value|array element) at response\.([\w.\[\]-]+)")
_FORMAT_DETAIL_RE = re.compile(r"(?:type/format|format) check failed")
_ORDERING_KEYWORDS = re.compile(r"\b(sort|order|filter)\w*\b", re.IGNORECASE)


def classify_mismatch(result: ConstraintResult, spec: ApiSpec) -> str:
    """Heuristic root-cause tag for one mismatched result."""
    if result.final.state is not ir.VerdictState.MISMATCHED:
        raise ValueError("classify_mismatch requires a mismatched result")

    # Null evidence anywhere in the run + a spec that never declared the
    # property nullable points at an implicitly-nullable property.
    for _, verdict in result.per_exchange:
        detail = verdict.detail or ""
        null_hit = _NULL_DETAIL_RE.search(detail)
        if null_hit and not _spec_says_nullable(spec, result, null_hit.group(1)):
            return ROOT_CAUSE_NULLABLE

    detail = result.final.detail or ""
    if _FORMAT_DETAIL_RE.search(detail):
        return ROOT_CAUSE_FORMAT

    meta = result.meta or {}
    if meta.get("source") == "ReqResp":
        text = " ".join([meta.get("description", ""), *meta.get("variables", ())])
        if _ORDERING_KEYWORDS.search(text):
            return ROOT_CAUSE_INTER_PARAM
    return ROOT_CAUSE_OTHER


def _spec_says_nullable(spec: ApiSpec, result: ConstraintResult, raw_path: str) -> bool:
    operation = result.operation or ""
    method, _, path = operation.partition(" ")
    try:
        op = spec.operation(method, path)
        parsed = PropertyPath.parse(raw_path)
    except (KeyError, PathError):
        return False
    n = len(parsed.segments)
    for props in op.responses.values():
        for prop in props:
            if prop.path == parsed or prop.path.segments[-n:] == parsed.segments:
                return prop.nullable
    return False


def build_report(
    results: list[ConstraintResult],
    *,
    tool_version: str,
    spec: ApiSpec | None = None,
    trace_stats: TraceStats | None = None,
) -> dict:
    """Assemble the run report: totals, category breakdown, mismatch entries."""
    totals = {"matched": 0, "mismatched": 0, "unknown": 0}
    for r in results:
        totals[r.final.label] += 1

    by_category: dict[str, int] = {}
    mismatches_by_category: dict[str, int] = {}
    mismatches = []
    for r in results:
        category = (r.meta or {}).get("category", "Uncategorized")
        by_category[category] = by_category.get(category, 0) + 1
        if r.final.state is ir.VerdictState.MISMATCHED:
            mismatches_by_category[category] = mismatches_by_category.get(category, 0) + 1
            root_cause = classify_mismatch(r, spec) if spec is not None else ROOT_CAUSE_OTHER
            idx, detail = r.evidence or (-1, "")
            mismatches.append(
                {
                    "constraint_id": r.constraint_id,
                    "operation": r.operation,
                    "category": category,
                    "root_cause": root_cause,
                    "root_cause_is_heuristic": True,
                    "evidence": {"exchange_index": idx, "detail": detail},
                }
            )

    report = {
        "report_version": REPORT_VERSION,
        "tool_version": tool_version,
        "totals": totals,
        "programs_run": len(results),
        "by_category": dict(sorted(by_category.items())),
        "mismatches_by_category": dict(sorted(mismatches_by_category.items())),
        "mismatches": mismatches,
        "results": [
            {
                "constraint_id": r.constraint_id,
                "operation": r.operation,
                "final": r.final.label,
                "detail": r.final.detail,
                "per_exchange": [
                    {"exchange_index": idx, "verdict": v.label, "detail": v.detail}
                    for idx, v in r.per_exchange
                ],
            }
            for r in results
        ],
    }
    if trace_stats is not None:
        report["trace_stats"] = {
            "total_lines": trace_stats.total_lines,
            "retained": trace_stats.retained,
            "filtered_non_2xx": trace_stats.filtered_non_2xx,
        }
    return report


def report_to_text(report: dict) -> str:
    lines = [
        f"programs run : {report['programs_run']}",
        f"matched      : {report['totals']['matched']}",
        f"mismatched   : {report['totals']['mismatched']}",
        f"unknown      : {report['totals']['unknown']}",
    ]
    if report.get("trace_stats"):
        lines.append(f"filtered non-2xx exchanges: {report['trace_stats']['filtered_non_2xx']}")
    if report["mismatches"]:
        lines.append("")
        lines.append("mismatches (root causes are heuristic):")
        for m in report["mismatches"]:
            lines.append(
                f"  - {m['constraint_id']} [{m['operation']}] {m['root_cause']}: "
                f"{m['evidence']['detail']}"
            )
    return "\n".join(lines) + "\n"


def report_to_json(report: dict) -> str:
    return canonical_json(report)


def exit_code_for(report: dict) -> int:
    return EXIT_MISMATCHES if report["totals"]["mismatched"] > 0 else EXIT_OK
