"""Turn mined constraints into validator programs and verify them.

Synthesis renders the test-generation prompt, parses the completion as IR
JSON, and fixes the program's input contract from the constraint source.
The semantic verifier then evaluates each program against the documented
example values of its variables: a program that positively rejects a
documented example is discarded (unknown never rejects).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Any

from . import ir
from .ir.serialize import IrSyntaxError, canonical_json, expr_from_dict
from .llm import Gateway, TranscriptCache, extract_json_block
from .mining import Constraint, _schema_text
from .paths import PathError, PropertyPath
from .specmodel import ApiSpec, NoSuchResponse, PropertySpec, flatten_response_schema

STATUS_SYNTHESIZED = "Synthesized"
STATUS_PARSE_FAILED = "ParseFailed"
STATUS_REJECTED = "Rejected-by-verifier"


@dataclass(frozen=True)
class SynthesisResult:
    constraint_id: str
    status: str
    program: ir.ValidatorProgram | None = None
    failure: str | None = None
    verifier_evidence: tuple[Any, str] | None = None  # (example value, verdict label)

    def __post_init__(self) -> None:
        if self.status == STATUS_SYNTHESIZED and self.program is None:
            raise ValueError("synthesized result must carry a program")


def _response_schema_for(constraint: Constraint, spec: ApiSpec) -> list[PropertySpec]:
    method, _, path = constraint.operation.partition(" ")
    try:
        op = spec.operation(method, path)
    except KeyError:
        return []
    for status in op.success_statuses():
        try:
            props = flatten_response_schema(op, status)
        except NoSuchResponse:  # pragma: no cover - statuses come from the op
            continue
        if props:
            return props
    return []


def _constraint_bindings(constraint: Constraint, schema_context: list[PropertySpec]) -> dict[str, str]:
    request_vars = [v.name for v in constraint.variables if v.kind == "request"]
    response_vars = [v.name for v in constraint.variables if v.kind == "response"]
    prop_name = response_vars[0] if response_vars else ""
    prop_desc = ""
    for p in schema_context:
        if p.path.render() == prop_name:
            prop_desc = p.description or ""
            break
    return {
        "parameter": ", ".join(request_vars) if request_vars else "(none)",
        "constraint_description": constraint.description,
        "response_schema": _schema_text(schema_context),
        "property": prop_name,
        "property_description": prop_desc,
    }


def _parse_completion(constraint: Constraint, text: str) -> ir.ValidatorProgram:
    block = extract_json_block(text)
    if block is None:
        raise IrSyntaxError("no JSON object in completion", "$")
    try:
        data = json.loads(block)
    except json.JSONDecodeError as exc:
        raise IrSyntaxError(f"invalid JSON: {exc}", "$") from exc
    if not isinstance(data, dict):
        raise IrSyntaxError("expected a program object", "$")
    body = expr_from_dict(data.get("body"), "body")
    inputs_required = "both" if constraint.source == "ReqResp" else "response-only"
    return ir.ValidatorProgram(
        constraint_id=constraint.id,
        inputs_required=inputs_required,
        body=body,
        operation=constraint.operation,
        meta={
            "source": constraint.source,
            "category": constraint.category,
            "variables": [v.qualified() for v in constraint.variables],
            "description": constraint.description,
        },
    )


def synthesize(
    constraint: Constraint,
    schema_context: list[PropertySpec],
    gateway: Gateway,
    cache: TranscriptCache,
    *,
    repair_attempts: int = 1,
) -> SynthesisResult:
    """Compile one constraint; malformed completions become a status, not an error."""
    bindings = _constraint_bindings(constraint, schema_context)
    req = gateway.build_request("testgen", bindings)
    completion = gateway.complete(req, cache)
    try:
        program = _parse_completion(constraint, completion.text)
        return SynthesisResult(constraint.id, STATUS_SYNTHESIZED, program)
    except (IrSyntaxError, ir.IrBuildError) as exc:
        first_error = str(exc)
    if gateway.mode == "live" and repair_attempts > 0:
        repair_bindings = dict(bindings)
        repair_bindings["constraint_description"] = (
            bindings["constraint_description"]
            + f"\nThe previous output was rejected: {first_error}. Emit valid IR JSON only."
        )
        repair_req = gateway.build_request("testgen", repair_bindings)
        repaired = gateway.complete(repair_req, cache)
        try:
            program = _parse_completion(constraint, repaired.text)
            return SynthesisResult(constraint.id, STATUS_SYNTHESIZED, program)
        except (IrSyntaxError, ir.IrBuildError) as exc:
            first_error = f"{first_error}; repair failed: {exc}"
    return SynthesisResult(constraint.id, STATUS_PARSE_FAILED, None, failure=first_error)


def _examples_for(constraint: Constraint, spec: ApiSpec) -> list[tuple[PropertyPath, Any]]:
    examples: list[tuple[PropertyPath, Any]] = []
    schema_context = _response_schema_for(constraint, spec)
    for variable in constraint.variables:
        if variable.kind != "response":
            continue
        try:
            path = PropertyPath.parse(variable.name)
        except PathError:
            continue
        for prop in schema_context:
            if prop.path == path and prop.has_example:
                examples.append((path, prop.example))
                break
    return examples


def verify_against_examples(result: SynthesisResult, spec: ApiSpec) -> SynthesisResult:
    """Discard programs contradicted by the spec's own example values.

    Only a positive Mismatched rejects; Unknown and Matched keep the
    program, and constraints without documented examples pass unchanged.
    """
    if result.status != STATUS_SYNTHESIZED or result.program is None:
        return result
    constraint = _constraint_stub(result)
    for path, example in _examples_for(constraint, spec):
        synthetic = ir.build_at_path(path, example)
        verdict = ir.evaluate(result.program, {}, synthetic)
        if verdict.state is ir.VerdictState.MISMATCHED:
            return replace(
                result,
                status=STATUS_REJECTED,
                verifier_evidence=(example, verdict.detail or "mismatched"),
            )
    return result


def _constraint_stub(result: SynthesisResult) -> Constraint:
    """Rebuild enough of the constraint from program metadata to find examples."""
    from .mining import Variable

    meta = result.program.meta or {}
    variables = []
    for qualified in meta.get("variables", ()):
        if qualified.startswith("return."):
            variables.append(Variable("response", qualified[len("return."):]))
        elif qualified.startswith("input."):
            variables.append(Variable("request", qualified[len("input."):]))
    return Constraint(
        id=result.constraint_id,
        source=meta.get("source", "RespProp"),
        operation=result.program.operation or "",
        variables=tuple(variables) or (Variable("response", "_"),),
        description=meta.get("description", ""),
        category=meta.get("category", "Uncategorized"),
    )


def synthesize_all(
    constraints: list[Constraint],
    spec: ApiSpec,
    gateway: Gateway,
    cache: TranscriptCache,
    *,
    verify: bool = True,
    repair_attempts: int = 1,
) -> tuple[list[SynthesisResult], dict]:
    """Map synthesize + verify over all constraints; returns (results, report)."""
    results: list[SynthesisResult] = []
    for constraint in sorted(constraints, key=lambda c: (c.operation, c.id)):
        schema_context = _response_schema_for(constraint, spec)
        result = synthesize(
            constraint, schema_context, gateway, cache, repair_attempts=repair_attempts
        )
        if verify:
            result = verify_against_examples(result, spec)
        results.append(result)
    counts = {
        STATUS_SYNTHESIZED: 0,
        STATUS_PARSE_FAILED: 0,
        STATUS_REJECTED: 0,
    }
    rejections = []
    for r in results:
        counts[r.status] += 1
        if r.status == STATUS_REJECTED:
            example, detail = r.verifier_evidence or (None, "")
            rejections.append(
                {"constraint_id": r.constraint_id, "example": example, "detail": detail}
            )
    report = {
        "totals": counts,
        "verifier_enabled": verify,
        "rejections": rejections,
        "parse_failures": [
            {"constraint_id": r.constraint_id, "error": r.failure}
            for r in results
            if r.status == STATUS_PARSE_FAILED
        ],
    }
    return results, report


def bundle_to_files(results: list[SynthesisResult]) -> dict[str, str]:
    """Program bundle as file-name → content (one IR JSON per constraint)."""
    files: dict[str, str] = {}
    for r in results:
        if r.status == STATUS_SYNTHESIZED and r.program is not None:
            files[f"{r.constraint_id}.json"] = ir.serialize_program(r.program)
    return files


def synthesis_report_json(report: dict, tool_version: str) -> str:
    return canonical_json({"tool_version": tool_version, **report})
