"""Deterministic scripted providers used to record fixture transcripts.

The scripted provider answers by template kind (recognized from the prompt's
first line) and by the subject extracted from the prompt body, so recording
the same spec always yields the same transcript cache.
"""

from __future__ import annotations

import json
import re

from oasguard.llm import LlmRequest, TransientProviderError, estimate_tokens

_PARAM_RE = re.compile(r"^Request parameter for .+:\n([^\n:]+):", re.MULTILINE)
_MAPPING_PARAM_RE = re.compile(r"^- Parameter: (.+)$", re.MULTILINE)
_PROPERTY_RE = re.compile(r"^Property: (.+)$", re.MULTILINE)
_TESTGEN_PROP_RE = re.compile(r"Generate the validator for '([^']+)'")
_TESTGEN_PARAM_RE = re.compile(r"^- Constraint from request parameter: (.+)$", re.MULTILINE)
_SUBJECT_RE = re.compile(r"^Subject: (.+)$", re.MULTILINE)
_KIND_RE = re.compile(r"^Kind: (.+)$", re.MULTILINE)

PROPERTY_OBSERVATIONS = {
    "amount": "The amount must be a positive integer with at most eight digits.",
    "created": "The created value is a Unix timestamp measured in seconds since the epoch.",
    "currency": "The currency must be exactly three lowercase letters, matching ^[a-z]{3}$.",
    "customer": "The customer field is an opaque identifier with no verifiable format.",
}

PROPERTY_CONFIRMATIONS = {
    "amount": "yes",
    "created": "yes",
    "currency": "yes",
    "customer": "no",
}

MAPPING_ANSWERS = {
    "customer": (
        "yes\ncorresponding property: customer\n"
        "explanation: Only returns charges whose customer field equals the requested customer ID."
    ),
    "created[gt]": (
        "yes\ncorresponding property: created\n"
        "explanation: Returned charges were created strictly after the requested lower bound."
    ),
    "created[lt]": (
        "yes\ncorresponding property: created\n"
        "explanation: Returned charges were created strictly before the requested upper bound."
    ),
}


def _program(body: dict) -> str:
    doc = {"ir_version": 1, "inputs_required": "response-only", "body": body}
    return "```json\n" + json.dumps(doc, indent=2) + "\n```"


def _resp(path: str) -> dict:
    return {"node": "path", "scope": "response", "path": path}


def _req(path: str) -> dict:
    return {"node": "path", "scope": "request", "path": path}


def _lit(value) -> dict:
    return {"node": "literal", "value": value}


TESTGEN_BY_PARAMETER = {
    "customer": _program({"node": "compare", "op": "==", "lhs": _req("customer"), "rhs": _resp("customer")}),
    "created[gt]": _program({"node": "compare", "op": "<", "lhs": _req("created[gt]"), "rhs": _resp("created")}),
    "created[lt]": _program({"node": "compare", "op": ">", "lhs": _req("created[lt]"), "rhs": _resp("created")}),
}

TESTGEN_BY_PROPERTY = {
    "amount": _program(
        {
            "node": "logic",
            "op": "and",
            "args": [
                {"node": "type_check", "arg": _resp("amount"), "tag": "integer"},
                {"node": "compare", "op": ">", "lhs": _resp("amount"), "rhs": _lit(0)},
                {"node": "compare", "op": "<=", "lhs": _resp("amount"), "rhs": _lit(99999999)},
            ],
        }
    ),
    "created": _program({"node": "type_check", "arg": _resp("created"), "tag": "unixtime"}),
    "currency": _program(
        {"node": "str_op", "op": "matches_regex", "args": [_resp("currency")], "pattern": "^[a-z]{3}$"}
    ),
}

# A deliberately wrong six-digit bound: contradicted by the documented
# example 99999999, so the example verifier must reject it.
TESTGEN_SIX_DIGITS = _program(
    {
        "node": "logic",
        "op": "and",
        "args": [
            {"node": "type_check", "arg": _resp("amount"), "tag": "integer"},
            {"node": "compare", "op": "<=", "lhs": _resp("amount"), "rhs": _lit(999999)},
        ],
    }
)


class ScriptedProvider:
    """Answers every pipeline prompt for the fixture specs."""

    def __init__(self):
        self.calls = 0

    def __call__(self, req: LlmRequest) -> tuple[str, int, int]:
        self.calls += 1
        text = self._answer(req)
        return text, estimate_tokens(req.rendered_prompt), estimate_tokens(text)

    def _answer(self, req: LlmRequest) -> str:
        prompt = req.rendered_prompt
        kind = req.template_id
        if kind == "schema-observation":
            return "The response is a charge object with amount, created, currency and customer fields."
        if kind == "operation-observation":
            return "Returns charges, most recent first; results can be narrowed by creation time and customer."
        if kind == "parameter-observation":
            name = _first(_PARAM_RE, prompt)
            if name == "customer":
                return "Restricts returned charges to the given customer ID."
            if name == "created[gt]":
                return "Lower bound (exclusive) on the creation timestamp of returned charges."
            if name == "created[lt]":
                return "Upper bound (exclusive) on the creation timestamp of returned charges."
            return f"Constrains the response via {name}."
        if kind == "mapping":
            name = _first(_PARAM_RE, prompt)
            return MAPPING_ANSWERS.get(name, "no")
        if kind == "mapping-confirmation":
            return "yes"
        if kind == "property-observation":
            name = _first(_PROPERTY_RE, prompt)
            return PROPERTY_OBSERVATIONS.get(name, "There is no verifiable constraint in this description.")
        if kind == "constraint-confirmation":
            name = _first(_PROPERTY_RE, prompt)
            return PROPERTY_CONFIRMATIONS.get(name, "no")
        if kind == "testgen":
            if "at most six digits" in prompt:
                return TESTGEN_SIX_DIGITS
            parameter = _first(_TESTGEN_PARAM_RE, prompt)
            if parameter and parameter != "(none)":
                return TESTGEN_BY_PARAMETER.get(parameter, "I cannot produce a validator for this.")
            prop = _first(_TESTGEN_PROP_RE, prompt)
            return TESTGEN_BY_PROPERTY.get(prop, "I cannot produce a validator for this.")
        if kind == "merged-observation-confirmation":
            subject = _first(_SUBJECT_RE, prompt)
            item_kind = _first(_KIND_RE, prompt)
            if item_kind == "request parameter":
                answer = MAPPING_ANSWERS.get(subject)
                return answer if answer else "no"
            return PROPERTY_CONFIRMATIONS.get(subject, "no")
        raise AssertionError(f"scripted provider has no rule for template {kind}")


def _first(pattern: re.Pattern[str], text: str) -> str:
    m = pattern.search(text)
    return m.group(1).strip() if m else ""


class FailingProvider:
    """Raises on any contact; proves replay mode never leaves the cache."""

    def __call__(self, req: LlmRequest) -> tuple[str, int, int]:
        raise AssertionError(f"provider contacted in replay mode: {req.template_id}")


class FlakyProvider:
    """Fails transiently N times, then delegates; exercises retry policy."""

    def __init__(self, failures: int, inner):
        self.failures = failures
        self.inner = inner
        self.attempts = 0

    def __call__(self, req: LlmRequest) -> tuple[str, int, int]:
        self.attempts += 1
        if self.attempts <= self.failures:
            raise TransientProviderError("synthetic transport failure")
        return self.inner(req)
