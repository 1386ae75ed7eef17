"""Constraint mining: turn spec descriptions into candidate oracles.

Two miners feed the pipeline.  The request-response miner pairs request
parameters with the response property they constrain (observe, map,
confirm); the response-property miner decides per flattened property
whether its composed description encodes a checkable rule (observe,
confirm), memoizing verdicts in a write-once knowledge base so identical
properties never hit the LLM twice.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, replace
from typing import Callable

from . import specmodel
from .categories import OracleCategory
from .ir.serialize import canonical_json
from .llm import Gateway, ParseFailure, TranscriptCache, parse_structured_answer, request_digest
from .specmodel import ApiSpec, OperationSpec, PropertySpec


@dataclass(frozen=True)
class Variable:
    kind: str  # "request" | "response"
    name: str  # wire name for parameters, canonical path for properties

    def __post_init__(self) -> None:
        if self.kind not in ("request", "response"):
            raise ValueError(f"bad variable kind {self.kind!r}")
        if not self.name:
            raise ValueError("variable name must be non-empty")

    def qualified(self) -> str:
        """Daikon-style rendering used for cross-tool grouping."""
        return ("input." if self.kind == "request" else "return.") + self.name


@dataclass(frozen=True)
class Observation:
    subject: str
    kind: str  # parameter | operation | schema | property
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("a retained observation must have text")


@dataclass(frozen=True)
class Constraint:
    id: str
    source: str  # "ReqResp" | "RespProp"
    operation: str  # "GET /v1/charges"
    variables: tuple[Variable, ...]
    description: str
    category: str = OracleCategory.UNCATEGORIZED.value
    provenance: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        req = sum(1 for v in self.variables if v.kind == "request")
        resp = sum(1 for v in self.variables if v.kind == "response")
        if self.source == "ReqResp":
            if req < 1 or resp < 1:
                raise ValueError("ReqResp constraints need a request and a response variable")
        elif self.source == "RespProp":
            if resp < 1 or req != 0:
                raise ValueError("RespProp constraints use response variables only")
        else:
            raise ValueError(f"bad constraint source {self.source!r}")

    def variable_names(self) -> tuple[str, ...]:
        return tuple(v.qualified() for v in self.variables)


def normalize_description(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip()).casefold()


def constraint_id(operation: str, source: str, variables: tuple[Variable, ...], description: str) -> str:
    payload = "|".join(
        [operation, source, ",".join(sorted(v.qualified() for v in variables)),
         normalize_description(description)]
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def make_constraint(
    source: str,
    operation: str,
    variables: list[Variable],
    description: str,
    provenance: tuple[str, ...] = (),
) -> Constraint:
    ordered = tuple(sorted(variables, key=lambda v: (v.kind, v.name)))
    c = Constraint(
        id=constraint_id(operation, source, ordered, description),
        source=source,
        operation=operation,
        variables=ordered,
        description=description,
        provenance=provenance,
    )
    return replace(c, category=categorize(c).value)


@dataclass
class KbEntry:
    confirmed: bool
    constraint_description: str | None = None
    provenance: tuple[str, ...] = ()


class KnowledgeBase:
    """Write-once memo of per-property verdicts.

    ``get_or_compute`` guarantees at most one in-flight computation per key;
    concurrent callers block until the winner stores its entry.
    """

    def __init__(self) -> None:
        self.entries: dict[str, KbEntry] = {}
        self.hits = 0
        self._lock = threading.Lock()
        self._inflight: dict[str, threading.Event] = {}

    @staticmethod
    def key(property_name: str, composed_description: str) -> str:
        payload = json.dumps([property_name, composed_description], ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def get_or_compute(self, key: str, compute: Callable[[], KbEntry]) -> tuple[KbEntry, bool]:
        """Return (entry, was_hit)."""
        while True:
            with self._lock:
                if key in self.entries:
                    self.hits += 1
                    return self.entries[key], True
                event = self._inflight.get(key)
                if event is None:
                    event = threading.Event()
                    self._inflight[key] = event
                    break
            event.wait()
        try:
            entry = compute()
        except BaseException:
            with self._lock:
                self._inflight.pop(key, None)
            event.set()
            raise
        with self._lock:
            self.entries.setdefault(key, entry)
            stored = self.entries[key]
            self._inflight.pop(key, None)
        event.set()
        return stored, False

    def to_dict(self) -> dict:
        return {
            key: {
                "confirmed": e.confirmed,
                "constraint_description": e.constraint_description,
                "provenance": list(e.provenance),
            }
            for key, e in sorted(self.entries.items())
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KnowledgeBase":
        kb = cls()
        for key, raw in data.items():
            kb.entries[key] = KbEntry(
                confirmed=bool(raw.get("confirmed")),
                constraint_description=raw.get("constraint_description"),
                provenance=tuple(raw.get("provenance", ())),
            )
        return kb


@dataclass
class MiningStats:
    skipped_missing_description: int = 0
    parse_failures: int = 0
    unresolved_properties: int = 0
    kb_hits: int = 0

    def to_dict(self) -> dict:
        return {
            "skipped_missing_description": self.skipped_missing_description,
            "parse_failures": self.parse_failures,
            "unresolved_properties": self.unresolved_properties,
            "kb_hits": self.kb_hits,
        }


def _schema_text(props: list[PropertySpec]) -> str:
    lines = []
    for p in props:
        dtype = p.declared_type or "unknown"
        desc = p.description or ""
        lines.append(f"- {p.path.render()} ({dtype}): {desc}".rstrip())
    return "\n".join(lines)


def _primary_success_status(op: OperationSpec) -> str | None:
    statuses = op.success_statuses()
    return statuses[0] if statuses else None


def _eligible_parameters(spec: ApiSpec, op: OperationSpec):
    """Parameters that have a usable description, with exact-match fallback."""
    eligible = []
    skipped = 0
    for param in list(op.parameters) + list(op.request_body_fields):
        desc = param.description or specmodel.find_exact_match_description(spec, param.name, op)
        if desc is None:
            skipped += 1
            continue
        eligible.append((param, desc))
    return eligible, skipped


def _find_property(props: list[PropertySpec], name: str) -> PropertySpec | None:
    for p in props:
        if p.path.render() == name:
            return p
    for p in props:
        if p.name == name:
            return p
    return None


def mine_request_response(
    spec: ApiSpec,
    op: OperationSpec,
    gateway: Gateway,
    cache: TranscriptCache,
    *,
    mode: str = "oc",
    stats: MiningStats | None = None,
) -> list[Constraint]:
    """Pair request parameters with the response property they constrain."""
    stats = stats if stats is not None else MiningStats()
    status = _primary_success_status(op)
    if status is None:
        return []
    props = specmodel.flatten_response_schema(op, status)
    if not props:
        return []
    eligible, skipped = _eligible_parameters(spec, op)
    stats.skipped_missing_description += skipped
    if not eligible:
        return []

    schema_text = _schema_text(props)
    schema_name = f"{op.key} {status} response"
    constraints: list[Constraint] = []

    if mode == "merged":
        for param, desc in eligible:
            answer_req = gateway.build_request(
                "merged-observation-confirmation",
                {
                    "kind": "request parameter",
                    "method": op.method,
                    "endpoint": op.path,
                    "name": param.name,
                    "description": desc,
                    "schema": schema_text,
                },
            )
            completion = gateway.complete(answer_req, cache)
            answer = parse_structured_answer(completion.text, "mapping")
            if isinstance(answer, ParseFailure):
                stats.parse_failures += 1
                continue
            if not answer.verdict or not answer.property:
                continue
            prop = _find_property(props, answer.property)
            if prop is None:
                stats.unresolved_properties += 1
                continue
            constraints.append(
                make_constraint(
                    "ReqResp",
                    op.key,
                    [Variable("request", param.name), Variable("response", prop.path.render())],
                    desc,
                    provenance=(request_digest(answer_req),),
                )
            )
        return constraints

    schema_obs_req = gateway.build_request("schema-observation", {"schema": schema_text})
    schema_obs = gateway.complete(schema_obs_req, cache)
    op_obs_req = gateway.build_request(
        "operation-observation",
        {"method": op.method, "endpoint": op.path, "description": op.description or ""},
    )
    op_obs = gateway.complete(op_obs_req, cache)

    for param, desc in eligible:
        param_obs_req = gateway.build_request(
            "parameter-observation",
            {"method": op.method, "endpoint": op.path, "parameter": param.name, "description": desc},
        )
        param_obs_completion = gateway.complete(param_obs_req, cache)
        if not param_obs_completion.text.strip():
            stats.parse_failures += 1
            continue
        param_obs = Observation(param.name, "parameter", param_obs_completion.text)

        mapping_req = gateway.build_request(
            "mapping",
            {
                "method": op.method,
                "endpoint": op.path,
                "parameter": param.name,
                "description": desc,
                "parameter_observation": param_obs.text,
                "operation_observation": op_obs.text,
                "schema_name": schema_name,
                "schema_observation": schema_obs.text,
                "schema": schema_text,
            },
        )
        mapping = gateway.complete(mapping_req, cache)
        answer = parse_structured_answer(mapping.text, "mapping")
        if isinstance(answer, ParseFailure):
            stats.parse_failures += 1
            continue
        if not answer.verdict or not answer.property:
            continue
        prop = _find_property(props, answer.property)
        if prop is None:
            stats.unresolved_properties += 1
            continue

        confirm_req = gateway.build_request(
            "mapping-confirmation",
            {
                "method": op.method,
                "endpoint": op.path,
                "parameter": param.name,
                "description": desc,
                "schema_name": schema_name,
                "corresponding_property": prop.path.render(),
                "explanation": answer.explanation or "",
            },
        )
        confirmation = gateway.complete(confirm_req, cache)
        verdict = parse_structured_answer(confirmation.text, "yes-no")
        if isinstance(verdict, ParseFailure):
            stats.parse_failures += 1
            continue
        if not verdict.verdict:
            continue

        constraints.append(
            make_constraint(
                "ReqResp",
                op.key,
                [Variable("request", param.name), Variable("response", prop.path.render())],
                desc,
                provenance=(
                    request_digest(schema_obs_req),
                    request_digest(op_obs_req),
                    request_digest(param_obs_req),
                    request_digest(mapping_req),
                    request_digest(confirm_req),
                ),
            )
        )
    return constraints


def compose_property_description(prop: PropertySpec) -> str | None:
    """Description + type + format + example, in that order; None without a description."""
    if not prop.description:
        return None
    parts = [prop.description]
    if prop.declared_type:
        parts.append(f"type: {prop.declared_type}")
    if prop.format_hint:
        parts.append(f"format: {prop.format_hint}")
    if prop.has_example:
        parts.append(f"example: {json.dumps(prop.example, ensure_ascii=False)}")
    return "\n".join(parts)


def mine_response_properties(
    spec: ApiSpec,
    op: OperationSpec,
    status: str,
    kb: KnowledgeBase,
    gateway: Gateway,
    cache: TranscriptCache,
    *,
    mode: str = "oc",
    stats: MiningStats | None = None,
) -> list[Constraint]:
    """Decide per response property whether its description encodes a rule."""
    stats = stats if stats is not None else MiningStats()
    props = specmodel.flatten_response_schema(op, status)
    schema_text = _schema_text(props)
    constraints: list[Constraint] = []

    for prop in props:
        enriched = prop
        if not prop.description:
            fallback = specmodel.find_exact_match_description(spec, prop.name, op)
            if fallback is None:
                stats.skipped_missing_description += 1
                continue
            enriched = replace(prop, description=fallback)
        composed = compose_property_description(enriched)
        assert composed is not None
        key = KnowledgeBase.key(prop.name, composed)

        def compute(prop=prop, composed=composed) -> KbEntry:
            datatype = prop.declared_type or "unknown"
            if mode == "merged":
                req = gateway.build_request(
                    "merged-observation-confirmation",
                    {
                        "kind": "response property",
                        "method": op.method,
                        "endpoint": op.path,
                        "name": prop.name,
                        "description": composed,
                        "schema": schema_text,
                    },
                )
                completion = gateway.complete(req, cache)
                verdict = parse_structured_answer(completion.text, "yes-no")
                if isinstance(verdict, ParseFailure):
                    stats.parse_failures += 1
                    return KbEntry(False, None, (request_digest(req),))
                return KbEntry(
                    verdict.verdict,
                    composed if verdict.verdict else None,
                    (request_digest(req),),
                )
            obs_req = gateway.build_request(
                "property-observation",
                {"name": prop.name, "datatype": datatype, "description": composed},
            )
            obs_completion = gateway.complete(obs_req, cache)
            provenance_obs = (request_digest(obs_req),)
            if not obs_completion.text.strip():
                stats.parse_failures += 1
                return KbEntry(False, None, provenance_obs)
            obs = Observation(prop.name, "property", obs_completion.text)
            confirm_req = gateway.build_request(
                "constraint-confirmation",
                {
                    "name": prop.name,
                    "datatype": datatype,
                    "description": composed,
                    "observation": obs.text,
                },
            )
            confirmation = gateway.complete(confirm_req, cache)
            verdict = parse_structured_answer(confirmation.text, "yes-no")
            provenance = (request_digest(obs_req), request_digest(confirm_req))
            if isinstance(verdict, ParseFailure):
                stats.parse_failures += 1
                return KbEntry(False, None, provenance)
            return KbEntry(verdict.verdict, obs.text if verdict.verdict else None, provenance)

        entry, hit = kb.get_or_compute(key, compute)
        if hit:
            stats.kb_hits += 1
        if entry.confirmed:
            constraints.append(
                make_constraint(
                    "RespProp",
                    op.key,
                    [Variable("response", prop.path.render())],
                    entry.constraint_description or composed,
                    provenance=entry.provenance,
                )
            )
    return constraints


# --- categorization -------------------------------------------------------

_RANGE_PHRASE = re.compile(r"between\s+\S+\s+and\s+\S+", re.IGNORECASE)

_CATEGORY_RULES: list[tuple[OracleCategory, re.Pattern[str]]] = [
    (OracleCategory.IS_UNIXTIME, re.compile(r"\bunix\b|\bepoch\b", re.I)),
    (OracleCategory.IS_DATETIME, re.compile(r"date[-\s]?time|datetime|timestamp|\bdate\b.{0,40}\btime\b", re.I)),
    (OracleCategory.IS_DATE, re.compile(r"\bdate\b|YYYY-MM-DD", re.I)),
    (OracleCategory.IS_TIME, re.compile(r"\btime\b|\bHH:MM\b", re.I)),
    (OracleCategory.IS_URL, re.compile(r"\burls?\b|\buris?\b|\bhyperlink\b|\bweb address\b", re.I)),
    (OracleCategory.VALUE_IN_SET, re.compile(
        r"one of\b|\benum\b|enumerat|allowed values|possible values|\baccepts?:|must be either|abbreviations", re.I)),
    (OracleCategory.VALUE_IN_RANGE, re.compile(
        r"between\s+\S+\s+and\s+\S+|at least\b|at most\b|\bminimum\b|\bmaximum\b|up to\b|"
        r"greater than\b|less than\b|\bpositive\b|\bnon-negative\b|lower bound|upper bound", re.I)),
    (OracleCategory.STRING_SPECIFIC_LENGTH, re.compile(
        r"\blength\b|\b(one|two|three|four|five|six|seven|eight|nine|ten|\d+)\s+"
        r"(lowercase\s+|uppercase\s+)?(letters?|characters?|chars?)\b", re.I)),
    (OracleCategory.ARRAY_SPECIFIC_SIZES, re.compile(
        r"(array|list)\s+(of\s+)?(size|length)|exactly \d+ (items|elements)", re.I)),
    (OracleCategory.ARRAY_IS_STRING, re.compile(r"(array|list) of strings", re.I)),
    (OracleCategory.IS_BOOLEAN, re.compile(r"\bboolean\b|\btrue or false\b", re.I)),
    (OracleCategory.TEMPLATE_LITERALS, re.compile(
        r"\bregex\b|regular expression|\bpattern\b|\btemplate\b|matching \^|\^\S+\$|"
        r"starts with|ends with|prefixed", re.I)),
    (OracleCategory.IS_NUMBER, re.compile(r"\binteger\b|\bnumber\b|\bnumeric\b|\bfloat\b|\bdigits?\b", re.I)),
]


def _category_hits(text: str) -> list[OracleCategory]:
    return [cat for cat, pattern in _CATEGORY_RULES if pattern.search(text)]


def _looks_composite(text: str) -> bool:
    """Two or more independently-categorizable clauses joined by and/or."""
    stripped = _RANGE_PHRASE.sub(" ", text)
    clauses = re.split(r"\band\b|\bor\b|;", stripped, flags=re.IGNORECASE)
    if len(clauses) < 2:
        return False
    hits = [bool(_category_hits(c)) for c in clauses]
    return sum(hits) >= 2


def categorize(c: Constraint) -> OracleCategory:
    """Deterministic keyword/structure classifier over the constraint text."""
    text = c.description or ""
    if c.source == "ReqResp":
        return OracleCategory.COMPOSITE if _looks_composite(text) else OracleCategory.IO
    if not text.strip():
        return OracleCategory.UNCATEGORIZED
    if _looks_composite(text):
        return OracleCategory.COMPOSITE
    if len(c.variables) >= 2:
        return OracleCategory.NARY_ATOMIC
    hits = _category_hits(text)
    if hits:
        return hits[0]
    return OracleCategory.UNCATEGORIZED


# --- whole-spec mining ----------------------------------------------------


def mine_all(
    spec: ApiSpec,
    gateway: Gateway,
    cache: TranscriptCache,
    mode: str = "oc",
    *,
    kb: KnowledgeBase | None = None,
) -> tuple[list[Constraint], dict]:
    """Run both miners over every operation; returns (constraints, report)."""
    if mode not in ("oc", "merged"):
        raise ValueError(f"bad mining mode {mode!r}")
    kb = kb if kb is not None else KnowledgeBase()
    stats = MiningStats()
    collected: list[Constraint] = []
    for op in sorted(spec.operations, key=lambda o: o.key):
        collected.extend(
            mine_request_response(spec, op, gateway, cache, mode=mode, stats=stats)
        )
        for status in op.success_statuses():
            collected.extend(
                mine_response_properties(
                    spec, op, status, kb, gateway, cache, mode=mode, stats=stats
                )
            )

    deduped: dict[tuple, Constraint] = {}
    for c in collected:
        key = (c.operation, c.variable_names(), normalize_description(c.description))
        deduped.setdefault(key, c)
    constraints = sorted(deduped.values(), key=lambda c: (c.operation, c.variable_names()))

    by_category: dict[str, int] = {}
    for c in constraints:
        by_category[c.category] = by_category.get(c.category, 0) + 1
    report = {
        "mode": mode,
        "totals": {
            "constraints": len(constraints),
            "request_response": sum(1 for c in constraints if c.source == "ReqResp"),
            "response_property": sum(1 for c in constraints if c.source == "RespProp"),
        },
        "by_category": dict(sorted(by_category.items())),
        "llm": gateway.stats(),
        "knowledge_base": {"entries": len(kb.entries), "hits": kb.hits},
        "mining": stats.to_dict(),
    }
    return constraints, report


# --- serialization --------------------------------------------------------


def constraint_to_dict(c: Constraint) -> dict:
    return {
        "id": c.id,
        "source": c.source,
        "operation": c.operation,
        "variables": [{"kind": v.kind, "name": v.name} for v in c.variables],
        "description": c.description,
        "category": c.category,
        "provenance": list(c.provenance),
    }


def constraint_from_dict(data: dict) -> Constraint:
    return Constraint(
        id=data["id"],
        source=data["source"],
        operation=data["operation"],
        variables=tuple(Variable(v["kind"], v["name"]) for v in data["variables"]),
        description=data["description"],
        category=data.get("category", OracleCategory.UNCATEGORIZED.value),
        provenance=tuple(data.get("provenance", ())),
    )


def constraints_to_json(constraints: list[Constraint], tool_version: str) -> str:
    return canonical_json(
        {
            "tool_version": tool_version,
            "constraints": [constraint_to_dict(c) for c in constraints],
        }
    )


def constraints_from_json(text: str) -> list[Constraint]:
    data = json.loads(text)
    return [constraint_from_dict(raw) for raw in data["constraints"]]
