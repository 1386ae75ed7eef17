"""Normalized, immutable view of an OpenAPI 3.x document.

Loading resolves every internal ``$ref`` (cycles are cut at a configurable
depth and marked), expands ``anyOf``/``oneOf`` request parameters into their
wire forms (``created[gt]``), flattens response schemas to leaf properties
with canonical paths, and builds a document-wide description index used for
exact-name fallback lookups.
"""

from __future__ import annotations

import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import yaml

from .ir.serialize import canonical_json
from .paths import PropertyPath

TRUNCATION_MARKER = "x-oasguard-truncated"

_HTTP_METHODS = ("get", "put", "post", "delete", "options", "head", "patch", "trace")
_STATUS_RE = re.compile(r"^([1-5]XX|[1-5]\d{2})$")
_PRIMITIVE_TYPES = {"string", "number", "integer", "boolean", "array", "object", "null"}


class SpecError(ValueError):
    """Base class for specification loading problems."""


class ParseError(SpecError):
    pass


class UnresolvedRef(SpecError):
    pass


class CycleDepthExceeded(SpecError):
    pass


class NoSuchResponse(KeyError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    location: str  # query | path | header | cookie | body
    description: str | None = None
    declared_type: str | None = None
    schema_fragment: dict | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.name:
            raise SpecError("parameter name must be non-empty")


@dataclass(frozen=True)
class PropertySpec:
    path: PropertyPath
    description: str | None = None
    declared_type: str | None = None
    format_hint: str | None = None
    example: Any = None
    has_example: bool = False
    nullable: bool = False
    truncated: bool = False

    @property
    def name(self) -> str:
        return self.path.leaf_name or self.path.render()


@dataclass(frozen=True)
class OperationSpec:
    method: str
    path: str
    description: str | None
    parameters: tuple[ParamSpec, ...]
    request_body_fields: tuple[ParamSpec, ...]
    responses: dict[str, tuple[PropertySpec, ...]]

    @property
    def key(self) -> str:
        return f"{self.method} {self.path}"

    def success_statuses(self) -> list[str]:
        out = [s for s in self.responses if s.startswith("2")]
        return sorted(out)


@dataclass(frozen=True)
class ApiSpec:
    title: str
    version: str
    operations: tuple[OperationSpec, ...]
    schemas: dict[str, tuple[PropertySpec, ...]]
    raw_description_index: dict[str, tuple[str, ...]]

    def operation(self, method: str, path: str) -> OperationSpec:
        wanted = f"{method.upper()} {path}"
        for op in self.operations:
            if op.key == wanted:
                return op
        raise KeyError(wanted)


def load_spec(
    source: str | Path | bytes | io.IOBase | dict,
    format: str | None = None,
    *,
    cycle_depth: int = 3,
    strict: bool = False,
) -> ApiSpec:
    """Load and normalize an OpenAPI 3.x document from a path, bytes or dict."""
    document = _read_document(source, format)
    if not isinstance(document, dict):
        raise ParseError("document root must be a mapping")
    version = str(document.get("openapi", ""))
    if not version.startswith("3"):
        raise ParseError(f"not an OpenAPI 3.x document (openapi={version!r})")

    resolved = _resolve_refs(document, cycle_depth=cycle_depth, strict=strict)
    info = resolved.get("info") or {}
    operations = _collect_operations(resolved)
    schemas = _collect_schemas(resolved)
    index = _build_description_index(resolved)
    return ApiSpec(
        title=str(info.get("title", "")),
        version=str(info.get("version", "")),
        operations=tuple(operations),
        schemas=schemas,
        raw_description_index=index,
    )


def _read_document(source, format: str | None) -> Any:
    if isinstance(source, dict):
        return source
    if isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_bytes().decode("utf-8")
        if format is None and str(source).endswith(".json"):
            format = "json"
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, io.IOBase):
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    elif isinstance(source, str):
        text = source
    else:
        raise ParseError(f"unsupported source type {type(source).__name__}")
    try:
        if format == "json":
            return json.loads(text)
        return yaml.safe_load(text)  # YAML is a superset of JSON
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed document: {exc}") from exc


def _lookup_ref(document: dict, ref: str) -> Any:
    if not ref.startswith("#/"):
        raise UnresolvedRef(f"only internal references are supported: {ref}")
    node: Any = document
    for part in ref[2:].split("/"):
        part = part.replace("~1", "/").replace("~0", "~")
        if not isinstance(node, dict) or part not in node:
            raise UnresolvedRef(f"dangling reference: {ref}")
        node = node[part]
    return node


def _resolve_refs(document: dict, *, cycle_depth: int, strict: bool) -> dict:
    def resolve(node: Any, stack: tuple[str, ...]) -> Any:
        if isinstance(node, dict):
            if "$ref" in node:
                ref = node["$ref"]
                if not isinstance(ref, str):
                    raise UnresolvedRef(f"non-string $ref: {ref!r}")
                depth = sum(1 for r in stack if r == ref)
                if depth >= cycle_depth:
                    if strict:
                        raise CycleDepthExceeded(
                            f"reference {ref} exceeds depth {cycle_depth}"
                        )
                    return {TRUNCATION_MARKER: True, "ref": ref}
                target = _lookup_ref(document, ref)
                merged = resolve(target, stack + (ref,))
                extra = {k: v for k, v in node.items() if k != "$ref"}
                if extra and isinstance(merged, dict):
                    merged = {**merged, **{k: resolve(v, stack) for k, v in extra.items()}}
                return merged
            return {k: resolve(v, stack) for k, v in node.items()}
        if isinstance(node, list):
            return [resolve(v, stack) for v in node]
        return node

    return resolve(document, ())


def _collect_operations(document: dict) -> list[OperationSpec]:
    operations: list[OperationSpec] = []
    seen: set[str] = set()
    paths = document.get("paths") or {}
    if not isinstance(paths, dict):
        raise ParseError("paths must be a mapping")
    for path_tmpl in sorted(paths):
        item = paths[path_tmpl] or {}
        shared_params = item.get("parameters") or []
        for method in _HTTP_METHODS:
            if method not in item:
                continue
            op_node = item[method] or {}
            key = f"{method.upper()} {path_tmpl}"
            if key in seen:
                raise ParseError(f"duplicate operation {key}")
            seen.add(key)
            params = _collect_parameters(list(op_node.get("parameters") or []) + list(shared_params))
            body_fields = _collect_body_fields(op_node.get("requestBody") or {})
            responses = _collect_responses(op_node.get("responses") or {})
            operations.append(
                OperationSpec(
                    method=method.upper(),
                    path=str(path_tmpl),
                    description=_text_or_none(op_node.get("description") or op_node.get("summary")),
                    parameters=tuple(params),
                    request_body_fields=tuple(body_fields),
                    responses=responses,
                )
            )
    return operations


def _text_or_none(value: Any) -> str | None:
    if value is None:
        return None
    text = str(value).strip()
    return text or None


def _collect_parameters(nodes: Iterable[dict]) -> list[ParamSpec]:
    params: list[ParamSpec] = []
    for node in nodes:
        if not isinstance(node, dict) or not node.get("name"):
            continue
        name = str(node["name"])
        location = str(node.get("in", "query"))
        description = _text_or_none(node.get("description"))
        schema = node.get("schema") or {}
        params.extend(_expand_parameter(name, location, description, schema))
    # first occurrence wins when an operation-level parameter shadows a shared one
    unique: dict[tuple[str, str], ParamSpec] = {}
    for p in params:
        unique.setdefault((p.name, p.location), p)
    return list(unique.values())


def _expand_parameter(
    name: str, location: str, description: str | None, schema: dict
) -> list[ParamSpec]:
    """Expand composite parameter schemas into the wire names seen in traffic."""
    alternatives = schema.get("anyOf") or schema.get("oneOf")
    if not isinstance(alternatives, list) or not alternatives:
        return [
            ParamSpec(
                name=name,
                location=location,
                description=description,
                declared_type=_declared_type(schema),
                schema_fragment=schema or None,
            )
        ]
    out: list[ParamSpec] = []
    seen: set[str] = set()
    for alt in alternatives:
        if not isinstance(alt, dict):
            continue
        props = alt.get("properties")
        if isinstance(props, dict) and props:
            for prop_name in props:
                prop_schema = props[prop_name] or {}
                wire = f"{name}[{prop_name}]"
                if wire in seen:
                    continue
                seen.add(wire)
                out.append(
                    ParamSpec(
                        name=wire,
                        location=location,
                        description=_text_or_none(prop_schema.get("description")) or description,
                        declared_type=_declared_type(prop_schema),
                        schema_fragment=prop_schema or None,
                    )
                )
        else:
            if name in seen:
                continue
            seen.add(name)
            out.append(
                ParamSpec(
                    name=name,
                    location=location,
                    description=description,
                    declared_type=_declared_type(alt),
                    schema_fragment=alt or None,
                )
            )
    return out


def _declared_type(schema: Any) -> str | None:
    if not isinstance(schema, dict):
        return None
    t = schema.get("type")
    if isinstance(t, str) and t in _PRIMITIVE_TYPES:
        return t
    if isinstance(t, list):
        concrete = [x for x in t if x != "null"]
        if len(concrete) == 1:
            return concrete[0]
    return None


def _collect_body_fields(request_body: dict) -> list[ParamSpec]:
    schema = _json_content_schema(request_body)
    if schema is None:
        return []
    fields = flatten_schema(schema)
    return [
        ParamSpec(
            name=f.path.render(),
            location="body",
            description=f.description,
            declared_type=f.declared_type,
        )
        for f in fields
    ]


def _json_content_schema(node: dict) -> dict | None:
    content = node.get("content")
    if not isinstance(content, dict):
        return None
    for mime in sorted(content):
        if "json" in mime:
            schema = (content[mime] or {}).get("schema")
            if isinstance(schema, dict):
                return schema
    return None


def _collect_responses(responses: dict) -> dict[str, tuple[PropertySpec, ...]]:
    out: dict[str, tuple[PropertySpec, ...]] = {}
    for status in sorted(responses, key=str):
        status_key = str(status)
        if not _STATUS_RE.match(status_key):
            continue
        schema = _json_content_schema(responses[status] or {})
        if schema is None:
            out[status_key] = ()
        else:
            out[status_key] = tuple(flatten_schema(schema))
    return out


def flatten_schema(schema: dict, max_depth: int | None = None) -> list[PropertySpec]:
    """Depth-first flattening into leaf properties with canonical paths.

    Arrays contribute one wildcard segment; ``allOf`` members are merged;
    ``anyOf``/``oneOf`` alternatives contribute the union of their leaves
    (first seen path wins).  Truncation markers from reference resolution
    and nesting beyond ``max_depth`` object levels yield entries flagged
    ``truncated``.
    """
    results: list[PropertySpec] = []
    seen_paths: set[str] = set()

    def emit(spec: PropertySpec) -> None:
        rendered = spec.path.render()
        if rendered not in seen_paths:
            seen_paths.add(rendered)
            results.append(spec)

    def leaf(node: dict, path: PropertyPath, truncated: bool = False) -> PropertySpec:
        example = node.get("example")
        return PropertySpec(
            path=path,
            description=_text_or_none(node.get("description")),
            declared_type=_declared_type(node),
            format_hint=_text_or_none(node.get("format")),
            example=example,
            has_example="example" in node,
            nullable=bool(node.get("nullable")) or _type_allows_null(node),
            truncated=truncated,
        )

    def walk(node: Any, prefix: tuple[str, ...], depth: int) -> None:
        if not isinstance(node, dict):
            return
        if node.get(TRUNCATION_MARKER):
            if prefix:
                emit(leaf(node, PropertyPath(prefix), truncated=True))
            return
        if max_depth is not None and depth > max_depth and prefix:
            emit(leaf(node, PropertyPath(prefix), truncated=True))
            return
        for member in node.get("allOf") or []:
            walk(member, prefix, depth)
        for alt_key in ("anyOf", "oneOf"):
            for member in node.get(alt_key) or []:
                walk(member, prefix, depth)
        node_type = _declared_type(node)
        if node_type == "array" or "items" in node:
            items = node.get("items")
            if isinstance(items, dict):
                walk(items, prefix + ("[]",), depth)
            elif prefix:
                emit(leaf(node, PropertyPath(prefix)))
            return
        props = node.get("properties")
        if isinstance(props, dict) and props:
            for name in props:
                walk(props[name] or {}, prefix + (str(name),), depth + 1)
            return
        if prefix:
            emit(leaf(node, PropertyPath(prefix)))

    walk(schema, (), 0)
    return results


def _type_allows_null(node: dict) -> bool:
    t = node.get("type")
    return isinstance(t, list) and "null" in t


def flatten_response_schema(op: OperationSpec, status: str) -> list[PropertySpec]:
    """Leaf properties of one response; raises NoSuchResponse for unknown codes."""
    if status not in op.responses:
        raise NoSuchResponse(f"{op.key} has no response for {status}")
    return list(op.responses[status])


def find_exact_match_description(
    spec: ApiSpec, name: str, op: OperationSpec | None = None
) -> str | None:
    """Description for ``name`` found elsewhere in the document.

    Search order is fixed: the operation's other parameters, then every
    component schema (document order), then the global description index.
    """
    if op is not None:
        for param in list(op.parameters) + list(op.request_body_fields):
            if param.name == name and param.description:
                return param.description
    for schema_name in spec.schemas:
        for prop in spec.schemas[schema_name]:
            if prop.name == name and prop.description:
                return prop.description
    for text in spec.raw_description_index.get(name, ()):
        return text
    return None


def _collect_schemas(document: dict) -> dict[str, tuple[PropertySpec, ...]]:
    out: dict[str, tuple[PropertySpec, ...]] = {}
    components = (document.get("components") or {}).get("schemas") or {}
    if not isinstance(components, dict):
        return out
    for name in components:
        schema = components[name]
        if isinstance(schema, dict):
            out[str(name)] = tuple(flatten_schema(schema))
    return out


_STRUCTURAL_KEYS = {
    "schema", "items", "properties", "content", "responses", "paths",
    "components", "schemas", "info", "requestBody", "parameters", "anyOf",
    "oneOf", "allOf", "headers", "links", "examples",
}


def _build_description_index(document: dict) -> dict[str, tuple[str, ...]]:
    index: dict[str, list[str]] = {}

    def walk(node: Any, name_hint: str | None) -> None:
        if isinstance(node, dict):
            desc = node.get("description")
            if name_hint and isinstance(desc, str) and desc.strip():
                index.setdefault(name_hint, [])
                if desc.strip() not in index[name_hint]:
                    index[name_hint].append(desc.strip())
            explicit = node.get("name")
            if isinstance(explicit, str) and isinstance(node.get("description"), str):
                text = node["description"].strip()
                if text:
                    index.setdefault(explicit, [])
                    if text not in index[explicit]:
                        index[explicit].append(text)
            for key, value in node.items():
                child_hint = key if isinstance(value, dict) and key not in _STRUCTURAL_KEYS else None
                walk(value, child_hint)
        elif isinstance(node, list):
            for item in node:
                walk(item, None)

    walk(document, None)
    return {k: tuple(v) for k, v in index.items()}


def spec_to_dict(spec: ApiSpec) -> dict:
    """Canonical JSON-ready form with stable ordering (golden-test friendly)."""
    return {
        "title": spec.title,
        "version": spec.version,
        "operations": [
            {
                "method": op.method,
                "path": op.path,
                "description": op.description,
                "parameters": [_param_to_dict(p) for p in op.parameters],
                "request_body_fields": [_param_to_dict(p) for p in op.request_body_fields],
                "responses": {
                    status: [_prop_to_dict(p) for p in props]
                    for status, props in sorted(op.responses.items())
                },
            }
            for op in spec.operations
        ],
        "schemas": {
            name: [_prop_to_dict(p) for p in props]
            for name, props in sorted(spec.schemas.items())
        },
        "raw_description_index": {
            name: list(descs) for name, descs in sorted(spec.raw_description_index.items())
        },
    }


def _param_to_dict(p: ParamSpec) -> dict:
    return {
        "name": p.name,
        "location": p.location,
        "description": p.description,
        "declared_type": p.declared_type,
    }


def _prop_to_dict(p: PropertySpec) -> dict:
    return {
        "path": p.path.render(),
        "description": p.description,
        "declared_type": p.declared_type,
        "format_hint": p.format_hint,
        "example": p.example,
        "has_example": p.has_example,
        "nullable": p.nullable,
        "truncated": p.truncated,
    }


def spec_to_canonical_json(spec: ApiSpec) -> str:
    return canonical_json(spec_to_dict(spec))
