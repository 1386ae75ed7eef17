"""Canonical JSON round-trip for validator programs (``ir_version`` 1)."""

from __future__ import annotations

import json
from typing import Any

from ..paths import PathError, PropertyPath
from .ast import (
    Arith,
    ArraySize,
    Compare,
    Expr,
    InSet,
    IrBuildError,
    Literal,
    Logic,
    PathRef,
    Quantifier,
    Scope,
    Sorted,
    StrOp,
    TypeCheck,
    TypeTag,
    ValidatorProgram,
)

IR_VERSION = 1


class IrSyntaxError(ValueError):
    """Raised for malformed IR documents, carrying the offending node path."""

    def __init__(self, message: str, at: str):
        super().__init__(f"{message} (at {at})")
        self.at = at


def expr_to_dict(node: Expr) -> dict[str, Any]:
    match node:
        case Literal(value=v):
            return {"node": "literal", "value": v}
        case PathRef(scope=s, path=p):
            out: dict[str, Any] = {"node": "path", "scope": s.value}
            if p is not None:
                out["path"] = p.render()
            return out
        case Arith(op=op, lhs=l, rhs=r):
            return {"node": "arith", "op": op, "lhs": expr_to_dict(l), "rhs": expr_to_dict(r)}
        case StrOp(op=op, args=args, pattern=pattern):
            out = {"node": "str_op", "op": op, "args": [expr_to_dict(a) for a in args]}
            if pattern is not None:
                out["pattern"] = pattern
            return out
        case ArraySize(arg=a):
            return {"node": "array_size", "arg": expr_to_dict(a)}
        case Compare(op=op, lhs=l, rhs=r):
            return {"node": "compare", "op": op, "lhs": expr_to_dict(l), "rhs": expr_to_dict(r)}
        case InSet(arg=a, values=vs):
            return {"node": "in_set", "arg": expr_to_dict(a), "values": list(vs)}
        case TypeCheck(arg=a, tag=t, fmt=f):
            out = {"node": "type_check", "arg": expr_to_dict(a), "tag": t.value}
            if f is not None:
                out["fmt"] = f
            return out
        case Quantifier(mode=m, array=arr, predicate=p):
            return {
                "node": "quantifier",
                "mode": m,
                "array": expr_to_dict(arr),
                "predicate": expr_to_dict(p),
            }
        case Logic(op=op, args=args):
            return {"node": "logic", "op": op, "args": [expr_to_dict(a) for a in args]}
        case Sorted(array=arr, key=k, direction=d):
            out = {"node": "sorted", "array": expr_to_dict(arr), "direction": d}
            if k is not None:
                out["key"] = k.render()
            return out
    raise IrBuildError(f"unserializable node {type(node).__name__}")


def expr_from_dict(data: Any, at: str = "body") -> Expr:
    if not isinstance(data, dict):
        raise IrSyntaxError("expected an object", at)
    kind = data.get("node")
    try:
        return _parse_node(kind, data, at)
    except IrSyntaxError:
        raise
    except (IrBuildError, PathError, KeyError, TypeError, ValueError) as exc:
        raise IrSyntaxError(str(exc), at) from exc


def _field(data: dict, name: str, at: str) -> Any:
    if name not in data:
        raise IrSyntaxError(f"missing field {name!r}", at)
    return data[name]


def _parse_node(kind: Any, data: dict, at: str) -> Expr:
    if kind == "literal":
        return Literal(_field(data, "value", at))
    if kind == "path":
        scope = Scope(_field(data, "scope", at))
        raw = data.get("path")
        path = PropertyPath.parse(raw) if raw is not None else None
        return PathRef(scope, path)
    if kind == "arith":
        return Arith(
            _field(data, "op", at),
            expr_from_dict(_field(data, "lhs", at), f"{at}.lhs"),
            expr_from_dict(_field(data, "rhs", at), f"{at}.rhs"),
        )
    if kind == "str_op":
        args = _field(data, "args", at)
        if not isinstance(args, list):
            raise IrSyntaxError("args must be an array", at)
        return StrOp(
            _field(data, "op", at),
            tuple(expr_from_dict(a, f"{at}.args[{i}]") for i, a in enumerate(args)),
            data.get("pattern"),
        )
    if kind == "array_size":
        return ArraySize(expr_from_dict(_field(data, "arg", at), f"{at}.arg"))
    if kind == "compare":
        return Compare(
            _field(data, "op", at),
            expr_from_dict(_field(data, "lhs", at), f"{at}.lhs"),
            expr_from_dict(_field(data, "rhs", at), f"{at}.rhs"),
        )
    if kind == "in_set":
        values = _field(data, "values", at)
        if not isinstance(values, list):
            raise IrSyntaxError("values must be an array", at)
        return InSet(expr_from_dict(_field(data, "arg", at), f"{at}.arg"), tuple(values))
    if kind == "type_check":
        return TypeCheck(
            expr_from_dict(_field(data, "arg", at), f"{at}.arg"),
            TypeTag(_field(data, "tag", at)),
            data.get("fmt"),
        )
    if kind == "quantifier":
        return Quantifier(
            _field(data, "mode", at),
            expr_from_dict(_field(data, "array", at), f"{at}.array"),
            expr_from_dict(_field(data, "predicate", at), f"{at}.predicate"),
        )
    if kind == "logic":
        args = _field(data, "args", at)
        if not isinstance(args, list):
            raise IrSyntaxError("args must be an array", at)
        return Logic(
            _field(data, "op", at),
            tuple(expr_from_dict(a, f"{at}.args[{i}]") for i, a in enumerate(args)),
        )
    if kind == "sorted":
        raw_key = data.get("key")
        return Sorted(
            expr_from_dict(_field(data, "array", at), f"{at}.array"),
            PropertyPath.parse(raw_key) if raw_key is not None else None,
            data.get("direction", "asc"),
        )
    raise IrSyntaxError(f"unknown node tag {kind!r}", at)


def program_to_dict(program: ValidatorProgram) -> dict[str, Any]:
    out: dict[str, Any] = {
        "ir_version": IR_VERSION,
        "constraint_id": program.constraint_id,
        "inputs_required": program.inputs_required,
        "operation": program.operation,
        "meta": program.meta,
        "body": expr_to_dict(program.body),
    }
    return out


def program_from_dict(data: Any) -> ValidatorProgram:
    if not isinstance(data, dict):
        raise IrSyntaxError("expected a program object", "$")
    version = data.get("ir_version")
    if version != IR_VERSION:
        raise IrSyntaxError(f"unsupported ir_version {version!r}", "$")
    constraint_id = data.get("constraint_id")
    if not isinstance(constraint_id, str) or not constraint_id:
        raise IrSyntaxError("constraint_id must be a non-empty string", "constraint_id")
    inputs = data.get("inputs_required")
    meta = data.get("meta")
    if meta is not None and not isinstance(meta, dict):
        raise IrSyntaxError("meta must be an object", "meta")
    operation = data.get("operation")
    if operation is not None and not isinstance(operation, str):
        raise IrSyntaxError("operation must be a string", "operation")
    body = expr_from_dict(_field(data, "body", "$"), "body")
    try:
        return ValidatorProgram(constraint_id, inputs, body, operation, meta)
    except IrBuildError as exc:
        raise IrSyntaxError(str(exc), "$") from exc


def serialize_program(program: ValidatorProgram) -> str:
    return canonical_json(program_to_dict(program))


def parse_program(text: str) -> ValidatorProgram:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IrSyntaxError(f"invalid JSON: {exc}", "$") from exc
    return program_from_dict(data)


def canonical_json(data: Any) -> str:
    """Stable serialization used for every artifact this tool writes."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
