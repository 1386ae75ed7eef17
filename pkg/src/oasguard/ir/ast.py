"""Expression nodes for validator programs.

Trees are validated at construction: operator arities, regex patterns and
operand sorts (number / string / array / predicate) are checked up front so
evaluation never throws.  Nodes are frozen dataclasses and freely shareable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from ..paths import PropertyPath


class IrBuildError(ValueError):
    """Raised when an expression tree is structurally invalid."""


class Scope(str, Enum):
    REQUEST = "request"
    RESPONSE = "response"
    ELEMENT = "element"


class Sort(Enum):
    """Static sort of an expression: what kind of thing it produces."""

    NUMBER = "number"
    STRING = "string"
    BOOLEAN = "boolean"
    ARRAY = "array"
    ANY = "any"
    PREDICATE = "predicate"


COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
ARITH_OPS = ("+", "-", "*", "/")
LOGIC_OPS = ("and", "or", "not")
STR_VALUE_OPS = ("length", "lowercase")
STR_PRED_OPS = ("matches_regex", "is_substring_of")


class TypeTag(str, Enum):
    BOOLEAN = "boolean"
    INTEGER = "integer"
    NUMBER = "number"
    STRING = "string"
    ARRAY_OF_STRING = "array_of_string"
    URL = "url"
    EMAIL = "email"
    DATE = "date"
    DATETIME = "datetime"
    TIME = "time"
    UNIXTIME = "unixtime"


_FORMAT_TAGS = {TypeTag.DATE, TypeTag.DATETIME, TypeTag.TIME}

Expr = Union[
    "Literal",
    "PathRef",
    "Arith",
    "StrOp",
    "ArraySize",
    "Compare",
    "InSet",
    "TypeCheck",
    "Quantifier",
    "Logic",
    "Sorted",
]

_SCALAR_TYPES = (bool, int, float, str, type(None))


def _require_value_sort(node: Expr, where: str) -> None:
    if sort_of(node) is Sort.PREDICATE:
        raise IrBuildError(f"{where} must be a value expression, got a predicate")


@dataclass(frozen=True)
class Literal:
    value: object

    def __post_init__(self) -> None:
        if not isinstance(self.value, _SCALAR_TYPES):
            raise IrBuildError(f"literal must be a scalar, got {type(self.value).__name__}")


@dataclass(frozen=True)
class PathRef:
    scope: Scope
    path: PropertyPath | None

    def __post_init__(self) -> None:
        if self.path is None and self.scope is not Scope.ELEMENT:
            raise IrBuildError("only element references may omit the path")


@dataclass(frozen=True)
class Arith:
    op: str
    lhs: Expr
    rhs: Expr

    def __post_init__(self) -> None:
        if self.op not in ARITH_OPS:
            raise IrBuildError(f"unknown arithmetic operator {self.op!r}")
        for side, node in (("lhs", self.lhs), ("rhs", self.rhs)):
            if sort_of(node) not in (Sort.NUMBER, Sort.ANY):
                raise IrBuildError(f"arithmetic {side} is not numeric")


@dataclass(frozen=True)
class StrOp:
    op: str
    args: tuple[Expr, ...]
    pattern: str | None = None

    def __post_init__(self) -> None:
        if self.op not in STR_VALUE_OPS + STR_PRED_OPS:
            raise IrBuildError(f"unknown string operator {self.op!r}")
        want = 2 if self.op == "is_substring_of" else 1
        if len(self.args) != want:
            raise IrBuildError(f"{self.op} takes {want} argument(s), got {len(self.args)}")
        if self.op == "matches_regex":
            if self.pattern is None:
                raise IrBuildError("matches_regex requires a pattern")
            try:
                re.compile(self.pattern)
            except re.error as exc:
                raise IrBuildError(f"bad regex pattern: {exc}") from exc
        elif self.pattern is not None:
            raise IrBuildError(f"{self.op} does not take a pattern")
        for node in self.args:
            if sort_of(node) not in (Sort.STRING, Sort.ANY):
                raise IrBuildError(f"{self.op} argument is not a string")


@dataclass(frozen=True)
class ArraySize:
    arg: Expr

    def __post_init__(self) -> None:
        if sort_of(self.arg) not in (Sort.ARRAY, Sort.ANY):
            raise IrBuildError("array_size argument is not an array")


@dataclass(frozen=True)
class Compare:
    op: str
    lhs: Expr
    rhs: Expr

    def __post_init__(self) -> None:
        if self.op not in COMPARE_OPS:
            raise IrBuildError(f"unknown comparison operator {self.op!r}")
        _require_value_sort(self.lhs, "comparison lhs")
        _require_value_sort(self.rhs, "comparison rhs")
        ls, rs = sort_of(self.lhs), sort_of(self.rhs)
        if Sort.ANY not in (ls, rs) and ls is not rs:
            raise IrBuildError(f"cannot compare {ls.value} with {rs.value}")


@dataclass(frozen=True)
class InSet:
    arg: Expr
    values: tuple[object, ...]

    def __post_init__(self) -> None:
        _require_value_sort(self.arg, "in_set argument")
        if not self.values:
            raise IrBuildError("in_set requires a non-empty value set")
        for v in self.values:
            if not isinstance(v, _SCALAR_TYPES):
                raise IrBuildError("in_set values must be scalars")


@dataclass(frozen=True)
class TypeCheck:
    arg: Expr
    tag: TypeTag
    fmt: str | None = None

    def __post_init__(self) -> None:
        _require_value_sort(self.arg, "type_check argument")
        if self.fmt is not None and self.tag not in _FORMAT_TAGS:
            raise IrBuildError(f"type tag {self.tag.value} does not take a format")


@dataclass(frozen=True)
class Quantifier:
    mode: str
    array: Expr
    predicate: Expr

    def __post_init__(self) -> None:
        if self.mode not in ("all", "any"):
            raise IrBuildError(f"unknown quantifier mode {self.mode!r}")
        if sort_of(self.array) not in (Sort.ARRAY, Sort.ANY):
            raise IrBuildError("quantifier array is not an array")
        if sort_of(self.predicate) is not Sort.PREDICATE:
            raise IrBuildError("quantifier body must be a predicate")


@dataclass(frozen=True)
class Logic:
    op: str
    args: tuple[Expr, ...]

    def __post_init__(self) -> None:
        if self.op not in LOGIC_OPS:
            raise IrBuildError(f"unknown logic operator {self.op!r}")
        if self.op == "not" and len(self.args) != 1:
            raise IrBuildError("not takes exactly one argument")
        if self.op != "not" and len(self.args) < 2:
            raise IrBuildError(f"{self.op} takes at least two arguments")
        for node in self.args:
            if sort_of(node) is not Sort.PREDICATE:
                raise IrBuildError(f"logic {self.op} over a non-predicate")


@dataclass(frozen=True)
class Sorted:
    array: Expr
    key: PropertyPath | None = None
    direction: str = "asc"

    def __post_init__(self) -> None:
        if self.direction not in ("asc", "desc"):
            raise IrBuildError(f"unknown sort direction {self.direction!r}")
        if sort_of(self.array) not in (Sort.ARRAY, Sort.ANY):
            raise IrBuildError("sorted argument is not an array")


def sort_of(node: Expr) -> Sort:
    """Static sort of a node; PathRefs are unknowable until evaluation."""
    match node:
        case Literal(value=v):
            if isinstance(v, bool):
                return Sort.BOOLEAN
            if isinstance(v, (int, float)):
                return Sort.NUMBER
            if isinstance(v, str):
                return Sort.STRING
            return Sort.ANY
        case PathRef():
            return Sort.ANY
        case Arith() | ArraySize():
            return Sort.NUMBER
        case StrOp(op=op):
            if op == "length":
                return Sort.NUMBER
            if op == "lowercase":
                return Sort.STRING
            return Sort.PREDICATE
        case Compare() | InSet() | TypeCheck() | Quantifier() | Logic() | Sorted():
            return Sort.PREDICATE
    raise IrBuildError(f"unknown node type {type(node).__name__}")


def walk(node: Expr):
    """Yield every node of the tree, root first."""
    yield node
    match node:
        case Arith(lhs=l, rhs=r) | Compare(lhs=l, rhs=r):
            yield from walk(l)
            yield from walk(r)
        case StrOp(args=args) | Logic(args=args):
            for a in args:
                yield from walk(a)
        case ArraySize(arg=a) | InSet(arg=a) | TypeCheck(arg=a):
            yield from walk(a)
        case Quantifier(array=arr, predicate=p):
            yield from walk(arr)
            yield from walk(p)
        case Sorted(array=arr):
            yield from walk(arr)


def scopes_used(node: Expr) -> set[Scope]:
    return {n.scope for n in walk(node) if isinstance(n, PathRef)}


def describe(node: Expr) -> str:
    """Compact one-line rendering used in verdict details."""
    match node:
        case Literal(value=v):
            return repr(v)
        case PathRef(scope=s, path=p):
            return f"{s.value}.{p.render()}" if p is not None else s.value
        case Arith(op=op, lhs=l, rhs=r):
            return f"({describe(l)} {op} {describe(r)})"
        case StrOp(op="length", args=(a,)):
            return f"length({describe(a)})"
        case StrOp(op="lowercase", args=(a,)):
            return f"lowercase({describe(a)})"
        case StrOp(op="matches_regex", args=(a,), pattern=p):
            return f"{describe(a)} ~ /{p}/"
        case StrOp(op="is_substring_of", args=(a, b)):
            return f"{describe(a)} in {describe(b)}"
        case ArraySize(arg=a):
            return f"size({describe(a)})"
        case Compare(op=op, lhs=l, rhs=r):
            return f"{describe(l)} {op} {describe(r)}"
        case InSet(arg=a, values=vs):
            return f"{describe(a)} in {{{', '.join(map(repr, vs))}}}"
        case TypeCheck(arg=a, tag=t, fmt=f):
            return f"{describe(a)} is {t.value}" + (f"[{f}]" if f else "")
        case Quantifier(mode=m, array=arr, predicate=p):
            return f"{m}({describe(arr)}: {describe(p)})"
        case Logic(op="not", args=(a,)):
            return f"not({describe(a)})"
        case Logic(op=op, args=args):
            return f" {op} ".join(f"({describe(a)})" for a in args)
        case Sorted(array=arr, key=k, direction=d):
            key = k.render() if k is not None else "."
            return f"sorted({describe(arr)} by {key} {d})"
    return type(node).__name__


@dataclass(frozen=True)
class ValidatorProgram:
    """Compiled form of one constraint: a predicate over an exchange."""

    constraint_id: str
    inputs_required: str  # "request-only" | "response-only" | "both"
    body: Expr
    operation: str | None = None  # "GET /v1/charges", set when bundled
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.inputs_required not in ("request-only", "response-only", "both"):
            raise IrBuildError(f"bad inputs_required {self.inputs_required!r}")
        if sort_of(self.body) is not Sort.PREDICATE:
            raise IrBuildError("program body must be a predicate")
        used = scopes_used(self.body)
        if Scope.REQUEST in used and self.inputs_required == "response-only":
            raise IrBuildError("response-only program references the request")
        if Scope.RESPONSE in used and self.inputs_required == "request-only":
            raise IrBuildError("request-only program references the response")
