"""Canonical expression constructors, one per oracle category."""

from __future__ import annotations

from ..categories import OracleCategory
from ..paths import PropertyPath
from .ast import (
    Arith,
    ArraySize,
    Compare,
    Expr,
    InSet,
    Literal,
    Logic,
    PathRef,
    Scope,
    Sorted,
    StrOp,
    TypeCheck,
    TypeTag,
)


class BadArity(ValueError):
    """Raised when builtin arguments do not match the category's shape."""


def response_ref(path: str | PropertyPath) -> PathRef:
    if isinstance(path, str):
        path = PropertyPath.parse(path)
    return PathRef(Scope.RESPONSE, path)


def request_ref(path: str | PropertyPath) -> PathRef:
    if isinstance(path, str):
        path = PropertyPath.parse(path)
    return PathRef(Scope.REQUEST, path)


_NODE_TYPES = (
    Literal, PathRef, Arith, StrOp, ArraySize, Compare, InSet, TypeCheck, Logic, Sorted,
)


def _as_value_expr(arg: object) -> Expr:
    """Response path strings and scalars are the common call shapes."""
    if isinstance(arg, _NODE_TYPES):
        return arg
    if isinstance(arg, PropertyPath):
        return response_ref(arg)
    if isinstance(arg, str):
        return response_ref(arg)
    if isinstance(arg, (bool, int, float)) or arg is None:
        return Literal(arg)
    raise BadArity(f"cannot interpret {arg!r} as an expression")


def _expect(args: tuple, lo: int, hi: int, category: OracleCategory) -> None:
    if not (lo <= len(args) <= hi):
        want = str(lo) if lo == hi else f"{lo}..{hi}"
        raise BadArity(f"{category.value} takes {want} argument(s), got {len(args)}")


def builtin(category: OracleCategory | str, *args) -> Expr:
    """Build the canonical expression for an oracle category.

    Path arguments may be given as strings (response-scoped); the I/O
    category takes (compare-op, request-path, response-path).
    """
    cat = OracleCategory(category)

    if cat is OracleCategory.IO:
        _expect(args, 3, 3, cat)
        op, req, resp = args
        return Compare(op, request_ref(req), response_ref(resp))
    if cat is OracleCategory.IS_URL:
        _expect(args, 1, 1, cat)
        return TypeCheck(_as_value_expr(args[0]), TypeTag.URL)
    if cat is OracleCategory.IS_DATETIME:
        _expect(args, 1, 2, cat)
        fmt = args[1] if len(args) == 2 else None
        return TypeCheck(_as_value_expr(args[0]), TypeTag.DATETIME, fmt)
    if cat is OracleCategory.VALUE_IN_SET:
        _expect(args, 2, 2, cat)
        expr, members = args
        try:
            members = tuple(members)
        except TypeError as exc:
            raise BadArity("Value-In-Set needs an iterable of members") from exc
        return InSet(_as_value_expr(expr), members)
    if cat is OracleCategory.COMPOSITE:
        _expect(args, 2, 2, cat)
        op, parts = args
        if op not in ("and", "or"):
            raise BadArity("Composite op must be 'and' or 'or'")
        parts = tuple(parts)
        if len(parts) < 2:
            raise BadArity("Composite needs at least two sub-oracles")
        return Logic(op, parts)
    if cat is OracleCategory.IS_DATE:
        _expect(args, 1, 2, cat)
        fmt = args[1] if len(args) == 2 else None
        return TypeCheck(_as_value_expr(args[0]), TypeTag.DATE, fmt)
    if cat is OracleCategory.STRING_SPECIFIC_LENGTH:
        _expect(args, 2, 2, cat)
        expr, n = args
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise BadArity("String_Specific_Length needs a non-negative int")
        return Compare("==", StrOp("length", (_as_value_expr(expr),)), Literal(n))
    if cat is OracleCategory.VALUE_IN_RANGE:
        _expect(args, 3, 3, cat)
        expr, lo, hi = args
        node = _as_value_expr(expr)
        return Logic(
            "and",
            (Compare(">=", node, Literal(lo)), Compare("<=", node, Literal(hi))),
        )
    if cat is OracleCategory.IS_BOOLEAN:
        _expect(args, 1, 1, cat)
        return TypeCheck(_as_value_expr(args[0]), TypeTag.BOOLEAN)
    if cat is OracleCategory.IS_NUMBER:
        _expect(args, 1, 1, cat)
        return TypeCheck(_as_value_expr(args[0]), TypeTag.NUMBER)
    if cat is OracleCategory.IS_UNIXTIME:
        _expect(args, 1, 1, cat)
        return TypeCheck(_as_value_expr(args[0]), TypeTag.UNIXTIME)
    if cat is OracleCategory.TEMPLATE_LITERALS:
        _expect(args, 2, 2, cat)
        expr, pattern = args
        if not isinstance(pattern, str):
            raise BadArity("Template-Literals needs a regex pattern string")
        return StrOp("matches_regex", (_as_value_expr(expr),), pattern)
    if cat is OracleCategory.ARRAY_IS_STRING:
        _expect(args, 1, 1, cat)
        return TypeCheck(_as_value_expr(args[0]), TypeTag.ARRAY_OF_STRING)
    if cat is OracleCategory.ARRAY_SPECIFIC_SIZES:
        _expect(args, 2, 2, cat)
        expr, sizes = args
        try:
            sizes = tuple(sizes)
        except TypeError as exc:
            raise BadArity("Array_Specific_Sizes needs an iterable of sizes") from exc
        if not all(isinstance(s, int) and not isinstance(s, bool) for s in sizes):
            raise BadArity("array sizes must be integers")
        return InSet(ArraySize(_as_value_expr(expr)), sizes)
    if cat is OracleCategory.NARY_ATOMIC:
        _expect(args, 3, 3, cat)
        op, lhs, rhs = args
        return Compare(op, _as_value_expr(lhs), _as_value_expr(rhs))
    if cat is OracleCategory.IS_TIME:
        _expect(args, 1, 2, cat)
        fmt = args[1] if len(args) == 2 else None
        return TypeCheck(_as_value_expr(args[0]), TypeTag.TIME, fmt)

    raise BadArity(f"no builtin for category {cat.value}")
