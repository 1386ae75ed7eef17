"""Three-valued evaluation of validator programs over request/response pairs.

Every failure mode is a verdict, never an exception: missing or null data
yields Unknown, a positively violated check yields Mismatched.  Verdict
details carry the offending path and value for downstream mismatch reports.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..paths import PropertyPath
from . import formats
from .ast import (
    Arith,
    ArraySize,
    Compare,
    Expr,
    InSet,
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
    describe,
)
from .values import ABSENT, Value, get_at_path, is_number
from .verdict import Verdict, VerdictState, kleene_and, kleene_not, kleene_or

REL_TOL = 1e-9
ABS_TOL = 1e-12


@dataclass(frozen=True)
class Undef:
    """A value that could not be produced, with the reason."""

    reason: str


@dataclass
class _Context:
    request: Value
    response: Value
    lenient_formats: bool = False
    element: Value = ABSENT
    element_bound: bool = False

    def with_element(self, element: Value) -> "_Context":
        return _Context(self.request, self.response, self.lenient_formats, element, True)


def evaluate(
    program: ValidatorProgram,
    request: Value,
    response: Value,
    *,
    lenient_formats: bool = False,
) -> Verdict:
    """Run one program against one exchange."""
    ctx = _Context(request=request, response=response, lenient_formats=lenient_formats)
    return _pred(program.body, ctx)


def evaluate_expr(expr: Expr, request: Value, response: Value) -> Verdict:
    """Evaluate a bare predicate expression (used by tests and the service)."""
    return _pred(expr, _Context(request=request, response=response))


def _resolve(ref: PathRef, ctx: _Context) -> Value | Undef:
    if ref.scope is Scope.ELEMENT:
        if not ctx.element_bound:
            return Undef("element reference outside a quantifier")
        root = ctx.element
        if ref.path is None:
            if root is None:
                return Undef("null array element")
            return root
        label = f"element.{ref.path.render()}"
    elif ref.scope is Scope.REQUEST:
        root, label = ctx.request, f"request.{ref.path.render()}"
    else:
        root, label = ctx.response, f"response.{ref.path.render()}"

    assert ref.path is not None
    if ref.path.has_wildcard():
        return _resolve_wildcard(root, ref.path, label)
    current = root
    for seg in ref.path.segments:
        if current is None:
            return Undef(f"null value at {label}")
        if not isinstance(current, dict) or seg not in current:
            return Undef(f"missing value at {label}")
        current = current[seg]
    if current is ABSENT:
        return Undef(f"missing value at {label}")
    if current is None:
        return Undef(f"null value at {label}")
    return current


def _resolve_wildcard(root: Value, path: PropertyPath, label: str) -> Value | Undef:
    from ..paths import WILDCARD

    def walk(value: Value, segments: tuple[str, ...]) -> list[Value] | Undef:
        if not segments:
            return [value]
        head, rest = segments[0], segments[1:]
        if head == WILDCARD:
            if not isinstance(value, list):
                return Undef(f"expected an array while resolving {label}")
            out: list[Value] = []
            for item in value:
                got = walk(item, rest)
                if isinstance(got, Undef):
                    continue  # elements lacking the leaf are skipped
                out.extend(got)
            return out
        if not isinstance(value, dict) or head not in value:
            return Undef(f"missing value at {label}")
        nxt = value[head]
        if nxt is None:
            return Undef(f"null value at {label}")
        return walk(nxt, rest)

    return walk(root, path.segments)


def _value(node: Expr, ctx: _Context) -> Value | Undef:
    match node:
        case Literal(value=v):
            return v
        case PathRef():
            return _resolve(node, ctx)
        case Arith(op=op, lhs=lhs, rhs=rhs):
            left = _value(lhs, ctx)
            if isinstance(left, Undef):
                return left
            right = _value(rhs, ctx)
            if isinstance(right, Undef):
                return right
            if not is_number(left) or not is_number(right):
                return Undef(f"non-numeric operand in {describe(node)}")
            if op == "+":
                return left + right
            if op == "-":
                return left - right
            if op == "*":
                return left * right
            if right == 0:
                return Undef(f"division by zero in {describe(node)}")
            return left / right
        case StrOp(op="length", args=(arg,)):
            got = _value(arg, ctx)
            if isinstance(got, Undef):
                return got
            if not isinstance(got, str):
                return Undef(f"length of a non-string at {describe(arg)}")
            return len(got)
        case StrOp(op="lowercase", args=(arg,)):
            got = _value(arg, ctx)
            if isinstance(got, Undef):
                return got
            if not isinstance(got, str):
                return Undef(f"lowercase of a non-string at {describe(arg)}")
            return got.lower()
        case ArraySize(arg=arg):
            got = _value(arg, ctx)
            if isinstance(got, Undef):
                return got
            if not isinstance(got, list):
                return Undef(f"size of a non-array at {describe(arg)}")
            return len(got)
    raise AssertionError(f"not a value expression: {type(node).__name__}")


def _numeric_eq(a: float, b: float) -> bool:
    if isinstance(a, int) and isinstance(b, int):
        return a == b
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=ABS_TOL)


def _compare_values(op: str, left: Value, right: Value) -> Verdict | None:
    """None means the two values are not comparable."""
    if is_number(left) and is_number(right):
        if op == "==":
            ok = _numeric_eq(left, right)
        elif op == "!=":
            ok = not _numeric_eq(left, right)
        else:
            ok = _ORDER_OPS[op](left, right)
        return Verdict.matched() if ok else _cmp_mismatch(op, left, right)
    if isinstance(left, str) and isinstance(right, str):
        ok = _ORDER_OPS[op](left, right) if op not in ("==", "!=") else (
            (left == right) if op == "==" else (left != right)
        )
        return Verdict.matched() if ok else _cmp_mismatch(op, left, right)
    if isinstance(left, bool) and isinstance(right, bool):
        if op not in ("==", "!="):
            return None
        ok = (left == right) if op == "==" else (left != right)
        return Verdict.matched() if ok else _cmp_mismatch(op, left, right)
    if isinstance(left, (list, dict)) or isinstance(right, (list, dict)):
        if op not in ("==", "!=") or type(left) is not type(right):
            return None
        ok = (left == right) if op == "==" else (left != right)
        return Verdict.matched() if ok else _cmp_mismatch(op, left, right)
    if left is None or right is None:
        if op not in ("==", "!="):
            return None
        ok = (left is right) if op == "==" else (left is not right)
        return Verdict.matched() if ok else _cmp_mismatch(op, left, right)
    return None


def _cmp_mismatch(op: str, left: Value, right: Value) -> Verdict:
    return Verdict.mismatched(f"comparison failed: {left!r} {op} {right!r}")


_ORDER_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _pred(node: Expr, ctx: _Context) -> Verdict:
    match node:
        case Compare(op=op, lhs=lhs, rhs=rhs):
            left = _value(lhs, ctx)
            if isinstance(left, Undef):
                return Verdict.unknown(left.reason)
            right = _value(rhs, ctx)
            if isinstance(right, Undef):
                return Verdict.unknown(right.reason)
            verdict = _compare_values(op, left, right)
            if verdict is None:
                return Verdict.unknown(
                    f"incomparable values in {describe(node)}: {left!r} vs {right!r}"
                )
            if verdict.state is VerdictState.MISMATCHED:
                return Verdict.mismatched(
                    f"comparison failed: {describe(lhs)}={left!r} {op} {describe(rhs)}={right!r}"
                )
            return verdict
        case StrOp(op="matches_regex", args=(arg,), pattern=pattern):
            got = _value(arg, ctx)
            if isinstance(got, Undef):
                return Verdict.unknown(got.reason)
            if not isinstance(got, str):
                return Verdict.mismatched(
                    f"format check failed at {describe(arg)}: {got!r} is not a string"
                )
            assert pattern is not None
            if re.search(pattern, got):
                return Verdict.matched()
            return Verdict.mismatched(
                f"format check failed at {describe(arg)}: {got!r} does not match /{pattern}/"
            )
        case StrOp(op="is_substring_of", args=(needle, hay)):
            n = _value(needle, ctx)
            if isinstance(n, Undef):
                return Verdict.unknown(n.reason)
            h = _value(hay, ctx)
            if isinstance(h, Undef):
                return Verdict.unknown(h.reason)
            if not isinstance(n, str) or not isinstance(h, str):
                return Verdict.mismatched(f"substring check on non-strings: {n!r}, {h!r}")
            if n in h:
                return Verdict.matched()
            return Verdict.mismatched(f"{n!r} is not a substring of {h!r}")
        case InSet(arg=arg, values=values):
            got = _value(arg, ctx)
            if isinstance(got, Undef):
                return Verdict.unknown(got.reason)
            if _in_set(got, values):
                return Verdict.matched()
            return Verdict.mismatched(
                f"value check failed at {describe(arg)}: {got!r} not in {set(values)!r}"
            )
        case TypeCheck(arg=arg, tag=tag, fmt=fmt):
            got = _value(arg, ctx)
            if isinstance(got, Undef):
                return Verdict.unknown(got.reason)
            return _type_check(got, tag, fmt, ctx, where=describe(arg))
        case Quantifier(mode=mode, array=array, predicate=predicate):
            got = _value(array, ctx)
            if isinstance(got, Undef):
                return Verdict.unknown(got.reason)
            if not isinstance(got, list):
                return Verdict.unknown(f"{describe(array)} is not an array")
            if not got:
                return Verdict.unknown(f"empty array at {describe(array)}")
            verdicts = [_pred(predicate, ctx.with_element(item)) for item in got]
            combine = kleene_and if mode == "all" else kleene_or
            out = verdicts[0]
            for v in verdicts[1:]:
                out = combine(out, v)
            return out
        case Logic(op="not", args=(arg,)):
            return kleene_not(_pred(arg, ctx))
        case Logic(op=op, args=args):
            combine = kleene_and if op == "and" else kleene_or
            out = _pred(args[0], ctx)
            for a in args[1:]:
                out = combine(out, _pred(a, ctx))
            return out
        case Sorted(array=array, key=key, direction=direction):
            got = _value(array, ctx)
            if isinstance(got, Undef):
                return Verdict.unknown(got.reason)
            if not isinstance(got, list):
                return Verdict.unknown(f"{describe(array)} is not an array")
            if not got:
                return Verdict.unknown(f"empty array at {describe(array)}")
            return _check_sorted(got, key, direction, describe(array))
    raise AssertionError(f"not a predicate expression: {type(node).__name__}")


def _in_set(value: Value, members: tuple[object, ...]) -> bool:
    for m in members:
        if isinstance(value, bool) or isinstance(m, bool):
            if isinstance(value, bool) and isinstance(m, bool) and value is m:
                return True
        elif is_number(value) and is_number(m):
            if _numeric_eq(value, m):
                return True
        elif type(value) is type(m) and value == m:
            return True
    return False


def _type_check(value: Value, tag: TypeTag, fmt: str | None, ctx: _Context, where: str) -> Verdict:
    def fail(why: str) -> Verdict:
        return Verdict.mismatched(f"type/format check failed at {where}: {why}")

    if tag is TypeTag.BOOLEAN:
        return Verdict.matched() if isinstance(value, bool) else fail(f"{value!r} is not a boolean")
    if tag is TypeTag.INTEGER:
        ok = isinstance(value, int) and not isinstance(value, bool)
        return Verdict.matched() if ok else fail(f"{value!r} is not an integer")
    if tag is TypeTag.NUMBER:
        return Verdict.matched() if is_number(value) else fail(f"{value!r} is not a number")
    if tag is TypeTag.STRING:
        return Verdict.matched() if isinstance(value, str) else fail(f"{value!r} is not a string")
    if tag is TypeTag.UNIXTIME:
        ok = isinstance(value, int) and not isinstance(value, bool) and value >= 0
        return Verdict.matched() if ok else fail(f"{value!r} is not a Unix timestamp")
    if tag is TypeTag.ARRAY_OF_STRING:
        if not isinstance(value, list):
            return fail(f"{value!r} is not an array")
        if not value:
            return Verdict.unknown(f"empty array at {where}")
        bad = next((v for v in value if not isinstance(v, str)), None)
        if bad is None:
            return Verdict.matched()
        return fail(f"array element {bad!r} is not a string")
    if not isinstance(value, str):
        return fail(f"{value!r} is not a string")
    if tag is TypeTag.URL:
        return Verdict.matched() if formats.is_url(value) else fail(f"{value!r} is not a URL")
    if tag is TypeTag.EMAIL:
        return Verdict.matched() if formats.is_email(value) else fail(f"{value!r} is not an email")
    if tag is TypeTag.DATE:
        patterns = formats.date_patterns(fmt)
    elif tag is TypeTag.TIME:
        patterns = formats.time_patterns(fmt)
    else:
        patterns = formats.datetime_patterns(fmt, ctx.lenient_formats)
    if formats.matches_any_pattern(value, patterns):
        return Verdict.matched()
    shown = fmt if fmt is not None else "|".join(patterns)
    return fail(f"{value!r} does not match the {tag.value} pattern {shown}")


def _check_sorted(items: list, key: PropertyPath | None, direction: str, where: str) -> Verdict:
    keys: list[Value | Undef] = []
    for i, item in enumerate(items):
        if key is None:
            k: Value = item
        else:
            k = get_at_path(item, key)
        if k is ABSENT or k is None:
            keys.append(Undef(f"element {i} of {where} lacks the sort key"))
        else:
            keys.append(k)
    worst = Verdict.matched()
    for i in range(len(items) - 1):
        a, b = keys[i], keys[i + 1]
        if isinstance(a, Undef):
            worst = kleene_and(worst, Verdict.unknown(a.reason))
            continue
        if isinstance(b, Undef):
            worst = kleene_and(worst, Verdict.unknown(b.reason))
            continue
        op = "<=" if direction == "asc" else ">="
        got = _compare_values(op, a, b)
        if got is None:
            worst = kleene_and(worst, Verdict.unknown(f"incomparable sort keys in {where}"))
        elif got.state is VerdictState.MISMATCHED:
            return Verdict.mismatched(
                f"sort order violated in {where} at index {i}: {a!r} then {b!r} ({direction})"
            )
    return worst
