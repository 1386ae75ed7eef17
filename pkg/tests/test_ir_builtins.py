"""Every oracle category must be constructible and separate good from bad values."""

import pytest

from oasguard import ir
from oasguard.categories import CONCRETE_CATEGORIES, OracleCategory
from oasguard.ir import BadArity, builtin

M = ir.VerdictState.MATCHED
X = ir.VerdictState.MISMATCHED

# (category, builder args, satisfying response, violating response)
CATEGORY_CASES = [
    (OracleCategory.IO, (">=", "limit", "count"), None, None),  # exercised separately
    (OracleCategory.IS_URL, ("link",), {"link": "https://example.com/a"}, {"link": "not a url"}),
    (OracleCategory.IS_DATETIME, ("at",), {"at": "2012-09-20T08:50:22Z"},
     {"at": "2012-09-20T08:50:22.000Z"}),
    (OracleCategory.VALUE_IN_SET, ("wiki_size", (0, 41943)), {"wiki_size": 41943}, {"wiki_size": 7}),
    (OracleCategory.COMPOSITE,
     ("and", (builtin("isNumber", "amount"), builtin("Value-In-Range", "amount", 1, 9))),
     {"amount": 5}, {"amount": 11}),
    (OracleCategory.IS_DATE, ("day",), {"day": "2023-03-17"}, {"day": "17/03/2023"}),
    (OracleCategory.STRING_SPECIFIC_LENGTH, ("runners_token", 29),
     {"runners_token": "r" * 29}, {"runners_token": "r" * 28}),
    (OracleCategory.VALUE_IN_RANGE, ("adults", 1, 9), {"adults": 5}, {"adults": 0}),
    (OracleCategory.IS_BOOLEAN, ("enabled",), {"enabled": True}, {"enabled": "true"}),
    (OracleCategory.IS_NUMBER, ("total",), {"total": 3.14}, {"total": "3.14"}),
    (OracleCategory.IS_UNIXTIME, ("created",), {"created": 1679090539}, {"created": -1}),
    (OracleCategory.TEMPLATE_LITERALS, ("currency", "^[a-z]{3}$"), {"currency": "usd"},
     {"currency": "USD"}),
    (OracleCategory.ARRAY_IS_STRING, ("labels",), {"labels": ["a", "b"]}, {"labels": ["a", 3]}),
    (OracleCategory.ARRAY_SPECIFIC_SIZES, ("images", (1, 3)), {"images": [1, 2, 3]}, {"images": []}),
    (OracleCategory.NARY_ATOMIC,
     ("==", "sellingTotal",
      ir.Arith("-", ir.Arith("+", ir.Arith("+", ir.Arith("+", ir.response_ref("total"),
       ir.response_ref("margins")), ir.response_ref("markup")), ir.response_ref("totalFees")),
       ir.response_ref("discounts"))),
     {"sellingTotal": 100, "total": 100, "margins": 5, "markup": 3, "totalFees": 2, "discounts": 10},
     {"sellingTotal": 99, "total": 100, "margins": 5, "markup": 3, "totalFees": 2, "discounts": 10}),
    (OracleCategory.IS_TIME, ("at",), {"at": "08:50:22"}, {"at": "8:50"}),
]


def test_every_concrete_category_has_a_case():
    covered = {case[0] for case in CATEGORY_CASES}
    assert covered == set(CONCRETE_CATEGORIES)


@pytest.mark.parametrize(
    "category,args,good,bad",
    [c for c in CATEGORY_CASES if c[0] is not OracleCategory.IO],
    ids=lambda v: v.value if isinstance(v, OracleCategory) else None,
)
def test_satisfying_and_violating_values(category, args, good, bad):
    expr = builtin(category, *args)
    assert ir.evaluate_expr(expr, {}, good).state is M
    assert ir.evaluate_expr(expr, {}, bad).state is X


def test_io_builtin():
    expr = builtin(OracleCategory.IO, ">=", "limit", "count")
    assert ir.evaluate_expr(expr, {"limit": 10}, {"count": 5}).state is M
    assert ir.evaluate_expr(expr, {"limit": 10}, {"count": 50}).state is X


def test_value_in_range_boundaries():
    expr = builtin("Value-In-Range", "n", 1, 9)
    assert ir.evaluate_expr(expr, {}, {"n": 1}).state is M
    assert ir.evaluate_expr(expr, {}, {"n": 9}).state is M
    assert ir.evaluate_expr(expr, {}, {"n": 10}).state is X


def test_accepts_string_category_names():
    expr = builtin("isUrl", "link")
    assert ir.evaluate_expr(expr, {}, {"link": "https://example.com"}).state is M


@pytest.mark.parametrize(
    "category,args",
    [
        ("Value-In-Range", ("n", 1)),          # missing hi
        ("Value-In-Set", ("n",)),              # missing members
        ("isUrl", ()),                          # missing expr
        ("String_Specific_Length", ("s", "x")),  # non-int length
        ("Composite", ("xor", ())),            # bad op
        ("I/O", (">=", "limit")),              # missing response path
    ],
)
def test_bad_arity(category, args):
    with pytest.raises(BadArity):
        builtin(category, *args)


def test_unknown_category_rejected():
    with pytest.raises(ValueError):
        builtin("NotACategory", "x")
