import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oasguard import ir
from oasguard.paths import PropertyPath

# --- strategies building arbitrary valid programs --------------------------

_paths = st.sampled_from(["amount", "items[].id", "a.b", "created[gt]", "statistics.wiki_size"])
_scalars = st.one_of(
    st.integers(-1000, 1000),
    st.from_regex(r"[a-z]{1,6}", fullmatch=True),
    st.booleans(),
)


def _value_exprs():
    leaf = st.one_of(
        st.builds(ir.Literal, st.integers(-99, 99)),
        st.builds(lambda p: ir.response_ref(p), _paths),
        st.builds(lambda p: ir.request_ref(p), _paths),
    )
    return st.recursive(
        leaf,
        lambda inner: st.one_of(
            st.builds(lambda a, b, op: ir.Arith(op, a, b), inner, inner, st.sampled_from(["+", "-", "*"])),
            st.builds(lambda p: ir.StrOp("length", (ir.response_ref(p),)), _paths),
            st.builds(lambda p: ir.ArraySize(ir.response_ref(p)), _paths),
        ),
        max_leaves=4,
    )


def predicates(max_depth=3):
    base = st.one_of(
        st.builds(lambda op, a, b: ir.Compare(op, a, b),
                  st.sampled_from(["==", "!=", "<", "<=", ">", ">="]),
                  _value_exprs(), _value_exprs()),
        st.builds(lambda p, vs: ir.InSet(ir.response_ref(p), tuple(vs)),
                  _paths, st.lists(_scalars, min_size=1, max_size=4)),
        st.builds(lambda p, tag: ir.TypeCheck(ir.response_ref(p), tag),
                  _paths, st.sampled_from(list(ir.TypeTag))),
        st.builds(lambda p, pat: ir.StrOp("matches_regex", (ir.response_ref(p),), pat),
                  _paths, st.sampled_from([r"^[a-z]{3}$", r"^\d+$", r"ab+c"])),
        st.builds(lambda p, d: ir.Sorted(ir.response_ref(p), None, d),
                  _paths, st.sampled_from(["asc", "desc"])),
    )
    return st.recursive(
        base,
        lambda inner: st.one_of(
            st.builds(lambda a: ir.Logic("not", (a,)), inner),
            st.builds(lambda a, b, op: ir.Logic(op, (a, b)), inner, inner, st.sampled_from(["and", "or"])),
            st.builds(lambda p, pr: ir.Quantifier("all", ir.response_ref(p), pr), _paths, inner),
        ),
        max_leaves=5,
    )


@given(predicates())
def test_round_trip_fuzzed_programs(body):
    program = ir.ValidatorProgram("fuzz", "both", body, operation="GET /x")
    text = ir.serialize_program(program)
    assert ir.parse_program(text) == program


def test_round_trip_preserves_meta_and_operation():
    program = ir.ValidatorProgram(
        "c1",
        "response-only",
        ir.TypeCheck(ir.response_ref("created"), ir.TypeTag.UNIXTIME),
        operation="GET /v1/charges",
        meta={"category": "isUnixTime", "variables": ["return.created"]},
    )
    back = ir.parse_program(ir.serialize_program(program))
    assert back.operation == "GET /v1/charges"
    assert back.meta["category"] == "isUnixTime"


def test_canonical_output_is_stable():
    program = ir.ValidatorProgram(
        "c1", "response-only", ir.Compare(">", ir.response_ref("amount"), ir.Literal(0))
    )
    assert ir.serialize_program(program) == ir.serialize_program(program)
    assert ir.serialize_program(program).endswith("\n")


def test_unknown_node_tag():
    doc = {"ir_version": 1, "constraint_id": "x", "inputs_required": "response-only",
           "body": {"node": "frobnicate"}}
    with pytest.raises(ir.IrSyntaxError) as err:
        ir.program_from_dict(doc)
    assert "frobnicate" in str(err.value)


def test_error_carries_node_path():
    doc = {"ir_version": 1, "constraint_id": "x", "inputs_required": "response-only",
           "body": {"node": "logic", "op": "and", "args": [
               {"node": "compare", "op": ">", "lhs": {"node": "literal", "value": 1},
                "rhs": {"node": "literal", "value": 2}},
               {"node": "nope"}]}}
    with pytest.raises(ir.IrSyntaxError) as err:
        ir.program_from_dict(doc)
    assert err.value.at == "body.args[1]"


def test_wrong_version_rejected():
    with pytest.raises(ir.IrSyntaxError):
        ir.parse_program(json.dumps({"ir_version": 2, "constraint_id": "x",
                                     "inputs_required": "both", "body": {}}))


def test_invalid_json_rejected():
    with pytest.raises(ir.IrSyntaxError):
        ir.parse_program("{nope")


def test_golden_bundle_files_parse(golden_dir):
    bundle = sorted((golden_dir / "bundle").glob("*.json"))
    assert len(bundle) == 6
    for path in bundle:
        program = ir.parse_program(path.read_text())
        assert program.operation == "GET /v1/charges"
        assert ir.serialize_program(program) == path.read_text()


def test_golden_program_expected_tree(golden_dir):
    by_prop = {}
    for path in (golden_dir / "bundle").glob("*.json"):
        program = ir.parse_program(path.read_text())
        by_prop[tuple((program.meta or {}).get("variables", ()))] = program
    currency = by_prop[("return.currency",)]
    assert currency.body == ir.StrOp("matches_regex", (ir.response_ref("currency"),), "^[a-z]{3}$")
    created = by_prop[("return.created",)]
    assert created.body == ir.TypeCheck(ir.response_ref("created"), ir.TypeTag.UNIXTIME)
    io_pair = by_prop[("input.customer", "return.customer")]
    assert io_pair.body == ir.Compare("==", ir.request_ref("customer"), ir.response_ref("customer"))
    assert io_pair.inputs_required == "both"


def test_path_ref_without_path_only_for_element():
    data = {"node": "path", "scope": "response"}
    with pytest.raises(ir.IrSyntaxError):
        ir.expr_from_dict(data)
    element = ir.expr_from_dict({"node": "path", "scope": "element"})
    assert element == ir.PathRef(ir.Scope.ELEMENT, None)


def test_sorted_key_round_trip():
    body = ir.Sorted(ir.response_ref("items"), PropertyPath.parse("created"), "desc")
    p = ir.ValidatorProgram("s", "response-only", body)
    assert ir.parse_program(ir.serialize_program(p)) == p
