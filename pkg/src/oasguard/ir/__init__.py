"""Executable validator language with three-valued semantics."""

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
    describe,
    scopes_used,
    sort_of,
    walk,
)
from .builtins import BadArity, builtin, request_ref, response_ref
from .evaluate import evaluate, evaluate_expr
from .serialize import (
    IR_VERSION,
    IrSyntaxError,
    canonical_json,
    expr_from_dict,
    expr_to_dict,
    parse_program,
    program_from_dict,
    program_to_dict,
    serialize_program,
)
from .values import ABSENT, Value, build_at_path, collect_at_path, get_at_path
from .verdict import (
    EmptyInput,
    Verdict,
    VerdictState,
    aggregate,
    kleene_and,
    kleene_not,
    kleene_or,
)

__all__ = [
    "ABSENT",
    "Arith",
    "ArraySize",
    "BadArity",
    "Compare",
    "EmptyInput",
    "Expr",
    "IR_VERSION",
    "InSet",
    "IrBuildError",
    "IrSyntaxError",
    "Literal",
    "Logic",
    "PathRef",
    "Quantifier",
    "Scope",
    "Sorted",
    "StrOp",
    "TypeCheck",
    "TypeTag",
    "ValidatorProgram",
    "Value",
    "Verdict",
    "VerdictState",
    "aggregate",
    "build_at_path",
    "builtin",
    "canonical_json",
    "collect_at_path",
    "describe",
    "evaluate",
    "evaluate_expr",
    "expr_from_dict",
    "expr_to_dict",
    "get_at_path",
    "kleene_and",
    "kleene_not",
    "kleene_or",
    "parse_program",
    "program_from_dict",
    "program_to_dict",
    "request_ref",
    "response_ref",
    "scopes_used",
    "serialize_program",
    "sort_of",
    "walk",
]
