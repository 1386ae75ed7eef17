"""Oracle category tags shared by the miner, the IR builtins and reports."""

from __future__ import annotations

from enum import Enum


class OracleCategory(str, Enum):
    IO = "I/O"
    IS_URL = "isUrl"
    IS_DATETIME = "isDateTime"
    VALUE_IN_SET = "Value-In-Set"
    COMPOSITE = "Composite"
    IS_DATE = "isDate"
    STRING_SPECIFIC_LENGTH = "String_Specific_Length"
    VALUE_IN_RANGE = "Value-In-Range"
    IS_BOOLEAN = "isBoolean"
    IS_NUMBER = "isNumber"
    IS_UNIXTIME = "isUnixTime"
    TEMPLATE_LITERALS = "Template-Literals"
    ARRAY_IS_STRING = "ArrayTypeOracle_isString"
    ARRAY_SPECIFIC_SIZES = "Array_Specific_Sizes"
    NARY_ATOMIC = "N-ary-atomic"
    IS_TIME = "isTime"
    UNCATEGORIZED = "Uncategorized"

    def __str__(self) -> str:
        return self.value


#: The 16 concrete categories (everything except the fallback bucket).
CONCRETE_CATEGORIES: tuple[OracleCategory, ...] = tuple(
    c for c in OracleCategory if c is not OracleCategory.UNCATEGORIZED
)
