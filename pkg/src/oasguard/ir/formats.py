"""Format predicates: URL/email checks and the time-pattern mini-language.

Patterns are written with calendar tokens (``YYYY-MM-DDTHH:MM:SSZ``) and
compiled to anchored regexes.  ``MM`` is a month until an ``HH`` has been
seen, a minute afterwards; ``fff`` is a fractional-second group; ``±HH:MM``
is a numeric UTC offset; any other character matches literally.

The bare claims "date", "datetime" and "time" map to strict default pattern
sets; lenient evaluation widens datetimes with fractional-second and
zone-free variants.
"""

from __future__ import annotations

import re
from functools import lru_cache
from urllib.parse import urlsplit

_YEAR = r"\d{4}"
_MONTH = r"(?:0[1-9]|1[0-2])"
_DAY = r"(?:0[1-9]|[12]\d|3[01])"
_HOUR = r"(?:[01]\d|2[0-3])"
_MINSEC = r"[0-5]\d"
_FRACTION = r"\d{1,9}"
_SIGN = r"[+-]"


class PatternError(ValueError):
    """Raised for an unusable time pattern."""


@lru_cache(maxsize=256)
def compile_time_pattern(pattern: str) -> re.Pattern[str]:
    if not pattern:
        raise PatternError("empty time pattern")
    out: list[str] = []
    seen_hour = False
    i = 0
    while i < len(pattern):
        rest = pattern[i:]
        if rest.startswith("YYYY"):
            out.append(_YEAR)
            i += 4
        elif rest.startswith("DD"):
            out.append(_DAY)
            i += 2
        elif rest.startswith("HH"):
            out.append(_HOUR)
            seen_hour = True
            i += 2
        elif rest.startswith("SS"):
            out.append(_MINSEC)
            i += 2
        elif rest.startswith("MM"):
            out.append(_MINSEC if seen_hour else _MONTH)
            i += 2
        elif rest.startswith("fff"):
            out.append(_FRACTION)
            i += 3
        elif rest.startswith("±"):
            out.append(_SIGN)
            i += 1
        else:
            out.append(re.escape(pattern[i]))
            i += 1
    return re.compile("".join(out))


STRICT_DATETIME_PATTERNS = (
    "YYYY-MM-DDTHH:MM:SSZ",
    "YYYY-MM-DDTHH:MM:SS±HH:MM",
)
LENIENT_DATETIME_EXTRAS = (
    "YYYY-MM-DDTHH:MM:SS.fffZ",
    "YYYY-MM-DDTHH:MM:SS.fff±HH:MM",
    "YYYY-MM-DDTHH:MM:SS",
)
DATE_PATTERNS = ("YYYY-MM-DD",)
TIME_PATTERNS = ("HH:MM:SS",)


def datetime_patterns(fmt: str | None, lenient: bool) -> tuple[str, ...]:
    if fmt is not None:
        return (fmt,)
    if lenient:
        return STRICT_DATETIME_PATTERNS + LENIENT_DATETIME_EXTRAS
    return STRICT_DATETIME_PATTERNS


def date_patterns(fmt: str | None) -> tuple[str, ...]:
    return (fmt,) if fmt is not None else DATE_PATTERNS


def time_patterns(fmt: str | None) -> tuple[str, ...]:
    return (fmt,) if fmt is not None else TIME_PATTERNS


def matches_any_pattern(text: str, patterns: tuple[str, ...]) -> bool:
    return any(compile_time_pattern(p).fullmatch(text) for p in patterns)


def is_url(text: str) -> bool:
    try:
        parts = urlsplit(text)
    except ValueError:
        return False
    return bool(parts.scheme) and parts.scheme.isalpha() and bool(parts.netloc)


_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")


def is_email(text: str) -> bool:
    return _EMAIL_RE.fullmatch(text) is not None
