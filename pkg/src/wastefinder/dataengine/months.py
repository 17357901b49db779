"""Year-month arithmetic on "YYYY-MM" strings."""

from __future__ import annotations

import re

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


def month_index(s: str) -> int:
    """Absolute month count; "0000-01" -> 1."""
    m = _MONTH_RE.match(s)
    if not m:
        raise ValueError(f"bad year-month {s!r}, expected YYYY-MM")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range in {s!r}")
    return year * 12 + month


def month_str(index: int) -> str:
    year, month = divmod(index - 1, 12)
    return f"{year:04d}-{month + 1:02d}"


def month_add(s: str, delta: int) -> str:
    return month_str(month_index(s) + delta)


def month_diff(a: str, b: str) -> int:
    """Months from b to a (a - b)."""
    return month_index(a) - month_index(b)
