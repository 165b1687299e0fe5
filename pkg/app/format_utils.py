#!/usr/bin/env python3
"""
Locale-aware number formatting and plain-text tables for reports.
"""

import logging
from typing import List, Sequence, Union

from babel import Locale, UnknownLocaleError
from babel.numbers import format_decimal, format_percent

logger = logging.getLogger(__name__)

DEFAULT_LOCALE = "en_US"

Number = Union[int, float]


def resolve_locale(locale_code: str) -> Locale:
    """
    Parse a locale such as 'en_US', 'de-DE' or 'pt' with Babel.

    Falls back to en_US (with a warning) when the code cannot be parsed.
    """
    try:
        return Locale.parse(locale_code.replace("-", "_"))
    except (ValueError, TypeError, AttributeError, UnknownLocaleError) as e:
        logger.warning(
            f"Could not use report locale '{locale_code}': {e}; using {DEFAULT_LOCALE}"
        )
        return Locale.parse(DEFAULT_LOCALE)


def format_number(value: Number, locale: str = DEFAULT_LOCALE, digits: int = 3) -> str:
    if isinstance(value, int) and not isinstance(value, bool):
        return format_decimal(value, format="#,##0", locale=resolve_locale(locale))
    pattern = "#,##0." + "0" * digits if digits > 0 else "#,##0"
    return format_decimal(value, format=pattern, locale=resolve_locale(locale))


def format_ratio(value: float, locale: str = DEFAULT_LOCALE, digits: int = 1) -> str:
    """Format 0.263 as '26.3%' (in the locale's notation)."""
    pattern = "#,##0." + "0" * digits + "%" if digits > 0 else "#,##0%"
    return format_percent(value, format=pattern, locale=resolve_locale(locale))


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """
    Align already-formatted cells into columns. Columns whose cells all start
    with a digit, sign or percent value are right-aligned.
    """
    columns = len(headers)
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))

    def numeric(i: int) -> bool:
        cells = [row[i] for row in rows if row[i]]
        return bool(cells) and all(c[0].isdigit() or c[0] in "-+−" for c in cells)

    right = [numeric(i) for i in range(columns)]

    def line(cells: Sequence[str]) -> str:
        return "  ".join(
            cell.rjust(widths[i]) if right[i] else cell.ljust(widths[i])
            for i, cell in enumerate(cells)
        ).rstrip()

    out: List[str] = [line(headers), "  ".join("-" * w for w in widths)]
    out.extend(line(row) for row in rows)
    return "\n".join(out) + "\n"
