"""Exact rational parsing and rendering.

All graph values, weights, and constraint coefficients in this package are
`fractions.Fraction`.  Decimal literals are parsed exactly (0.7005 becomes
7005/10000), never through binary floating point.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Sequence, Union

Rat = Fraction
RatLike = Union[Fraction, int, str, float]

_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_QUOTIENT_RE = re.compile(r"^([+-]?\d+)\s*/\s*(\d+)$")


def rat(value: RatLike) -> Fraction:
    """Convert a number or literal to an exact Fraction.

    Accepts Fraction, int, quotient strings like ``-7/3``, and decimal
    strings like ``0.7005`` or ``1e-3`` (parsed exactly).  Floats are
    rejected unless they are integral, to keep binary rounding noise out
    of exact pipelines; use a string literal for fractional constants.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a rational")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value != int(value):
            raise TypeError(
                f"refusing to convert non-integral float {value!r}; "
                "pass a string literal for an exact value"
            )
        return Fraction(int(value))
    if isinstance(value, str):
        text = value.strip()
        m = _QUOTIENT_RE.match(text)
        if m:
            return Fraction(int(m.group(1)), int(m.group(2)))
        if _DECIMAL_RE.match(text):
            return Fraction(text)  # Fraction parses decimal strings exactly
        raise ValueError(f"not a rational literal: {value!r}")
    raise TypeError(f"cannot convert {type(value).__name__} to rational")


def rat_vec(values: Iterable[RatLike]) -> tuple[Fraction, ...]:
    return tuple(rat(v) for v in values)


def rat_mat(rows: Iterable[Iterable[RatLike]]) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(rat(v) for v in row) for row in rows)


def dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    if len(a) != len(b):
        raise ValueError(f"dot length mismatch {len(a)} vs {len(b)}")
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def mat_vec(a: Sequence[Sequence[Fraction]], v: Sequence[Fraction]) -> tuple[Fraction, ...]:
    return tuple(dot(row, v) for row in a)


def format_rat(value: Fraction) -> str:
    """Canonical text form: integer or ``p/q`` in lowest terms."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def smt_term(value: Fraction) -> str:
    """SMT-LIB 2 real term, always an exact quotient or integer literal."""
    n, d = value.numerator, value.denominator
    if d == 1:
        return f"{n}.0" if n >= 0 else f"(- {-n}.0)"
    if n >= 0:
        return f"(/ {n}.0 {d}.0)"
    return f"(- (/ {-n}.0 {d}.0))"


def decimal_str(value: Fraction, digits: int = 12) -> str:
    """Decimal rendering for reports; exact when the denominator is 2^a 5^b."""
    d = value.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d == 1:
        # exact finite decimal expansion
        sign = "-" if value < 0 else ""
        value = abs(value)
        scale = 1
        k = 0
        while scale % value.denominator != 0:
            scale *= 10
            k += 1
        digits_int = value.numerator * (scale // value.denominator)
        text = str(digits_int).rjust(k + 1, "0")
        return sign + (text if k == 0 else f"{text[:-k]}.{text[-k:]}")
    return f"{float(value):.{digits}g}"
