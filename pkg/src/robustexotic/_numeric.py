"""Rational parsing and extended-real encoding shared by every module."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

NEG_INF = -math.inf
POS_INF = math.inf

Number = Union[Fraction, float]

RATIONAL = "rational"
FLOAT = "float"
MODES = (RATIONAL, FLOAT)

DEFAULT_TOL = 1e-9


def parse_rational(text) -> Fraction:
    """Parse ``"p/q"``, a decimal string, or an int into an exact Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool):
        raise ValueError(f"not a rational: {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        if not math.isfinite(text):
            raise ValueError(f"not a finite rational: {text!r}")
        return Fraction(text)
    if isinstance(text, str):
        try:
            return Fraction(text.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational: {text!r}") from exc
    raise ValueError(f"not a rational: {text!r}")


def parse_ext(text) -> Number:
    """Like :func:`parse_rational` but also accepts ``-inf``."""
    if isinstance(text, str) and text.strip().lower() in ("-inf", "-infinity"):
        return NEG_INF
    if isinstance(text, float) and text == NEG_INF:
        return NEG_INF
    return parse_rational(text)


def format_ext(value) -> str:
    """Canonical string for an extended real (``"-inf"``, ``"+inf"``, ``"p/q"``)."""
    if value is None:
        return "null"
    if isinstance(value, float):
        if value == NEG_INF:
            return "-inf"
        if value == POS_INF:
            return "+inf"
        return repr(value)
    value = Fraction(value)
    return str(value)


def is_finite(value) -> bool:
    return not (isinstance(value, float) and math.isinf(value))


def to_mode(value, mode: str):
    if mode == FLOAT and not isinstance(value, float):
        return float(value)
    return value


def close(a, b, mode: str, tol: float = DEFAULT_TOL) -> bool:
    """Equality of extended reals; exact in rational mode, relative+absolute in float."""
    if not is_finite(a) or not is_finite(b):
        return a == b
    if mode == RATIONAL and not isinstance(a, float) and not isinstance(b, float):
        return a == b
    a, b = float(a), float(b)
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def leq(a, b, mode: str, tol: float = DEFAULT_TOL) -> bool:
    """``a <= b`` with float slack in float mode."""
    if not is_finite(a) or not is_finite(b):
        return a <= b
    if mode == RATIONAL and not isinstance(a, float) and not isinstance(b, float):
        return a <= b
    a, b = float(a), float(b)
    return a <= b + tol * max(1.0, abs(a), abs(b))
