"""Wigner 3j symbols from the Racah formula, exact up to two float roundings.

The alternating Racah sum and the triangle/projection prefactors are evaluated
in exact rational arithmetic (``fractions.Fraction`` over ``math.factorial``),
so the only floating-point error is the final square root and one multiply.
Integer and half-integer angular momenta are supported; arguments that violate
a selection rule return 0.0 rather than raising.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

__all__ = ["wigner3j"]


def _twice(x: float, name: str) -> int:
    """Map a half-integer argument to an exact doubled integer."""
    d = 2.0 * float(x)
    rounded = round(d)
    if abs(d - rounded) > 1e-9:
        raise ValueError(f"{name}={x!r} is not an integer or half-integer")
    return int(rounded)


@lru_cache(maxsize=None)
def _wigner3j_doubled(d1: int, d2: int, d3: int, e1: int, e2: int, e3: int) -> float:
    # All quantities below are doubled (2j, 2m) so half-integers stay integral.
    if d1 < 0 or d2 < 0 or d3 < 0:
        return 0.0
    if e1 + e2 + e3 != 0:
        return 0.0
    if abs(e1) > d1 or abs(e2) > d2 or abs(e3) > d3:
        return 0.0
    # triangle rule and integer perimeter
    if d3 < abs(d1 - d2) or d3 > d1 + d2 or (d1 + d2 + d3) % 2 != 0:
        return 0.0
    # each |j, m> needs j - m integral
    if (d1 - e1) % 2 or (d2 - e2) % 2 or (d3 - e3) % 2:
        return 0.0

    f = math.factorial

    def fh(doubled: int) -> int:
        return f(doubled // 2)

    # Racah sum over k; bounds keep every factorial argument non-negative.
    k_min = max(0, (d2 - d3 - e1) // 2, (d1 - d3 + e2) // 2)
    k_max = min((d1 + d2 - d3) // 2, (d1 - e1) // 2, (d2 + e2) // 2)
    if k_max < k_min:
        return 0.0

    total = Fraction(0)
    for k in range(k_min, k_max + 1):
        denom = (
            f(k)
            * fh(d1 + d2 - d3 - 2 * k)
            * fh(d1 - e1 - 2 * k)
            * fh(d2 + e2 - 2 * k)
            * fh(d3 - d2 + e1 + 2 * k)
            * fh(d3 - d1 - e2 + 2 * k)
        )
        total += Fraction(-1 if k % 2 else 1, denom)
    if total == 0:
        return 0.0

    norm = Fraction(
        fh(d1 + d2 - d3) * fh(d1 - d2 + d3) * fh(-d1 + d2 + d3),
        fh(d1 + d2 + d3 + 2),
    )
    norm *= fh(d1 + e1) * fh(d1 - e1) * fh(d2 + e2) * fh(d2 - e2) * fh(d3 + e3) * fh(d3 - e3)

    phase_exp = (d1 - d2 - e3) // 2
    sign = -1.0 if phase_exp % 2 else 1.0
    return sign * math.sqrt(float(norm)) * float(total)


def wigner3j(j1: float, j2: float, j3: float, m1: float, m2: float, m3: float) -> float:
    """Evaluate the Wigner 3j symbol (j1 j2 j3; m1 m2 m3).

    Returns 0.0 whenever the triangle rule, m1+m2+m3 = 0, or |m| <= j fails.
    """
    return _wigner3j_doubled(
        _twice(j1, "j1"),
        _twice(j2, "j2"),
        _twice(j3, "j3"),
        _twice(m1, "m1"),
        _twice(m2, "m2"),
        _twice(m3, "m3"),
    )
