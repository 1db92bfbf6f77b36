"""Welch's t-test, self-contained.

The p-value comes from the Student t survival function evaluated through the
regularized incomplete beta function, computed here with the classic
continued-fraction (modified Lentz) scheme so the package needs no external
statistics library.  Test code cross-checks against an independent
high-precision implementation.
"""

from __future__ import annotations

import math
import sys
from typing import NamedTuple, Sequence

P_FLOOR = sys.float_info.min  # underflowing p-values are reported as this floor


class WelchResult(NamedTuple):
    t: float
    dof: float
    p: float


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise RuntimeError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, dof: float) -> float:
    """Two-sided p-value for a Student t statistic with (possibly fractional) dof."""
    if dof <= 0.0:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    if t == 0.0:
        return 1.0
    x = dof / (dof + t * t)
    p = betainc_reg(dof / 2.0, 0.5, x)
    return min(1.0, max(p, P_FLOOR))


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> WelchResult:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom.

    Requires at least two points per sample and nonzero variance in at least
    one of them.  Underflowing p-values are clamped to the smallest positive
    normal double rather than reported as 0.
    """
    a = [float(v) for v in sample_a]
    b = [float(v) for v in sample_b]
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError(f"each sample needs >= 2 points, got {na} and {nb}")
    ma = sum(a) / na
    mb = sum(b) / nb
    va = sum((v - ma) ** 2 for v in a) / (na - 1)
    vb = sum((v - mb) ** 2 for v in b) / (nb - 1)
    if va == 0.0 and vb == 0.0:
        raise ValueError("both samples have zero variance; the test statistic is undefined")
    sa, sb = va / na, vb / nb
    t = (ma - mb) / math.sqrt(sa + sb)
    dof = (sa + sb) ** 2 / (sa * sa / (na - 1) + sb * sb / (nb - 1))
    return WelchResult(t=t, dof=dof, p=t_two_sided_p(t, dof))
