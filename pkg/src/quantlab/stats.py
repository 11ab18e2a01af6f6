"""Paired Student t-test with a self-contained p-value computation.

The two-sided p-value uses the identity P(|T| >= t) = I_x(df/2, 1/2) with
x = df / (df + t^2), where I is the regularized incomplete beta function,
evaluated here by the standard continued fraction (modified Lentz).  Keeping
the evaluation in-package makes the test machinery independent of any
statistics library, so tests can check it against a numeric-integration
oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Significance thresholds for the verdict symbols.
STRONG_ALPHA = 0.001
WEAK_ALPHA = 0.05

_MAX_CF_ITERATIONS = 300
_CF_EPS = 3e-16
_CF_FPMIN = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_FPMIN:
        d = _CF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITERATIONS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("incomplete beta needs positive shape parameters")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # the continued fraction converges fast only on one side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for T Student-t distributed with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    t = float(t)
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    p = regularized_incomplete_beta(df / 2.0, 0.5, x)
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class TTestVerdict:
    """Outcome of a paired comparison of two error sequences.

    ``symbol`` reads left-to-right for the first sequence: ``≫``/``>`` mean
    the first sequence has significantly LOWER error (is better) at the 0.001
    / 0.05 level, ``≪``/``<`` the opposite, ``~`` no significant difference.
    """

    t: float
    df: int
    p: float
    symbol: str
    direction: str
    degenerate: bool = False


def _symbol(p: float, mean_diff: float) -> tuple[str, str]:
    if p < STRONG_ALPHA:
        return ("≫", "a_better") if mean_diff < 0 else ("≪", "b_better")
    if p < WEAK_ALPHA:
        return (">", "a_better") if mean_diff < 0 else ("<", "b_better")
    return "~", "indistinguishable"


def paired_ttest(errors_a, errors_b) -> TTestVerdict:
    """Two-sided paired t-test on index-aligned error sequences.

    Differences are a - b: a negative mean (first sequence has lower error)
    yields the "a better" symbols.  A zero-variance difference vector gives
    p=1 (zero mean) or a degenerate p=0 verdict (nonzero mean).
    """
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired t-test needs two equal-length 1-d sequences")
    n = a.size
    if n < 2:
        raise ValueError(f"paired t-test needs at least 2 pairs, got {n}")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestVerdict(t=0.0, df=df, p=1.0, symbol="~",
                                direction="indistinguishable")
        t = math.inf if mean > 0 else -math.inf
        symbol, direction = _symbol(0.0, mean)
        return TTestVerdict(t=t, df=df, p=0.0, symbol=symbol,
                            direction=direction, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    p = student_t_two_sided_p(t, df)
    symbol, direction = _symbol(p, mean)
    return TTestVerdict(t=t, df=df, p=p, symbol=symbol, direction=direction)
