"""Paired nonparametric tests for matched binary outcomes.

Implements Cochran's Q omnibus test over k matched binary treatments,
pairwise McNemar tests (exact binomial for small discordant counts,
continuity-corrected chi-square otherwise) and Holm step-down adjustment.
The chi-square survival function is computed directly from the regularized
upper incomplete gamma so the package carries no statistics dependency.
"""

from __future__ import annotations

import math
from typing import Sequence

_GAMMA_EPS = 1e-12
_GAMMA_MAX_ITER = 10_000


def _lower_gamma_series(s: float, x: float) -> float:
    """Regularized lower incomplete gamma P(s, x) by power series (x < s+1)."""
    term = 1.0 / s
    total = term
    a = s
    for _ in range(_GAMMA_MAX_ITER):
        a += 1.0
        term *= x / a
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))

def _upper_gamma_cf(s: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(s, x) by continued fraction (x >= s+1)."""
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return h * math.exp(-x + s * math.log(x) - math.lgamma(s))


def chi2_sf(x: float, df: int) -> float:
    """Survival function of the chi-square distribution with ``df`` degrees."""
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if x < 0:
        raise ValueError(f"chi-square statistic must be >= 0, got {x}")
    if x == 0.0:
        return 1.0
    s = df / 2.0
    half_x = x / 2.0
    if half_x < s + 1.0:
        return max(0.0, min(1.0, 1.0 - _lower_gamma_series(s, half_x)))
    return max(0.0, min(1.0, _upper_gamma_cf(s, half_x)))


def _check_binary(values) -> None:
    for v in values:
        if v not in (0, 1):
            raise ValueError(f"expected binary entries, got {v!r}")


def cochran_q(outcomes: Sequence[Sequence[int]]) -> tuple[float, int, float]:
    """Cochran's Q test over an n-by-k matrix of matched binary outcomes.

    Returns (Q, df, p). Rows whose entries are all equal contribute nothing;
    an all-constant matrix yields Q=0, p=1 by convention.
    """
    n = len(outcomes)
    if n < 1:
        raise ValueError("need at least one row")
    k = len(outcomes[0])
    if k < 2:
        raise ValueError("need at least two treatments")
    for row in outcomes:
        if len(row) != k:
            raise ValueError("ragged outcome matrix")
        _check_binary(row)

    col_totals = [sum(row[j] for row in outcomes) for j in range(k)]
    row_totals = [sum(row) for row in outcomes]
    grand = sum(row_totals)
    df = k - 1
    denom = k * grand - sum(r * r for r in row_totals)
    if denom == 0:
        return 0.0, df, 1.0
    q = df * (k * sum(c * c for c in col_totals) - grand * grand) / denom
    return q, df, chi2_sf(q, df)


def mcnemar(pairs: Sequence[Sequence[int]]) -> tuple[float, float]:
    """McNemar test on an n-by-2 matrix of paired binary outcomes.

    Uses the exact two-sided binomial test when the discordant count b+c is
    below 25, otherwise the continuity-corrected chi-square statistic.
    Returns (statistic, p).
    """
    b = 0  # first method 1, second 0
    c = 0  # first method 0, second 1
    for row in pairs:
        if len(row) != 2:
            raise ValueError("pairs must have exactly two columns")
        _check_binary(row)
        if row[0] == 1 and row[1] == 0:
            b += 1
        elif row[0] == 0 and row[1] == 1:
            c += 1
    n_discordant = b + c
    if n_discordant == 0:
        return 0.0, 1.0
    if n_discordant < 25:
        m = min(b, c)
        tail = sum(math.comb(n_discordant, i) for i in range(m + 1))
        p = min(1.0, 2.0 * tail * 0.5**n_discordant)
        return float(m), p
    stat = (abs(b - c) - 1.0) ** 2 / n_discordant
    return stat, chi2_sf(stat, 1)


def holm_adjust(pvalues: Sequence[float]) -> list[float]:
    """Holm step-down adjustment, returned in the original order."""
    m = len(pvalues)
    for p in pvalues:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value out of range: {p}")
    order = sorted(range(m), key=lambda i: pvalues[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, min(1.0, (m - rank) * pvalues[idx]))
        adjusted[idx] = running
    return adjusted
