"""Distribution-estimate error bounds from one-degree chi-square percentiles.

The estimator's per-category deviation is asymptotically normal, so squared
deviations follow a one-degree chi-square law. A union bound over the r
categories at confidence 1 - alpha uses the upper alpha/r percentile B; the
bounds below then scale sqrt(B / n) by the answer-category variances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .rr_core import DistributionEstimate

ABSOLUTE = "absolute"
RELATIVE = "relative"

_BISECT_TOL = 1e-11
_MAX_STEPS = 240


def chi2_upper_tail_1df(x: float) -> float:
    """P(X > x) for X chi-square with one degree of freedom."""
    if x < 0:
        raise ValueError("chi-square values are non-negative")
    return math.erfc(math.sqrt(x / 2.0))


def chi2_quantile_1df(q: float) -> float:
    """Upper percentile: the B with P(X > B) = q, by bisection on the tail.

    Bisection against the complementary error function keeps the whole
    computation verifiable against published tables; the interval is shrunk
    well below 1e-10.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"tail probability must be in (0, 1), got {q}")
    lo, hi = 0.0, 1.0
    steps = 0
    while chi2_upper_tail_1df(hi) > q:
        hi *= 2.0
        steps += 1
        if steps > 64:
            raise ValueError(f"tail probability {q} too small to invert")
    for _ in range(_MAX_STEPS):
        mid = 0.5 * (lo + hi)
        if chi2_upper_tail_1df(mid) > q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _BISECT_TOL:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ErrorBound:
    """A high-confidence bound on estimation error.

    value may be math.inf (reported as unbounded) when a category with zero
    answer frequency makes the relative bound meaningless.
    """

    kind: str
    value: float
    confidence: float
    categories: int
    n: int

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.value)

    def __str__(self):
        shown = "unbounded" if self.unbounded else f"{self.value:.6g}"
        return f"{self.kind} error <= {shown} at confidence {self.confidence:.4g}"


def _as_values(lam):
    return lam.values if isinstance(lam, DistributionEstimate) else lam


def absolute_error_bound(lam, n: int, alpha: float, categories: int | None = None) -> ErrorBound:
    """Bound max_u |estimate_u - truth_u| at confidence 1 - alpha.

    ``categories`` overrides the union-bound divisor when the caller bounds a
    different number of categories than the vector length.
    """
    values = _as_values(lam)
    r = int(categories) if categories is not None else len(values)
    _check_args(values, n, alpha, r)
    b = chi2_quantile_1df(alpha / r)
    worst = max(v * (1.0 - v) for v in values)
    return ErrorBound(ABSOLUTE, math.sqrt(b * worst / n), 1.0 - alpha, r, n)


def relative_error_bound(lam, n: int, alpha: float, categories: int | None = None) -> ErrorBound:
    """Bound max_u |estimate_u - truth_u| / truth_u at confidence 1 - alpha.

    A zero answer frequency gives an unbounded (infinite) result rather than
    an error: the caller learns the bound carries no information there.
    """
    values = _as_values(lam)
    r = int(categories) if categories is not None else len(values)
    _check_args(values, n, alpha, r)
    if min(values) <= 0.0:
        return ErrorBound(RELATIVE, math.inf, 1.0 - alpha, r, n)
    b = chi2_quantile_1df(alpha / r)
    worst = max((1.0 - v) / v for v in values)
    return ErrorBound(RELATIVE, math.sqrt(b * worst / n), 1.0 - alpha, r, n)


def _check_args(values, n, alpha, r):
    if n < 1:
        raise ValueError("need at least one record")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if r < 1:
        raise ValueError("category count must be positive")
    if len(values) < 1:
        raise ValueError("need a non-empty distribution")


def sqrt_b_curve(category_counts, alpha: float) -> list[tuple[int, float]]:
    """The sqrt(B) factor as a function of the union-bound category count."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    rows = []
    for r in category_counts:
        r = int(r)
        if r < 1:
            raise ValueError("category counts must be positive")
        rows.append((r, math.sqrt(chi2_quantile_1df(alpha / r))))
    return rows


def curve_to_tsv(rows, manifest: str | None = None) -> str:
    lines = []
    if manifest is not None:
        lines.append(f"# manifest: {manifest}")
    lines.append("categories\tsqrt_b")
    lines += [f"{r}\t{v!r}" for r, v in rows]
    return "\n".join(lines) + "\n"
