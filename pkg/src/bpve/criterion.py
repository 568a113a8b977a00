"""Finite-horizon diagnostics for the number of regeneration times.

Whether ``sum_{n>=2} 1 / (D(n) log n)`` converges decides whether the
process has finitely or infinitely many regeneration times.  Convergence of
an infinite series cannot be decided from finitely many terms, so two
kinds of answer are kept apart:

* :func:`classify_near_critical` is exact, but only for the near-critical
  family ``p_i = 1/2 - B/(4i)``: finitely many regenerations iff ``B >= 1``.
* :func:`series_diagnostic` works for any table and only reports what the
  computed terms look like; its verdicts carry a ``-diagnostic`` suffix.

The diagnostic uses ``D(n) = P_n S_n`` with ``P_n = m_1 ... m_n`` and
``S_n = sum_{j<=n} 1/P_j``.  If ``P_n`` grows like ``n^b`` with ``b < 1``
then ``S_n ~ n^{1-b}``, ``D(n) ~ n`` and the terms behave like
``1/(n log n)`` (divergent); if ``b > 1`` the terms are ``~ n^{-b}/log n``
(convergent).  At ``b = 1`` the decision moves to the logarithmic exponent
``beta`` in ``term(n) ~ c / (n (log n)^beta)``, convergent iff ``beta > 1``.
Fitting ``b`` rather than the raw decay of the terms matters: the slowly
vanishing corrections in ``S_n`` make ``B = 0.9`` look convergent over any
practical window when the terms are fitted directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .analytics import DTable
from .environment import Environment

__all__ = [
    "CriterionReport",
    "GrowthConstants",
    "CONVERGES",
    "DIVERGES",
    "INCONCLUSIVE",
    "checkpoint_schedule",
    "series_terms",
    "series_diagnostic",
    "growth_check",
    "probabilities_bounded_below",
    "classify_near_critical",
    "estimate_growth_constants",
]

CONVERGES = "converges-diagnostic"
DIVERGES = "diverges-diagnostic"
INCONCLUSIVE = "inconclusive"

EXPONENT_MARGIN = 0.05
MIN_DECADE_POINTS = 10
# term * n * log n = n / D(n) must stay within this factor over the window
RATIO_SPREAD_LIMIT = 2.0


def checkpoint_schedule(n_max: int, per_decade: int = 10, n_min: int = 2) -> np.ndarray:
    """Geometric checkpoints ``n_max * 10^(-j/per_decade)`` down to ``n_min``.

    Counting back from ``n_max`` guarantees ``per_decade + 1`` points in
    the final decade whenever ``n_max >= 10 n_min``.
    """
    if n_max < n_min:
        raise ValueError(f"n_max = {n_max} below n_min = {n_min}")
    j_max = int(math.floor(per_decade * math.log10(n_max / n_min) + 1e-9))
    pts = np.round(n_max * 10.0 ** (-np.arange(j_max + 1) / per_decade)).astype(np.int64)
    return np.unique(np.clip(pts, n_min, n_max))


def series_terms(table: DTable) -> np.ndarray:
    """``1 / (D(n) log n)`` for ``n = 0..n_max``, zero for ``n < 2``."""
    n = np.arange(table.n_max + 1, dtype=float)
    out = np.zeros(table.n_max + 1)
    out[2:] = table.inv_d[2:] / np.log(n[2:])
    return out


@dataclass(frozen=True)
class CriterionReport:
    """Outcome of :func:`series_diagnostic`.

    ``fitted_tail_exponent`` is the raw log-log slope of the terms over the
    final decade; ``product_exponent`` and ``log_exponent`` are the fitted
    ``b`` and ``beta`` that the verdict is based on.
    """

    checkpoints: np.ndarray
    partial_sums: np.ndarray
    fitted_tail_exponent: float
    product_exponent: float
    log_exponent: float
    ratio_spread: float
    delta: float
    growth_ok: bool
    verdict: str


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(x, y, 1)[0])


def series_diagnostic(
    table: DTable, checkpoints: Sequence[int] | None = None, delta: float = 1.0
) -> CriterionReport:
    """Partial sums of ``sum 1/(D(n) log n)`` and a convergence diagnostic.

    Exponents are fitted by least squares over the checkpoints in the final
    decade ``[n_last / 10, n_last]``; with fewer than 10 such checkpoints the
    verdict is ``inconclusive``.  ``growth_ok`` reports whether
    ``D(n) <= delta n log n`` throughout that decade.
    """
    if checkpoints is None:
        checkpoints = checkpoint_schedule(table.n_max)
    ck = np.unique(np.asarray(checkpoints, dtype=np.int64))
    if ck.size == 0 or ck[0] < 2 or ck[-1] > table.n_max:
        raise ValueError(f"checkpoints must lie in [2, {table.n_max}]")
    terms = series_terms(table)
    partial = np.cumsum(terms)[ck]

    window = ck[ck * 10 >= ck[-1]]
    x = np.log(window.astype(float))
    # log term(n) = -log D(n) - log log n, finite even where the term underflows
    log_term = -table.log_d[window] - np.log(x)
    if window.size >= 2:
        raw_alpha = -_slope(x, log_term)
        b = _slope(x, table.log_prod[window])
        # term * n ~ c (log n)^(-beta)
        beta = -_slope(np.log(x), log_term + x)
    else:
        raw_alpha = b = beta = math.nan
    log_ratio = x - table.log_d[window]
    spread = float(np.exp(min(log_ratio.max() - log_ratio.min(), 700.0)))
    growth_ok = growth_check(table, delta, int(window[0]), int(window[-1]))

    if window.size < MIN_DECADE_POINTS:
        verdict = INCONCLUSIVE
    elif b > 1.0 + EXPONENT_MARGIN:
        verdict = CONVERGES
    elif b < 1.0 - EXPONENT_MARGIN:
        verdict = DIVERGES if spread <= RATIO_SPREAD_LIMIT else INCONCLUSIVE
    elif beta > 1.0 + EXPONENT_MARGIN:
        verdict = CONVERGES
    elif beta < 1.0 - EXPONENT_MARGIN:
        verdict = DIVERGES
    else:
        verdict = INCONCLUSIVE
    return CriterionReport(
        ck, partial, raw_alpha, b, beta, spread, float(delta), growth_ok, verdict
    )


def growth_check(table: DTable, delta: float, n_from: int, n_to: int) -> bool:
    """True iff ``D(n) <= delta * n * log n`` for every ``n`` in ``[n_from, n_to]``."""
    if delta <= 0:
        raise ValueError(f"delta = {delta} must be positive")
    if not 2 <= n_from <= n_to <= table.n_max:
        raise ValueError(
            f"need 2 <= n_from <= n_to <= {table.n_max}, got [{n_from}, {n_to}]"
        )
    n = np.arange(n_from, n_to + 1, dtype=float)
    bound = math.log(delta) + np.log(n) + np.log(np.log(n))
    return bool(np.all(table.log_d[n_from:n_to + 1] <= bound))


def probabilities_bounded_below(env: Environment, eps: float, n_from: int, n_to: int) -> bool:
    """True iff ``p_n >= eps`` on ``[n_from, n_to]``.

    Windowed stand-in for the uniform hypothesis ``p_n >= eps > 0``.
    """
    if eps <= 0:
        raise ValueError(f"eps = {eps} must be positive")
    return bool(np.all(env.probs(n_from, n_to) >= eps))


def classify_near_critical(B: float) -> Literal["finite", "infinite"]:
    """Exact classification for the near-critical family.

    Finitely many regeneration times almost surely iff ``B >= 1``.
    """
    if not B >= 0:
        raise ValueError(f"B = {B!r} must be nonnegative")
    return "finite" if B >= 1 else "infinite"


@dataclass(frozen=True)
class GrowthConstants:
    """Fitted constants in ``m_1..m_n ~ c_prod n^B`` and
    ``sum_{i<=n} 1/(m_1..m_i) ~ c_sum n^(1-B) / (1-B)``.

    Residuals are the largest relative deviation of the data from the fit
    over the window; ``c_sum`` is ``None`` when ``B >= 1``.
    """

    c_prod: float
    prod_residual: float
    c_sum: float | None
    sum_residual: float | None


def _fit_constant(log_y: np.ndarray, log_model: np.ndarray) -> tuple[float, float]:
    log_c = float(np.mean(log_y - log_model))
    resid = float(np.max(np.abs(np.expm1(log_y - log_model - log_c))))
    return math.exp(log_c), resid


def estimate_growth_constants(table: DTable, B: float, points: int = 100) -> GrowthConstants:
    """Least-squares (in log space) constants over the final decade of the table."""
    if table.n_max < 1000:
        raise ValueError(f"horizon {table.n_max} too short; need at least 1000")
    if B < 0:
        raise ValueError(f"B = {B!r} must be nonnegative")
    n = np.unique(np.round(np.geomspace(table.n_max / 10, table.n_max, points)).astype(np.int64))
    log_n = np.log(n.astype(float))
    c_prod, r_prod = _fit_constant(table.log_prod[n], B * log_n)
    if B >= 1:
        return GrowthConstants(c_prod, r_prod, None, None)
    sums = table.surv_sum[n] - 1.0
    c_sum, r_sum = _fit_constant(np.log(sums), (1 - B) * log_n - math.log(1 - B))
    return GrowthConstants(c_prod, r_prod, c_sum, r_sum)
