"""Closed-form quantities for the linear-fractional process with immigration.

Everything here is driven by a :class:`DTable`, a prefix table of

    D(n) = 1 + sum_{j=1}^{n} m_j m_{j+1} ... m_n,      D(0) = 1,

stored in log form.  Writing ``P_n = m_1 ... m_n`` and
``S_n = sum_{j=0}^{n} 1 / P_j`` one has ``D(n) = P_n * S_n``; since every
``m_k >= 1`` the summands ``1 / P_j`` never overflow, so the table is built
in O(n_max) vectorised work without ever forming a huge intermediate.
The direct value ``D(n)`` is kept alongside ``log D(n)`` while it stays
below ``1e300``; past that only the log is meaningful and ``d`` holds
``inf``.  Every query returns a probability or a ratio and is evaluated
from the logs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .environment import Environment

__all__ = [
    "DTable",
    "build_dtable",
    "d_segment",
    "log_d_segment",
    "prob_zero",
    "prob_zero_given",
    "prob_regen_k",
    "prob_pair_regen_k",
    "expected_regen_count",
    "mean_population",
    "pgf_F",
    "pgf_f_segment",
    "extinction_tail",
]

DIRECT_LIMIT = 1e300
_LOG_DIRECT_LIMIT = math.log(DIRECT_LIMIT)


@dataclass(frozen=True, eq=False)
class DTable:
    """Prefix table of ``D(n)`` for ``n = 0..n_max``.

    Attributes
    ----------
    env : Environment
        Environment the table was built from.
    n_max : int
        Horizon.
    log_d : ndarray
        ``log D(n)``.
    d : ndarray
        ``D(n)`` where it is below ``1e300``, ``inf`` beyond.
    log_prod : ndarray
        ``log(m_1 ... m_n)`` (``0`` at ``n = 0``).
    surv_sum : ndarray
        ``S_n = 1 + sum_{j=1}^{n} 1/(m_1 ... m_j)``.
    inv_d : ndarray
        ``1 / D(n)``.
    inv_cumsum : ndarray
        ``sum_{k=0}^{n} 1 / D(k)``.
    """

    env: Environment
    n_max: int
    log_d: np.ndarray
    d: np.ndarray
    log_prod: np.ndarray
    surv_sum: np.ndarray
    inv_d: np.ndarray
    inv_cumsum: np.ndarray

    def check(self, n: int, name: str = "n") -> None:
        if n < 0 or n > self.n_max:
            raise IndexError(f"{name} = {n} outside table horizon [0, {self.n_max}]")


def build_dtable(env: Environment, n_max: int) -> DTable:
    """Tabulate ``D(n)`` and its companions for ``n = 0..n_max``."""
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError(f"n_max = {n_max} must be positive")
    log_m = env.log_means(1, n_max)  # raises past a custom environment's end
    log_prod = np.concatenate(([0.0], np.cumsum(log_m)))
    surv_sum = np.cumsum(np.exp(-log_prod))
    log_d = log_prod + np.log(surv_sum)
    with np.errstate(over="ignore"):
        d = np.where(log_d < _LOG_DIRECT_LIMIT, np.exp(log_prod) * surv_sum, np.inf)
    inv_d = np.exp(-log_prod) / surv_sum
    inv_cumsum = np.cumsum(inv_d)
    for arr in (log_d, d, log_prod, surv_sum, inv_d, inv_cumsum):
        arr.flags.writeable = False
    return DTable(env, n_max, log_d, d, log_prod, surv_sum, inv_d, inv_cumsum)


def log_d_segment(table: DTable, k: int, n: int) -> float:
    """``log D(k, n)``; ``k = n + 1`` gives the empty sum ``log 1 = 0``.

    Uses ``D(k, n) = D(n) * (1 - prod_{j=k-1}^{n} (1 - 1/D(j)))`` with the
    complement evaluated as ``-expm1(sum log1p(-1/D(j)))``, which keeps full
    relative precision even when ``D(k, n)`` is many orders below ``D(n)``,
    including the range where ``1/D(j)`` itself underflows.
    """
    if not 1 <= k <= n + 1:
        raise ValueError(f"need 1 <= k <= n + 1, got k = {k}, n = {n}")
    table.check(n)
    if k == n + 1:
        return 0.0
    if k == 1:
        return float(table.log_d[n])
    # y = -sum log(1 - 1/D(j)) assembled as logsumexp of log(-log1p(-1/D(j)));
    # for tiny 1/D(j) that log is -log D(j) + log1p(x/2), exact to O(x^2)
    log_dj = table.log_d[k - 1:n + 1]
    x = np.exp(-log_dj)
    with np.errstate(divide="ignore"):
        log_terms = np.where(
            x > 1e-8, np.log(-np.log1p(-np.minimum(x, 0.5))), -log_dj + np.log1p(x / 2)
        )
    log_y = float(logsumexp(log_terms))
    y = math.exp(log_y)
    if y == 0.0:
        return float(table.log_d[n]) + log_y
    return float(table.log_d[n]) + math.log(-math.expm1(-y))


def d_segment(table: DTable, k: int, n: int) -> float:
    """``D(k, n) = 1 + sum_{j=k}^{n} m_j ... m_n`` for ``1 <= k <= n``."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k = {k}, n = {n}")
    return math.exp(log_d_segment(table, k, n))


def prob_zero(table: DTable, n: int) -> float:
    """``P(Z_n = 0) = 1 / D(n)``."""
    table.check(n)
    return float(table.inv_d[n])


def prob_zero_given(table: DTable, k: int, n: int) -> float:
    """``P(Z_n = 0 | Z_k = 0)``.

    Given ``Z_k = 0`` the process restarts with the generation-``k``
    immigrant, whose descendants are driven by ``m_{k+1}, ..., m_n``; the
    answer is therefore ``1 / D(k+1, n)``.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k = {k}, n = {n}")
    table.check(n)
    return math.exp(-log_d_segment(table, k + 1, n))


def _log_window_probs(env: Environment, n: int, k: int) -> float:
    # log prod_{i=1}^{k-1} p_{n+i}
    if k == 1:
        return 0.0
    return math.fsum(np.log(env.probs(n + 1, n + k - 1)))


def prob_regen_k(env: Environment, table: DTable, n: int, k: int) -> float:
    """``P(n in C_k) = prod_{i=1}^{k-1} p_{n+i} / D(n)``.

    ``C_k`` is the set of ``k``-strong regeneration times, i.e. ``n`` with
    ``Z_n = ... = Z_{n+k-1} = 0``.
    """
    if k < 1 or n < 0:
        raise ValueError(f"need n >= 0 and k >= 1, got n = {n}, k = {k}")
    table.check(n + k - 1, "n + k - 1")
    return math.exp(_log_window_probs(env, n, k) - table.log_d[n])


def prob_pair_regen_k(env: Environment, table: DTable, n: int, l: int, k: int) -> float:
    """``P(n in C_k, l in C_k)`` for non-overlapping windows ``l >= n + k``."""
    if k < 1 or n < 0:
        raise ValueError(f"need n >= 0 and k >= 1, got n = {n}, k = {k}")
    if l < n + k:
        raise ValueError(f"windows overlap: l = {l} < n + k = {n + k}")
    table.check(l + k - 1, "l + k - 1")
    log_first = _log_window_probs(env, n, k) - table.log_d[n]
    log_second = _log_window_probs(env, l, k) - log_d_segment(table, n + k, l)
    return math.exp(log_first + log_second)


def expected_regen_count(table: DTable, n: int) -> float:
    """``E #{t in [0, n] : Z_t = 0} = sum_{t=0}^{n} 1 / D(t)``."""
    table.check(n)
    return float(table.inv_cumsum[n])


def mean_population(table: DTable, n: int) -> float:
    """``E Z_n = D(n) - 1``."""
    table.check(n)
    return math.expm1(float(table.log_d[n]))


def _check_s(s: float) -> float:
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s = {s!r} outside [0, 1]")
    return s


def pgf_F(table: DTable, n: int, s: float) -> float:
    """Generating function ``E s^{Z_n} = 1 / (1 + (D(n) - 1)(1 - s))``."""
    s = _check_s(s)
    table.check(n)
    # 1 + (D - 1)(1 - s) = D (1 - s) + s
    with np.errstate(divide="ignore"):
        log_den = np.logaddexp(table.log_d[n] + np.log1p(-s), np.log(s))
    return math.exp(-float(log_den))


def pgf_f_segment(env: Environment, k: int, n: int, s: float) -> float:
    """Composition ``f_k(f_{k+1}(... f_n(s)))`` in closed form.

    Equal to ``(1 + (1-s) sum_{j=k+1}^n m_j..m_n) / (1 + (1-s) sum_{j=k}^n m_j..m_n)``;
    both sums are divided through by ``m_k ... m_n`` before evaluation so
    that only quantities bounded by one appear.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k = {k}, n = {n}")
    s = _check_s(s)
    # c[j] = 1 / (m_k ... m_{k+j}), j = 0..n-k
    c = np.exp(-np.cumsum(env.log_means(k, n)))
    inv_total = c[-1]
    a = math.fsum(c[:-1])
    t = 1.0 - s
    return (inv_total + t * a) / (inv_total + t * (a + 1.0))


def extinction_tail(table: DTable, n: int) -> float:
    """Survival ``P(nu > n) = 1 / (1 + sum_{j=1}^{n} 1/(m_1 ... m_j))``.

    ``nu`` is the extinction time of the same branching mechanism without
    immigration, started from a single individual.
    """
    table.check(n)
    return 1.0 / float(table.surv_sum[n])
