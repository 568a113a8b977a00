"""Brute-force forward dynamic programme for the law of ``Z_n``.

This is the ground truth the closed forms in :mod:`bpve.analytics` are
checked against, so it shares no code with them.  Given ``Z_{t-1} = z``,
``Z_t`` is the sum of ``1 + z`` independent geometric(``p_t``) variables,
i.e. negative binomial:

    P(Z_t = j | Z_{t-1} = z) = C(j + z, j) p^{1+z} q^j.

Rows of that kernel are built from the ratio recurrence
``P(j+1) / P(j) = q (j + 1 + z) / (j + 1)``, accumulated in log space so
that rows whose leading term ``p^{1+z}`` underflows are still correct.  The
state space is truncated at ``cap``; whatever mass leaves ``[0, cap]`` is
booked in ``lost_mass``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy import stats

from .environment import Environment

__all__ = [
    "ExactDistribution",
    "nb_kernel",
    "nb_kernel_by_convolution",
    "exact_distribution",
    "exact_joint_zero",
    "default_cap",
]


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    """Truncated law of ``Z_n``: ``pmf[j] = P(Z_n = j)`` for ``j <= cap``."""

    pmf: np.ndarray
    lost_mass: float
    generation: int

    @property
    def cap(self) -> int:
        return len(self.pmf) - 1

    def mean(self) -> float:
        """Mean over the retained support (a lower bound on ``E Z_n``)."""
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))

    def pgf(self, s: float) -> float:
        """``sum_j pmf[j] s^j``; the true value exceeds this by at most ``lost_mass``."""
        return float(np.polynomial.polynomial.polyval(s, self.pmf))


def default_cap(n: int) -> int:
    return 10 * (n + 1)


def nb_kernel(p: float, cap: int) -> np.ndarray:
    """Transition matrix ``K[z, j] = P(next = j | current = z)`` on ``0..cap``."""
    q = 1.0 - p
    z = np.arange(cap + 1, dtype=float)[:, None]
    j = np.arange(1, cap + 1, dtype=float)[None, :]
    if q == 0.0:
        kernel = np.zeros((cap + 1, cap + 1))
        kernel[:, 0] = 1.0
        return kernel
    steps = np.log(q) + np.log(j + z) - np.log(j)
    log_rows = np.concatenate(
        [np.zeros((cap + 1, 1)), np.cumsum(steps, axis=1)], axis=1
    )
    log_rows += (1.0 + z) * math.log(p)
    return np.exp(log_rows)


def nb_kernel_by_convolution(p: float, cap: int) -> np.ndarray:
    """Same kernel as :func:`nb_kernel`, built as repeated geometric convolutions.

    Row ``z`` is the ``(1 + z)``-fold convolution of the geometric law with
    itself, truncated to ``0..cap``.  Quadratic in ``cap`` per row; only used
    to cross-check :func:`nb_kernel` on small caps.
    """
    q = 1.0 - p
    geom = p * q ** np.arange(cap + 1)
    kernel = np.empty((cap + 1, cap + 1))
    row = geom.copy()
    for z in range(cap + 1):
        kernel[z] = row
        row = np.convolve(row, geom)[: cap + 1]
    return kernel


@lru_cache(maxsize=16)
def _cached_kernel(p: float, cap: int) -> tuple[np.ndarray, np.ndarray]:
    kernel = nb_kernel(p, cap)
    # P(next > cap | z), computed directly rather than as 1 - rowsum
    tail = stats.nbinom.sf(cap, np.arange(cap + 1) + 1, p)
    kernel.flags.writeable = False
    tail.flags.writeable = False
    return kernel, tail


def _step(pmf: np.ndarray, p: float, cap: int) -> tuple[np.ndarray, float]:
    live = np.flatnonzero(pmf)
    top = int(live[-1]) + 1 if live.size else 1
    kernel, tail = _cached_kernel(p, cap)
    new = pmf[:top] @ kernel[:top]
    lost = float(np.dot(pmf[:top], tail[:top]))
    return new, lost


def exact_distribution(env: Environment, n: int, cap: int | None = None) -> ExactDistribution:
    """Law of ``Z_n`` truncated to ``0..cap`` by forward propagation.

    ``cap`` defaults to ``10 (n + 1)``.  Callers with an error budget should
    inspect ``lost_mass`` on the result; it is reported, never raised.
    """
    if n < 0:
        raise ValueError(f"n = {n} must be nonnegative")
    cap = default_cap(n) if cap is None else int(cap)
    if cap < 1:
        raise ValueError(f"cap = {cap} must be positive")
    pmf = np.zeros(cap + 1)
    pmf[0] = 1.0
    lost = 0.0
    if n > 0:
        probs = env.probs(1, n)
        for p in probs:
            pmf, step_lost = _step(pmf, float(p), cap)
            lost += step_lost
    return ExactDistribution(pmf, lost, n)


def exact_joint_zero(
    env: Environment, times: Iterable[int], n: int, cap: int | None = None
) -> float:
    """``P(Z_t = 0 for every t in times)`` by forward propagation with killing.

    At each listed generation all mass away from zero is discarded.  Mass
    after the last listed time only redistributes, so the propagation stops
    there; ``n`` only bounds the admissible times.
    """
    times = list(times)
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError(f"times must be strictly increasing, got {times}")
    if not times:
        return 1.0
    if times[0] < 0 or times[-1] > n:
        raise ValueError(f"times must lie in [0, {n}], got {times}")
    cap = default_cap(n) if cap is None else int(cap)
    if cap < 1:
        raise ValueError(f"cap = {cap} must be positive")
    last = times[-1]
    kill = set(times)
    probs = env.probs(1, last) if last > 0 else np.empty(0)
    pmf = np.zeros(cap + 1)
    pmf[0] = 1.0
    for t in range(1, last + 1):
        pmf, _ = _step(pmf, float(probs[t - 1]), cap)
        if t in kill:
            pmf[1:] = 0.0
    return float(pmf[0])
