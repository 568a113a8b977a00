"""Shared fixtures and independent reference computations.

The helpers below deliberately avoid ``bpve.analytics``: they evaluate the
defining sums and compositions term by term so that the closed forms can be
checked against them.
"""
import math

import pytest

from bpve.environment import make_constant, make_near_critical

_ACCEPTANCE = []


def direct_D(m, k, n):
    """1 + sum_{j=k}^{n} m_j ... m_n from an explicit double loop (m is 1-indexed via m[j-1])."""
    total = 1.0
    for j in range(k, n + 1):
        prod = 1.0
        for i in range(j, n + 1):
            prod *= m[i - 1]
        total += prod
    return total


def composed_pgf(p, k, n, s):
    """f_k(f_{k+1}(... f_n(s))) with f_j(s) = p_j / (1 - q_j s).

    Iterated on t = 1 - s, where f_j becomes p / (p + q t) and
    1 - f_j becomes q t / (p + q t); both stay accurate near s = 0 and s = 1.
    """
    t = 1.0 - s
    x = s
    for j in range(n, k - 1, -1):
        pj = p[j - 1]
        qj = 1.0 - pj
        den = pj + qj * t
        x = pj / den
        t = qj * t / den
    return x


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture
def critical():
    return make_constant(0.5)


@pytest.fixture
def quarter():
    return make_constant(0.25)


@pytest.fixture
def drift_one():
    return make_near_critical(1.0, 1)


@pytest.fixture(scope="session")
def acceptance_report():
    def record(criterion, passed, detail):
        _ACCEPTANCE.append((criterion, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] criterion {criterion}: {detail}")


def harmonic(n):
    return math.fsum(1.0 / (k + 1) for k in range(n + 1))
