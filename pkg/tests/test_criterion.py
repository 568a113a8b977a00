import math

import numpy as np
import pytest

from bpve.analytics import build_dtable
from bpve.criterion import (
    CONVERGES,
    DIVERGES,
    INCONCLUSIVE,
    checkpoint_schedule,
    classify_near_critical,
    estimate_growth_constants,
    growth_check,
    probabilities_bounded_below,
    series_diagnostic,
    series_terms,
)
from bpve.environment import make_constant, make_near_critical

HORIZON = 10**6


@pytest.fixture(scope="module")
def tables():
    return {B: build_dtable(make_near_critical(B), HORIZON) for B in (0, 0.25, 0.5, 0.75, 0.9, 1, 1.5, 2)}


def test_schedule_final_decade_density():
    ck = checkpoint_schedule(HORIZON)
    assert ck[-1] == HORIZON and ck[0] >= 2
    assert np.sum(ck * 10 >= HORIZON) == 11
    assert np.all(np.diff(ck) > 0)
    assert np.sum(checkpoint_schedule(37_000) * 10 >= 37_000) == 11


@pytest.mark.parametrize("B,expected", [(2, CONVERGES), (1, CONVERGES), (0.5, DIVERGES)])
def test_diagnostic_regimes(tables, B, expected):
    assert series_diagnostic(tables[B]).verdict == expected


def test_diagnostic_fields(tables):
    r = series_diagnostic(tables[2])
    assert r.product_exponent == pytest.approx(2.0, abs=1e-3)
    assert r.fitted_tail_exponent == pytest.approx(2.0, abs=0.1)
    assert np.all(np.diff(r.partial_sums) >= 0)
    assert r.growth_ok is False


def test_diagnostic_too_few_points(tables):
    r = series_diagnostic(tables[2], [10, 100, 1000, 10_000, 100_000])
    assert r.verdict == INCONCLUSIVE


def test_diagnostic_checkpoint_validation(tables):
    with pytest.raises(ValueError):
        series_diagnostic(tables[0], [1, 10])
    with pytest.raises(ValueError):
        series_diagnostic(tables[0], [10, HORIZON + 1])


def test_diagnostic_exponential_growth():
    t = build_dtable(make_constant(0.25), 5000)
    r = series_diagnostic(t)
    assert r.verdict == CONVERGES
    assert math.isfinite(r.fitted_tail_exponent)


def test_partial_sums_monotone_any_env(tables):
    for t in tables.values():
        assert np.all(np.diff(np.cumsum(series_terms(t))) >= 0)


@pytest.mark.parametrize("B", [0, 0.25, 0.5, 0.75])
def test_subcritical_drift_terms_like_n_log_n(tables, B):
    n = np.unique(np.geomspace(1e3, HORIZON, 200).astype(int))
    ratio = series_terms(tables[B])[n] * n * np.log(n)
    assert ratio.min() > 0.1 and ratio.max() < 10
    # D(n) ~ n / (1 - B)
    assert ratio[-1] == pytest.approx(1 - B, rel=0.05)


def test_boundary_drift_terms_like_n_log2_n(tables):
    n = np.unique(np.geomspace(1e3, HORIZON, 200).astype(int))
    ratio = series_terms(tables[1])[n] * n * np.log(n) ** 2
    assert ratio.min() > 0.5 and ratio.max() < 1.0


@pytest.mark.parametrize("B", [0, 0.5, 0.9, 1, 1.5, 2])
def test_classifier_agrees_with_diagnostic(tables, B):
    verdict = series_diagnostic(tables[B]).verdict
    expected = CONVERGES if classify_near_critical(B) == "finite" else DIVERGES
    assert verdict == expected


def test_classifier_examples():
    assert classify_near_critical(0) == "infinite"
    assert classify_near_critical(1) == "finite"
    assert classify_near_critical(0.99) == "infinite"
    with pytest.raises(ValueError):
        classify_near_critical(-1)


def test_growth_check_examples(tables):
    assert growth_check(build_dtable(make_constant(0.5), 10**4), 1.0, 10, 10**4)
    assert growth_check(tables[0.5], 10.0, 100, 10**5)
    assert not growth_check(build_dtable(make_constant(0.25), 100), 1.0, 10, 100)


def test_growth_check_with_fitted_constant(tables):
    for B in (0, 0.25, 0.5, 0.75):
        t = tables[B]
        c_fit = t.d[HORIZON] / HORIZON
        assert growth_check(t, 2 * c_fit, 1000, HORIZON)


def test_growth_check_range(tables):
    with pytest.raises(ValueError):
        growth_check(tables[0], 1.0, 1, 10)
    with pytest.raises(ValueError):
        growth_check(tables[0], 1.0, 10, HORIZON + 1)
    with pytest.raises(ValueError):
        growth_check(tables[0], 0.0, 10, 20)


def test_probabilities_bounded_below():
    assert probabilities_bounded_below(make_near_critical(1.5), 0.1, 1, 10**5)
    assert not probabilities_bounded_below(make_constant(0.05), 0.1, 1, 10)


def test_growth_constants_zero_drift(tables):
    g = estimate_growth_constants(tables[0], 0)
    assert g.c_prod == 1.0 and g.prod_residual == 0.0
    assert g.c_sum == pytest.approx(1.0, rel=1e-6)


def test_growth_constants_drift_one():
    g = estimate_growth_constants(build_dtable(make_near_critical(1.0, 1), 10**5), 1.0)
    # m_1 ... m_n = (2n + 1) / 3 telescopes
    assert g.c_prod == pytest.approx(2 / 3, rel=1e-4)
    assert g.c_sum is None


def test_growth_constants_half_drift(tables):
    g = estimate_growth_constants(tables[0.5], 0.5)
    assert g.prod_residual < 0.01 and g.sum_residual < 0.01


def test_growth_constants_short_table():
    with pytest.raises(ValueError):
        estimate_growth_constants(build_dtable(make_constant(0.5), 100), 0)
