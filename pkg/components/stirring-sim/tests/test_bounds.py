import math
from fractions import Fraction

import pytest
from pydantic import ValidationError

from stirring_sim.bounds import (
    angel_comparison,
    angel_criterion,
    angel_criterion_riemann,
    angel_percolation_exclusion,
    c1,
    c1_star,
    c2,
    c2_star,
    classify_T,
    DomainError,
    drift_condition,
    expr_series_bound,
    exprone_lower_bound,
    gamma_of,
    is_starred_regime,
    lemcomp_f,
    percolation_exclusion,
    proved_half_line,
    RegimeParams,
    useful_bar_tail_bound,
    Verdict,
)


def test_constant_limits():
    assert 4 / 18 == pytest.approx(c1(2, 1000.0))
    assert 1 / 12 == pytest.approx(c2(2, 1000.0))
    assert 39 / 18 == pytest.approx(c1_star(39))
    assert 0.7125 == pytest.approx(c2_star(39, 11.0), abs=1e-12)
    assert 0.0 == c2_star(39, 0.0)


def test_constants_increase_in_T():
    grid = [0.1 * k for k in range(1, 100)]
    for d in [2, 3, 39]:
        for lower, higher in zip(grid, grid[1:]):
            assert c1(d, lower) <= c1(d, higher)
            assert c2(d, lower) <= c2(d, higher)
            # Strict only while the exponential is visible in double precision
            if math.exp(-(d + 1) * higher / 2) > 1e-12:
                assert c1(d, lower) < c1(d, higher)
            if math.exp(-(d - 1) * higher / 2) > 1e-12:
                assert c2(d, lower) < c2(d, higher)


def test_constants_need_two_offspring():
    with pytest.raises(DomainError):
        c1(1, 1.0)
    with pytest.raises(ValueError):
        c2_star(1, 1.0)


def test_drift_condition():
    assert 16.41 == pytest.approx(drift_condition(39, 11.0, True), abs=0.01)
    assert drift_condition(39, 429 / 39, True) > 0
    assert drift_condition(2, 0.01, False) < 0
    assert is_starred_regime(39, 11.0)
    assert not is_starred_regime(38, 20.0)


def test_starred_drift_is_nondecreasing_in_T():
    grid = [1 + 0.5 * k for k in range(99)]
    for d in range(39, 61):
        values = [drift_condition(d, T, True) for T in grid]
        assert all(later >= earlier for earlier, later in zip(values, values[1:]))


def test_percolation_exclusion():
    assert math.log(2) == pytest.approx(percolation_exclusion(2), abs=1e-12)
    assert math.isinf(percolation_exclusion(1))
    assert math.log(2) == pytest.approx(angel_percolation_exclusion(3), abs=1e-12)
    assert 1.0 == pytest.approx(10**6 * percolation_exclusion(10**6), abs=1e-5)
    with pytest.raises(DomainError):
        angel_percolation_exclusion(1)


def test_percolation_exclusion_exceeds_series():
    for d in range(2, 10**4 + 1):
        assert percolation_exclusion(d) > 1 / d + 0.5 / d**2


def test_lemcomp_f():
    assert Fraction(953, 30) == lemcomp_f(3)
    assert lemcomp_f(3) <= 32
    assert lemcomp_f(4) < lemcomp_f(3)
    assert 31 / 6 == pytest.approx(lemcomp_f(1e9), rel=1e-6)
    with pytest.raises(DomainError):
        lemcomp_f(Fraction(13, 6))


def test_series_bound_exceeds_one_past_f():
    d0 = 40
    T = 1 / d0 + 3 / d0**2
    assert 3 == pytest.approx(gamma_of(d0, T))
    assert d0 > lemcomp_f(3)
    assert expr_series_bound(d0, T) > 1


def test_lower_bounds_sit_below_criterion():
    for d0, T in [(40, 1 / 40 + 3 / 1600), (100, 0.015)]:
        assert exprone_lower_bound(d0, T) <= angel_criterion(d0, T)
    for d0, T in [(40, 0.5), (100, 0.015), (1287, 2 / 1287), (1287, 1 / 3)]:
        assert angel_comparison(d0, T) <= angel_criterion(d0, T)


def test_proved_half_line():
    assert proved_half_line(1286) is None
    assert 1 / 1287 + 3 / 1287**2 == pytest.approx(proved_half_line(1287))


def test_useful_bar_tail_bound():
    assert 1 - 3 / 40 - 73 / 429 == pytest.approx(useful_bar_tail_bound(39, 11.0))
    with pytest.raises(DomainError):
        useful_bar_tail_bound(2, 0.1)


def test_regime_params():
    assert 40 == RegimeParams(d=39, T=11.0).degree()
    assert 39 == RegimeParams(d0=40, T=11.0).offspring()
    with pytest.raises(ValidationError):
        RegimeParams(d=39, T=0.0)


def test_criterion_values():
    assert angel_criterion(1287, 2 / 1287) > 1
    assert 1.998 == pytest.approx(angel_criterion(1287, 2 / 1287), abs=0.01)
    assert 1 < exprone_lower_bound(1287, 2 / 1287) <= angel_criterion(1287, 2 / 1287)
    assert angel_criterion(1287, 1 / 3) > 1
    assert angel_criterion(1287, 0.5 / 1287) < 1
    with pytest.raises(DomainError):
        angel_criterion(2, 1.0)


def test_criterion_is_small_at_large_T():
    # Only the boundary layers at both ends contribute
    T = 429 / 40
    assert 2 * 39 / 38 * math.exp(-T) == pytest.approx(angel_criterion(40, T), rel=1e-3)
    assert angel_criterion(40, T) < 1


def test_classify_T():
    excluded = classify_T(100, 0.005)
    assert Verdict.PROVED_EXCLUDED == excluded.verdict
    assert "Percolation" == excluded.clause

    proved = classify_T(40, 429 / 40)
    assert Verdict.PROVED_INFINITE_CYCLES == proved.verdict
    assert "LemmaB2(3)" == proved.clause

    assert "LemmaB2(1)" == classify_T(40, 1 / 40 + 3 / 1600).clause
    assert "LemmaB2(2)" == classify_T(1287, 0.1).clause
    assert "HighDegreeLemma" == classify_T(2544, 0.1).clause

    certified = classify_T(10, 0.5)
    assert Verdict.PROVED_INFINITE_CYCLES == certified.verdict
    assert "ExprCertificate" == certified.clause
    assert certified.expr_value > 1


def test_classify_T_unresolved_and_row():
    unresolved = classify_T(10, 0.12)
    assert Verdict.UNRESOLVED == unresolved.verdict
    assert "" == unresolved.clause
    row = unresolved.csv_row(10, 0.12)
    assert ["10", "0.12"] == row[:2]
    assert "Unresolved" == row[-1]


def test_classify_T_never_gives_both_certificates():
    for d0 in [40, 100, 1287, 3000]:
        exclusion = angel_percolation_exclusion(d0)
        assert exclusion < 1 / d0 + 3 / d0**2
        for T in [0.5 / d0, 0.9 / d0, 1 / d0 + 3 / d0**2, 3 / d0, 429 / d0]:
            verdict = classify_T(d0, T).verdict
            if T < exclusion:
                assert Verdict.PROVED_EXCLUDED == verdict
            else:
                assert Verdict.PROVED_EXCLUDED != verdict


@pytest.mark.slow
@pytest.mark.parametrize(
    "d0, T",
    [(1287, 2 / 1287), (1287, 1 / 3), (40, 429 / 40), (1287, 0.5 / 1287)],
)
def test_criterion_matches_riemann_oracle(d0, T):
    assert angel_criterion_riemann(d0, T) == pytest.approx(angel_criterion(d0, T), abs=1e-4)


@pytest.mark.slow
def test_criterion_matches_riemann_oracle_on_grid():
    grid = [(d0, T) for d0 in [3, 10, 40, 200, 1287] for T in [0.01, 0.1, 1.0, 5.0]]
    for d0, T in grid:
        assert angel_criterion_riemann(d0, T) == pytest.approx(
            angel_criterion(d0, T), abs=10 * 1e-8
        )
