"""
Closed-form constants, drift conditions, percolation bounds and the integral
criterion for regular trees, evaluated in double precision.
"""

from __future__ import annotations

import math
import typing
import warnings
from enum import auto
from fractions import Fraction

import numpy as np
from pydantic import BaseModel, validator
from scipy import integrate
from stirring_py_utils.stirring_logging import get_logger
from strenum import PascalCaseStrEnum

from .tree_core import StirringError

logger = get_logger(__name__)

# Theorem-level constant: infinite cycles for T >= PROVED_T_NUMERATOR / d
PROVED_T_NUMERATOR = 429
QUAD_SUBDIVISION_LIMIT = 200
RIEMANN_PANELS = 10_000_000
RIEMANN_CHUNK = 1_000_000
LEMCOMP_POLE = Fraction(13, 6)


class DomainError(StirringError, ValueError):
    pass


class ToleranceNotMet(StirringError):
    pass


class RegimeParams(BaseModel):
    d: typing.Optional[int] = None
    d0: typing.Optional[int] = None
    T: float

    @validator("d")
    def validate_d(cls, field):
        if field is not None and field < 2:
            raise ValueError("d must be at least 2.")
        return field

    @validator("d0")
    def validate_d0(cls, field):
        if field is not None and field < 2:
            raise ValueError("d0 must be at least 2.")
        return field

    @validator("T")
    def validate_T(cls, field):
        if not field > 0:
            raise ValueError("T must be greater than 0.")
        return field

    def degree(self) -> int:
        """:return: d0, using d0 = d + 1 when only d was given."""
        if self.d0 is not None:
            return self.d0
        if self.d is None:
            raise ValueError("One of d and d0 is required.")
        return self.d + 1

    def offspring(self) -> int:
        if self.d is not None:
            return self.d
        return self.degree() - 1


def _require_d(d: int):
    if d < 2:
        raise DomainError(f"d must be at least 2, not {d}.")


def c1(d: int, T: float) -> float:
    _require_d(d)
    return d**2 * (d - 1) / (2 * (d + 1) ** 2) * -math.expm1(-(d + 1) * T / 2)


def c2(d: int, T: float) -> float:
    _require_d(d)
    return (d - 1) / (4 * (d + 1)) * -math.expm1(-(d - 1) * T / 2)


def c1_star(d: int) -> float:
    _require_d(d)
    return d / 18


def c2_star(d: int, T: float) -> float:
    _require_d(d)
    return 3 * (d - 1) / (4 * (d + 1)) * -math.expm1(-(d - 1) * T / 2)


def is_starred_regime(d: int, T: float) -> bool:
    """:return: Whether the quantitative lemmas apply: d >= 39 and T >= 429 / d."""
    return d >= 39 and T >= PROVED_T_NUMERATOR / d


def drift_condition(d: int, T: float, starred: bool) -> float:
    """
    :return: c2 * c1 * T - 2 * (1 - c2), with the starred constants if requested.
    Positivity is the sufficient condition for transience.
    """
    if starred:
        first, second = c1_star(d), c2_star(d, T)
    else:
        first, second = c1(d, T), c2(d, T)
    return second * first * T - 2 * (1 - second)


def percolation_exclusion(d: float) -> float:
    """
    :return: -log(1 - 1/d), the right end of the interval of T for which bars percolate
    on no tree with d offspring per vertex.
    """
    if d < 1:
        raise DomainError(f"d must be at least 1, not {d}.")
    if 1 == d:
        return math.inf
    return -math.log1p(-1 / d)


def angel_percolation_exclusion(d0: int) -> float:
    """:return: The exclusion bound for the regular tree of degree d0, with p_c = 1/(d0 - 1)."""
    if d0 < 2:
        raise DomainError(f"d0 must be at least 2, not {d0}.")
    return percolation_exclusion(d0 - 1)


def _log_base(a, T: float):
    """
    :return: log(e^{-a} + e^{-(T - a)} - e^{-T}), for scalar or array a in [0, T].
    The base is symmetric about T/2, so a is folded into [0, T/2] first.
    """
    a = np.minimum(a, T - a)
    return -a + np.log1p(np.exp(a - T) * np.expm1(a))


def _criterion_integrand(a, d0: int, T: float):
    return (d0 - 1) * np.exp((d0 - 2) * _log_base(a, T) - T)


def angel_criterion(d0: int, T: float, quad_tol: float = 1e-8) -> float:
    """
    Evaluates (d0 - 1) e^{-T} ∫_0^T (e^{-a} + e^{-(T-a)} - e^{-T})^{d0-2} da. A value above 1
    certifies infinite cycles on the regular tree of degree d0.

    The integrand is concentrated in layers of width about 1/d0 at both ends, so the
    quadrature is seeded with separate panels there.

    :raise ToleranceNotMet: If the estimated absolute error exceeds quad_tol.
    """
    if d0 < 3:
        raise DomainError(f"d0 must be at least 3, not {d0}.")
    if not T > 0:
        raise DomainError("T must be greater than 0.")
    if not quad_tol > 0:
        raise ValueError("quad_tol must be greater than 0.")

    width = min(T / 2, 10 / d0)
    if width >= T / 2:
        breakpoints = [0.0, T / 2, T]
    else:
        breakpoints = [0.0, width, T - width, T]
    panel_tol = quad_tol / (len(breakpoints) - 1)

    total = 0.0
    error = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lower, upper in zip(breakpoints, breakpoints[1:]):
            value, panel_error = integrate.quad(
                _criterion_integrand,
                lower,
                upper,
                args=(d0, T),
                epsabs=panel_tol,
                epsrel=0.0,
                limit=QUAD_SUBDIVISION_LIMIT,
            )
            total += value
            error += panel_error
    if error > quad_tol:
        raise ToleranceNotMet(
            f"Quadrature for d0={d0}, T={T} reached error {error:.3g} > {quad_tol:.3g}."
        )
    return total


def angel_criterion_riemann(d0: int, T: float, panels: int = RIEMANN_PANELS) -> float:
    """:return: The same quantity as angel_criterion, by a fixed-panel midpoint sum."""
    if d0 < 3:
        raise DomainError(f"d0 must be at least 3, not {d0}.")
    h = T / panels
    total = 0.0
    for start in range(0, panels, RIEMANN_CHUNK):
        stop = min(start + RIEMANN_CHUNK, panels)
        midpoints = (np.arange(start, stop) + 0.5) * h
        total += float(np.sum(_criterion_integrand(midpoints, d0, T)))
    return total * h


def lemcomp_f(gamma: typing.Union[int, float, Fraction]) -> typing.Union[float, Fraction]:
    """
    :return: f(gamma) = (31 gamma / 6 + 395 / 36) / (gamma - 13 / 6), exactly for int or
    Fraction input.
    :raise DomainError: If gamma <= 13/6.
    """
    if gamma <= LEMCOMP_POLE:
        raise DomainError(f"f is only defined for gamma > 13/6, not {gamma}.")
    if isinstance(gamma, (int, Fraction)):
        gamma = Fraction(gamma)
        return (Fraction(31, 6) * gamma + Fraction(395, 36)) / (gamma - LEMCOMP_POLE)
    return (31 * gamma / 6 + 395 / 36) / (gamma - 13 / 6)


def gamma_of(d0: int, T: float) -> float:
    """:return: gamma with T = 1/d0 + gamma/d0^2."""
    return d0**2 * T - d0


def exprone_lower_bound(d0: int, T: float) -> float:
    """:return: The cubic-order lower bound on the criterion, valid for 1/d0 <= T <= 2/d0."""
    return (
        (d0 - 1)
        * (1 - T + d0**-2 / 2 - 4 * d0**-3 / 3)
        * (T - d0 * T**3 / 6 - 8 * d0**-3 / 3)
    )


def expr_series_bound(d0: int, T: float) -> float:
    """
    :return: 1 + (gamma - 13/6)/d0 - (31 gamma/6 + 395/36)/d0^2, which exceeds 1 exactly
    when d0 > f(gamma).
    """
    gamma = gamma_of(d0, T)
    return 1 + (gamma - 13 / 6) / d0 - (31 * gamma / 6 + 395 / 36) / d0**2


def angel_comparison(d0: int, T: float) -> float:
    """:return: 2 (e^{-T} - e^{-T d0 / 2}), a lower bound on the criterion."""
    return 2 * (math.exp(-T) - math.exp(-T * d0 / 2))


def proved_half_line(d0: int) -> typing.Optional[float]:
    """:return: The left end of the proved half-line [1/d0 + 3/d0^2, ∞) for d0 >= 1287."""
    if d0 < 1287:
        return None
    return 1 / d0 + 3 / d0**2


def useful_bar_tail_bound(d: int, T: float) -> float:
    """
    :return: 1 - 3/(d + 1) - 73/(T d), a lower bound on P(|U_{0,T}| >= T d / 18) for
    T d >= 2 log 2.
    """
    _require_d(d)
    if T * d < 2 * math.log(2):
        raise DomainError("The tail bound needs T * d >= 2 log 2.")
    return 1 - 3 / (d + 1) - 73 / (T * d)


class Verdict(PascalCaseStrEnum):
    PROVED_INFINITE_CYCLES = auto()
    PROVED_EXCLUDED = auto()
    UNRESOLVED = auto()


class Classification(typing.NamedTuple):
    verdict: Verdict
    clause: str
    expr_value: float
    percolation_bound: float

    def csv_row(self, d0: int, T: float) -> typing.List[str]:
        return [
            str(d0),
            repr(T),
            repr(self.percolation_bound),
            repr(self.expr_value),
            self.clause,
            str(self.verdict),
        ]


BOUNDS_CSV_HEADER = ["d0", "T", "percolation_bound", "expr_value", "clause", "verdict"]


def _expr_value(d0: int, T: float, quad_tol: float) -> float:
    if d0 < 3:
        return math.nan
    try:
        return angel_criterion(d0, T, quad_tol)
    except ToleranceNotMet:
        logger.warning(f"Unable to evaluate the criterion at d0={d0}, T={T} to {quad_tol}.")
        return math.nan


def classify_T(d0: int, T: float, quad_tol: float = 1e-8) -> Classification:
    """
    Decides what is proved about infinite cycles on the regular tree of degree d0 at T,
    trying percolation exclusion, the lemma cases and then the numeric criterion.

    :return: The verdict with the clause that certifies it.
    """
    if d0 < 2:
        raise DomainError(f"d0 must be at least 2, not {d0}.")
    if not T > 0:
        raise DomainError("T must be greater than 0.")

    percolation_bound = angel_percolation_exclusion(d0)
    expr_value = _expr_value(d0, T, quad_tol)

    def proved(clause: str) -> Classification:
        return Classification(Verdict.PROVED_INFINITE_CYCLES, clause, expr_value, percolation_bound)

    if T < percolation_bound:
        return Classification(Verdict.PROVED_EXCLUDED, "Percolation", expr_value, percolation_bound)

    in_first_interval = 1 / d0 + 3 / d0**2 <= T <= 2 / d0
    if in_first_interval and 32 <= d0 < 40:
        logger.warning(
            f"d0={d0}: the first lemma case is stated for d0 >= 40 although its proof"
            " covers d0 >= 32; the stated case is applied."
        )
    if in_first_interval and d0 >= 40:
        return proved("LemmaB2(1)")
    if d0 >= 2544 and 2 / d0 <= T <= 0.14:
        return proved("HighDegreeLemma")
    if d0 >= 1287 and 2 / d0 <= T <= PROVED_T_NUMERATOR / d0:
        logger.warning(
            f"d0={d0}, T={T}: the second lemma case rests on inconsistent arithmetic;"
            f" the numeric criterion here is {expr_value:.6g}."
        )
        return proved("LemmaB2(2)")
    if d0 >= 40 and T >= PROVED_T_NUMERATOR / d0:
        return proved("LemmaB2(3)")
    if expr_value > 1:
        return proved("ExprCertificate")
    return Classification(Verdict.UNRESOLVED, "", expr_value, percolation_bound)
