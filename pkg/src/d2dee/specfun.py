"""Special functions backing the closed-form energy bounds.

Only the handful of functions the bounds actually need live here: the
Gaussian Q function, its Chernoff-style bounds and exponential-polynomial
approximation, the imaginary error function erfi, and the exponential
integrals E1 and Ei.  Everything is scalar, pure and deterministic.
"""

from __future__ import annotations

import enum
import math

from scipy import special as _sp

__all__ = [
    "ApproxKind",
    "CHERNOFF_LOWER_COEFF",
    "QPOLY_COEFFS",
    "q_function",
    "q_bound",
    "erfi",
    "exp_integral",
]

# Factor of the exp(-x^2) lower bound on Q; valid for all x >= 0.
CHERNOFF_LOWER_COEFF = 0.3885

# Q(x) ~ exp(-(q1 x^2 + q2 x + q3)).  Stored as the positive decay
# coefficients; only this sign convention yields a decreasing function.
QPOLY_COEFFS = (0.4920, 0.2287, 1.1893)

# erfi grows like exp(x^2); past here the result leaves float64 range.
ERFI_MAX_ARG = 26.0
_ERFI_SERIES_CUTOFF = 3.0
_EI_SERIES_CUTOFF = 40.0
_EI_OVERFLOW_ARG = 709.0
_EULER_GAMMA = 0.5772156649015328606


class ApproxKind(enum.Enum):
    """Which evaluation of the Gaussian tail `q_bound` should return."""

    EXACT = "exact"
    CHERNOFF_UPPER = "chernoff_upper"
    CHERNOFF_LOWER = "chernoff_lower"
    EXP_POLY_APPROX = "exp_poly_approx"


def _require_finite(x: float, name: str) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return x


def q_function(x: float) -> float:
    """Gaussian tail probability P(Z > x) for standard normal Z.

    Evaluated as erfc(x/sqrt(2))/2, accurate to full double precision over
    the whole real line.
    """
    x = _require_finite(x, "x")
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def q_bound(x: float, kind: ApproxKind, coeffs: tuple[float, float, float] | None = None) -> float:
    """Bounds and approximations of the Gaussian Q function.

    CHERNOFF_UPPER : (1/2) exp(-x^2/2), valid for x >= 0
    CHERNOFF_LOWER : 0.3885 exp(-x^2),  valid for x >= 0
    EXP_POLY_APPROX: exp(-(q1 x^2 + q2 x + q3)) with the default
                     coefficients (0.4920, 0.2287, 1.1893); `coeffs`
                     overrides them for sensitivity studies.
    """
    x = _require_finite(x, "x")
    if kind is ApproxKind.EXACT:
        return q_function(x)
    if kind in (ApproxKind.CHERNOFF_UPPER, ApproxKind.CHERNOFF_LOWER) and x < 0.0:
        raise ValueError(f"Chernoff bounds require x >= 0, got {x}")
    if kind is ApproxKind.CHERNOFF_UPPER:
        return 0.5 * math.exp(-0.5 * x * x)
    if kind is ApproxKind.CHERNOFF_LOWER:
        return CHERNOFF_LOWER_COEFF * math.exp(-x * x)
    if kind is ApproxKind.EXP_POLY_APPROX:
        q1, q2, q3 = coeffs if coeffs is not None else QPOLY_COEFFS
        return math.exp(-(q1 * x * x + q2 * x + q3))
    raise ValueError(f"unknown approximation kind {kind!r}")


def _erfi_series(x: float) -> float:
    # Maclaurin series: erfi(x) = 2/sqrt(pi) * sum x^(2n+1) / (n! (2n+1)).
    # All terms positive, so no cancellation; fine up to |x| ~ 3.
    if x == 0.0:
        return 0.0
    acc = x
    power = x
    x2 = x * x
    n = 0
    while True:
        n += 1
        power *= x2 / n
        term = power / (2 * n + 1)
        acc += term
        if abs(term) <= 1e-17 * abs(acc):
            break
    return 2.0 / math.sqrt(math.pi) * acc


def erfi(x: float) -> float:
    """Imaginary error function erfi(x) = -i erf(ix).

    Maclaurin series for |x| <= 3, Dawson-function route beyond
    (erfi(x) = 2 exp(x^2) dawsn(x) / sqrt(pi)).  Arguments past
    ERFI_MAX_ARG overflow double precision and raise OverflowError.
    """
    x = _require_finite(x, "x")
    if abs(x) > ERFI_MAX_ARG:
        raise OverflowError(f"erfi({x}) exceeds double range (|x| <= {ERFI_MAX_ARG})")
    if abs(x) <= _ERFI_SERIES_CUTOFF:
        return _erfi_series(x)
    return 2.0 / math.sqrt(math.pi) * math.exp(x * x) * float(_sp.dawsn(x))


def erfi_scaled(x: float) -> float:
    """exp(-x^2) * erfi(x); never overflows.  x >= 0."""
    x = _require_finite(x, "x")
    return 2.0 / math.sqrt(math.pi) * float(_sp.dawsn(x))


def _ei_series(x: float) -> float:
    # Ei(x) = gamma + ln x + sum_{n>=1} x^n / (n n!); positive terms for x > 0.
    acc = _EULER_GAMMA + math.log(x)
    term = 1.0
    n = 0
    while True:
        n += 1
        term *= x / n
        acc += term / n
        if term / n < 1e-17 * abs(acc) and n > x:
            break
    return acc


def _ei_asymptotic_scaled(x: float) -> float:
    # exp(-x) Ei(x) ~ (1/x) sum k!/x^k; truncated at the smallest term.
    acc = 0.0
    term = 1.0
    k = 0
    while True:
        acc += term
        k += 1
        nxt = term * k / x
        if nxt >= term or nxt < 1e-18 * acc:
            break
        term = nxt
    return acc / x


def ei_scaled(x: float) -> float:
    """exp(-x) * Ei(x) for x > 0; safe for arbitrarily large x."""
    x = _require_finite(x, "x")
    if x <= 0.0:
        raise ValueError(f"ei_scaled requires x > 0, got {x}")
    if x <= _EI_SERIES_CUTOFF:
        return math.exp(-x) * _ei_series(x)
    return _ei_asymptotic_scaled(x)


def exp_integral(x: float, kind: str = "E1") -> float:
    """Exponential integrals on the positive axis.

    E1(x) = int_x^inf e^-t / t dt; Ei(x) is its principal-value companion,
    Ei grows like e^x/x.  E1 delegates to scipy's exp1; Ei uses the power
    series up to x = 40 and the asymptotic expansion beyond.
    """
    x = _require_finite(x, "x")
    if x <= 0.0:
        raise ValueError(f"exp_integral requires x > 0, got {x}")
    if kind == "E1":
        return float(_sp.exp1(x))
    if kind == "Ei":
        if x > _EI_OVERFLOW_ARG:
            raise OverflowError(f"Ei({x}) exceeds double range")
        if x <= _EI_SERIES_CUTOFF:
            return _ei_series(x)
        return math.exp(x) * _ei_asymptotic_scaled(x)
    raise ValueError(f"kind must be 'E1' or 'Ei', got {kind!r}")
