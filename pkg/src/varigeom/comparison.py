"""Scalar comparison functions for distance-function Hessians in constant curvature.

All functions accept scalars or numpy arrays and broadcast. Every function that
divides by a small argument switches to a truncated series below
``SERIES_THRESHOLD`` (in the rescaled variable ``x = sqrt(|b|) r``). Between the
threshold and ``x = 1`` the "closed form" is evaluated through the full
Bernoulli expansion, which is free of the cancellation in ``1 - x cot x``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import mpmath
import numpy as np
from scipy.special import gamma

SERIES_THRESHOLD = 1e-3
PHI_MIN_ARG = 1e-8

_NTERMS = 24

_B = [float(mpmath.bernoulli(k)) for k in range(2 * _NTERMS + 1)]
# (1 - x cot x) / x^2 = sum_k _COT_COEF[k] x^(2k);  (x coth x - 1) / x^2 likewise
_COT_COEF = np.array([4.0**k * abs(_B[2 * k]) / math.factorial(2 * k) for k in range(1, _NTERMS)])
_COTH_COEF = np.array([4.0**k * _B[2 * k] / math.factorial(2 * k) for k in range(1, _NTERMS)])


class ComparisonValue(NamedTuple):
    value: float
    regime: str  # "series-near-zero" | "closed-form"


class DomainError(ValueError):
    """Argument outside the domain of a comparison function."""


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _horner(coef, y):
    acc = np.zeros_like(y)
    for c in coef[::-1]:
        acc = acc * y + c
    return acc


def _cot_quotient(x):
    """(1 - x cot x) / x**2 for 0 <= x < pi."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    x2 = x * x
    small = x < SERIES_THRESHOLD
    mid = (~small) & (x <= 1.0)
    big = x > 1.0
    s = x2[small]
    out[small] = 1 / 3 + s * (1 / 45 + s * (2 / 945 + s / 4725))
    out[mid] = _horner(_COT_COEF, x2[mid])
    xb = x[big]
    out[big] = (1.0 - xb / np.tan(xb)) / (xb * xb)
    return out


def _coth_quotient(x):
    """(x coth x - 1) / x**2 for x >= 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    x2 = x * x
    small = x < SERIES_THRESHOLD
    mid = (~small) & (x <= 1.0)
    big = x > 1.0
    s = x2[small]
    out[small] = 1 / 3 + s * (-1 / 45 + s * (2 / 945 - s / 4725))
    out[mid] = _horner(_COTH_COEF, x2[mid])
    xb = x[big]
    out[big] = (xb / np.tanh(xb) - 1.0) / (xb * xb)
    return out


def _scaled(b, r, positive=True):
    b = float(b)
    if positive and b <= 0:
        raise DomainError(f"curvature must be positive, got b={b}")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise DomainError("radius must be finite and non-negative")
    x = math.sqrt(abs(b)) * r
    if positive and np.any(x >= math.pi):
        raise DomainError("sqrt(b) * r must lie below pi")
    return b, r, x


def a_b(b, r):
    """sqrt(b) r cot(sqrt(b) r), continuous at r = 0 with value 1."""
    b, r, x = _scaled(b, r)
    return _out(1.0 - x * x * _cot_quotient(x))


def c_quad(b, r):
    """(1 - a_b(r)) / r**2; equals b/3 at r = 0."""
    b, r, x = _scaled(b, r)
    return _out(b * _cot_quotient(x))


def c_lin(b, r):
    """(1 - a_b(r)) / r; vanishes at r = 0."""
    b, r, x = _scaled(b, r)
    return _out(b * r * _cot_quotient(x))


def r_cot(b, r):
    """r times the radial Hessian eigenvalue of the distance function in curvature b.

    This is ``a_b`` for b > 0, identically 1 for b = 0, and
    ``sqrt(|b|) r coth(sqrt(|b|) r)`` for b < 0.
    """
    b = float(b)
    if b > 0:
        return a_b(b, r)
    r = np.asarray(r, dtype=float)
    if b == 0:
        return _out(np.ones_like(r))
    x = math.sqrt(-b) * r
    return _out(1.0 + x * x * _coth_quotient(x))


def evaluate(name: str, b, r) -> ComparisonValue:
    """Evaluate a scalar comparison function and tag the branch used."""
    fns = {"a_b": a_b, "c_quad": c_quad, "c_lin": c_lin, "r_cot": r_cot}
    value = fns[name](b, float(r))
    x = math.sqrt(abs(float(b))) * float(r)
    regime = "series-near-zero" if x < SERIES_THRESHOLD and b != 0 else "closed-form"
    return ComparisonValue(value, regime)


def _check_negative(b):
    b = float(b)
    if b >= 0:
        raise DomainError(f"curvature must be negative, got b={b}")
    return b


def s_b(b, t):
    """sinh(sqrt|b| t) / sqrt|b| for b < 0."""
    b = _check_negative(b)
    k = math.sqrt(-b)
    t = np.asarray(t, dtype=float)
    return _out(np.sinh(k * t) / k)


def c_b(b, t):
    """Derivative of s_b: cosh(sqrt|b| t)."""
    b = _check_negative(b)
    t = np.asarray(t, dtype=float)
    return _out(np.cosh(math.sqrt(-b) * t))


def phi(b, t):
    """|b| / (c_b(t) - 1), written as |b| / (2 sinh^2(sqrt|b| t / 2))."""
    b = _check_negative(b)
    t = np.asarray(t, dtype=float)
    if np.any(t < PHI_MIN_ARG):
        raise DomainError(f"phi is only evaluated for t >= {PHI_MIN_ARG}")
    k = math.sqrt(-b)
    return _out(-b / (2.0 * np.sinh(0.5 * k * t) ** 2))


def phi_prime(b, t):
    b = _check_negative(b)
    t = np.asarray(t, dtype=float)
    if np.any(t < PHI_MIN_ARG):
        raise DomainError(f"phi is only evaluated for t >= {PHI_MIN_ARG}")
    k = math.sqrt(-b)
    sh = np.sinh(0.5 * k * t)
    return _out(b * k * np.sinh(k * t) / (4.0 * sh**4))


def phi_s_b(b, t):
    """phi(t) * s_b(t), computed as sqrt|b| coth(sqrt|b| t / 2)."""
    b = _check_negative(b)
    k = math.sqrt(-b)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("phi * s_b requires t > 0")
    return _out(k / np.tanh(0.5 * k * t))


def t_b(b, r):
    """Boundary kernel of the Li--Yau inequality.

    2/r for b >= 0 and 2 sqrt|b| coth(sqrt|b| r / 2) for b < 0.
    """
    b = float(b)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("t_b requires r > 0")
    if b >= 0:
        return _out(2.0 / r)
    k = math.sqrt(-b)
    return _out(2.0 * k / np.tanh(0.5 * k * r))


def unit_ball_volume(m: int) -> float:
    """Volume of the unit ball in R^m."""
    return math.pi ** (m / 2) / float(gamma(m / 2 + 1))


def sobolev_constant(m: int) -> float:
    """5^m 2^(1/m) / alpha(m)^(1/m)."""
    if m < 1:
        raise DomainError("m must be a positive integer")
    return 5.0**m * 2.0 ** (1.0 / m) / unit_ball_volume(m) ** (1.0 / m)


def area_bound_C(i: float, b: float) -> float:
    """Area threshold of the diameter pinching statement.

    min{rho0^2 / (2 + b rho0^2), pi^3 / (9 b)} with rho0 = min{i, pi / (2 sqrt b)},
    reading 1/0 as infinity and 0 * infinity as 0.
    """
    if not i > 0:
        raise DomainError("injectivity radius must be positive")
    if b < 0:
        raise DomainError("curvature bound must be non-negative")
    rho0 = min(i, math.pi / (2 * math.sqrt(b)) if b > 0 else math.inf)
    if math.isinf(rho0):
        # b == 0 here, so b * rho0^2 reads as 0
        first = math.inf
    else:
        first = rho0**2 / (2.0 + b * rho0**2)
    second = math.pi**3 / (9.0 * b) if b > 0 else math.inf
    return min(first, second)


def radial_hessian_lower_bound(b: float, r):
    """(1 + sqrt(1 - 4b)) / (2r) for radial curvature bounded by b / r^2."""
    if not 0 < b <= 0.25:
        raise DomainError("b must lie in (0, 1/4]")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("r must be positive")
    return _out((1.0 + math.sqrt(1.0 - 4.0 * b)) / (2.0 * r))
