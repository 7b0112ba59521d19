"""Chi-square quantiles for real (non-integer) degrees of freedom.

The CDF is the regularized lower incomplete gamma function ``P(k/2, x/2)``,
evaluated with the power series below ``a + 1`` and a Lentz continued
fraction for the upper tail above it. The quantile is found by safeguarded
Newton iteration on a bracket.
"""
from __future__ import annotations

import math

from .errors import InvalidInputError

_MAX_ITER = 1000
_TINY = 1e-300


def _gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_frac(a: float, x: float) -> float:
    """Upper regularized gamma Q(a, x) by modified Lentz."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    return _gammainc_pair(a, x)[0]


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x) = 1 - P(a, x)``."""
    return _gammainc_pair(a, x)[1]


def _gammainc_pair(a: float, x: float) -> tuple[float, float]:
    if not a > 0 or not x >= 0:
        raise InvalidInputError(f"incomplete gamma needs a > 0 and x >= 0, got a={a}, x={x}")
    if x == 0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    if x < a + 1.0:
        lower = _gamma_series(a, x)
        return lower, 1.0 - lower
    upper = _gamma_cont_frac(a, x)
    return 1.0 - upper, upper


def chi2_cdf(x: float, dof: float) -> float:
    if x <= 0:
        return 0.0
    return gammainc_lower(0.5 * dof, 0.5 * x)


def chi2_sf(x: float, dof: float) -> float:
    if x <= 0:
        return 1.0
    return gammainc_upper(0.5 * dof, 0.5 * x)


def chi2_pdf(x: float, dof: float) -> float:
    if x <= 0:
        return 0.0
    k = 0.5 * dof
    return math.exp((k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k))


def chi2_quantile(dof: float, p: float, tol: float = 1e-10) -> float:
    """Return ``x`` with ``chi2_cdf(x, dof) == p``.

    Iterates until the probability residual is below ``tol`` (relative to the
    smaller tail mass when that is tiny) and the Newton step has stalled at
    machine precision, so far-tail quantiles stay accurate in ``x`` too.
    """
    dof = float(dof)
    p = float(p)
    if not (dof > 0 and math.isfinite(dof)):
        raise InvalidInputError(f"degrees of freedom must be positive and finite, got {dof}")
    if not 0.0 < p < 1.0:
        raise InvalidInputError(f"probability must lie in (0, 1), got {p}")

    upper_tail = p > 0.5
    target = 1.0 - p if upper_tail else p
    # residual r(x) increases with x in both branches
    if upper_tail:
        def residual(x):
            return target - chi2_sf(x, dof)
    else:
        def residual(x):
            return chi2_cdf(x, dof) - target
    tol = min(tol, 1e-12 * target)

    # Wilson-Hilferty starting point
    z = _normal_quantile(p)
    c = 2.0 / (9.0 * dof)
    x = dof * max(1.0 - c + z * math.sqrt(c), 0.1) ** 3

    lo, hi = 0.0, max(x, 1.0)
    while residual(hi) < 0:
        lo, hi = hi, 2.0 * hi
    if not lo < x < hi:
        x = 0.5 * (lo + hi)

    for _ in range(500):
        err = residual(x)
        if err < 0:
            lo = x
        elif err > 0:
            hi = x
        else:
            return x
        dens = chi2_pdf(x, dof)
        candidate = x - err / dens if dens > 0 else math.nan
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if abs(err) < tol and abs(candidate - x) <= 1e-14 * x:
            return candidate
        if hi - lo <= 4e-16 * hi:
            return candidate
        x = candidate
    return x


def _normal_quantile(p: float) -> float:
    """Acklam's rational approximation; only used as a starting value."""
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    if p < 0.02425:
        q = math.sqrt(-2 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    if p > 1 - 0.02425:
        return -_normal_quantile(1 - p)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)
