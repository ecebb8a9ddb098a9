"""Chi-squared distribution functions without external dependencies.

The regularized incomplete gamma is evaluated by its power series below
``x = a + 1`` and by a Lentz continued fraction above, the usual split that
keeps both expansions fast and accurate.  The quantile starts from the
Wilson-Hilferty normal approximation and is polished by Newton steps
confined to a shrinking bisection bracket.
"""

from __future__ import annotations

import math
from statistics import NormalDist

from .errors import DomainError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _gamma_series(a: float, x: float) -> float:
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_frac(a: float, x: float) -> float:
    # Q(a, x) by modified Lentz on the Legendre continued fraction
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
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise DomainError(f"shape a must be positive, got {a}")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cont_frac(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise DomainError(f"shape a must be positive, got {a}")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cont_frac(a, x)


def chi2_cdf(x: float, r: int) -> float:
    return gammainc_lower(r / 2.0, x / 2.0)


def chi2_sf(x: float, r: int) -> float:
    return gammainc_upper(r / 2.0, x / 2.0)


def chi2_pdf(x: float, r: int) -> float:
    if x < 0:
        return 0.0
    k = r / 2.0
    if x == 0:
        if r == 2:
            return 0.5
        return math.inf if r < 2 else 0.0
    return math.exp((k - 1.0) * math.log(x) - x / 2.0 - k * math.log(2.0) - math.lgamma(k))


def _wilson_hilferty(r: int, z: float, q: float) -> float:
    c = 2.0 / (9.0 * r)
    guess = r * (1.0 - c + z * math.sqrt(c)) ** 3
    return guess if guess > 0 else r * q  # the cube goes negative for tiny q and small r


def _check_dof(r) -> int:
    if isinstance(r, bool) or int(r) != r or r < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {r!r}")
    return int(r)


def chi2_quantile(r: int, q: float) -> float:
    """Inverse CDF of the chi-squared distribution with ``r`` degrees of freedom.

    Returns ``x`` with ``P(v <= x) = q`` for ``v ~ chi2_r``; ``q = 0`` gives 0.
    Absolute error is below 1e-8 across ``r <= 200`` and ``q <= 1 - 1e-12``.
    """
    r = _check_dof(r)
    if not (0.0 <= q < 1.0) or math.isnan(q):
        raise DomainError(f"probability q must lie in [0, 1), got {q!r}")
    if q == 0.0:
        return 0.0
    if q > 0.5:
        return _solve(r, 1.0 - q, upper=True)
    return _solve(r, q, upper=False)


def chi2_isf(r: int, p: float) -> float:
    """Inverse survival function: ``x`` with ``P(v > x) = p``.

    Takes the tail probability directly, so it stays accurate for ``p`` far
    below the spacing of floats near 1.
    """
    r = _check_dof(r)
    if not (0.0 < p <= 1.0) or math.isnan(p):
        raise DomainError(f"tail probability p must lie in (0, 1], got {p!r}")
    if p == 1.0:
        return 0.0
    if p < 0.5:
        return _solve(r, p, upper=True)
    return _solve(r, 1.0 - p, upper=False)


def _solve(r: int, target: float, upper: bool) -> float:
    # upper: solve sf(x) = target; otherwise cdf(x) = target
    if upper:
        z = -NormalDist().inv_cdf(target)
        q = 1.0 - target
    else:
        z = NormalDist().inv_cdf(target)
        q = target

    def residual(x: float) -> float:
        # positive when x is past the quantile
        return target - chi2_sf(x, r) if upper else chi2_cdf(x, r) - target

    lo, hi = 0.0, max(2.0 * r, 1.0)
    while residual(hi) < 0:
        lo, hi = hi, 2.0 * hi
    x = min(max(_wilson_hilferty(r, z, q), lo), hi)

    for _ in range(200):
        f = residual(x)
        if f == 0:
            return x
        if f > 0:
            hi = x
        else:
            lo = x
        dens = chi2_pdf(x, r)
        step_ok = False
        if dens > 0 and math.isfinite(dens):
            nxt = x - f / dens
            if lo < nxt < hi:
                step_ok = True
        if not step_ok:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 1e-14 * max(1.0, x) or hi - lo <= 1e-15 * max(1.0, hi):
            return nxt
        x = nxt
    return x
