"""Tail probabilities for the analysis pipeline.

Implemented from first principles so the test suite can check them against
an independent reference:

* F distribution: survival function through the regularized incomplete beta
  function, evaluated with the Lentz continued fraction (abs. error well
  below 1e-10 over the ranges used here).
* Studentized range: CDF as the classic double integral -- the range
  probability of k standard normals, mixed over the chi distribution of the
  pooled-variance scale -- via composite Gauss-Legendre quadrature.
  Quantiles invert the CDF by bisection. Values reproduce the standard
  published tables (Harter's tables, as reprinted in most design-of-
  experiments texts) to their two printed decimals for k <= 6 and
  df in {10, 60, 120, infinity}; the unit tests pin exactly that grid.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)

_MAX_ITER = 300
_EPS = 3.0e-15
_FPMIN = 1.0e-300


@njit(cache=True)
def _betacf(a, b, x):
    """Continued fraction for the incomplete beta function (Lentz method)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < _EPS:
            break
    return h


@njit(cache=True)
def betainc_reg(a, b, x):
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log(1.0 - x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


@njit(cache=True)
def f_sf(f, d1, d2):
    """Survival function P(F > f) of the F(d1, d2) distribution."""
    if f <= 0.0:
        return 1.0
    x = d2 / (d2 + d1 * f)
    return betainc_reg(0.5 * d2, 0.5 * d1, x)


@njit(cache=True)
def _norm_cdf(z):
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


@njit(cache=True)
def _range_cdf(q, k, glx, glw):
    """P(range of k iid standard normals <= q)."""
    if q <= 0.0:
        return 0.0
    # integrand support: phi(z) is negligible beyond |z| > 9
    lo = -9.0
    hi = 9.0
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    total = 0.0
    for i in range(glx.shape[0]):
        z = mid + half * glx[i]
        phi = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        p = _norm_cdf(z) - _norm_cdf(z - q)
        total += glw[i] * phi * p ** (k - 1)
    return min(1.0, k * half * total)


@njit(cache=True)
def _sr_cdf_nb(q, k, df, glx, glw):
    if q <= 0.0:
        return 0.0
    # scale-mixture over s = sqrt(chi2_df / df); density
    # f(s) = 2 (df/2)^(df/2) / Gamma(df/2) * s^(df-1) exp(-df s^2 / 2)
    ln_norm = (math.log(2.0) + 0.5 * df * math.log(0.5 * df)
               - math.lgamma(0.5 * df))
    if df >= 4.0:
        lo = max(0.0, 1.0 - 14.0 / math.sqrt(df))
        hi = 1.0 + 14.0 / math.sqrt(df)
    else:
        lo = 0.0
        hi = 10.0
    total = 0.0
    n_panel = 4
    width = (hi - lo) / n_panel
    for p in range(n_panel):
        a = lo + p * width
        half = 0.5 * width
        mid = a + half
        for i in range(glx.shape[0]):
            s = mid + half * glx[i]
            if s <= 0.0:
                continue
            ln_f = ln_norm + (df - 1.0) * math.log(s) - 0.5 * df * s * s
            if ln_f < -745.0:
                continue
            total += glw[i] * half * math.exp(ln_f) * _range_cdf(q * s, k, glx, glw)
    return min(1.0, total)


def studentized_range_cdf(q: float, k: int, df: float) -> float:
    """CDF of the studentized range with k groups and df error dof."""
    if k < 2:
        raise ValueError("studentized range needs k >= 2")
    if not math.isfinite(df):
        return _range_cdf(float(q), k, _GL_X, _GL_W)
    if df <= 0:
        raise ValueError("df must be positive")
    return _sr_cdf_nb(float(q), k, float(df), _GL_X, _GL_W)


def studentized_range_sf(q: float, k: int, df: float) -> float:
    return 1.0 - studentized_range_cdf(q, k, df)


def studentized_range_ppf(p: float, k: int, df: float) -> float:
    """Quantile of the studentized range (bisection on the CDF)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    lo, hi = 1e-6, 10.0
    while studentized_range_cdf(hi, k, df) < p:
        hi *= 2.0
        if hi > 1e4:
            raise RuntimeError("studentized range quantile out of range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < 1e-10 * max(1.0, mid):
            break
        if studentized_range_cdf(mid, k, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def f_pvalue(f: float, df_between: float, df_within: float) -> float:
    return f_sf(float(f), float(df_between), float(df_within))
