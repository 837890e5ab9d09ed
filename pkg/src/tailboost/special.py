"""Student-t distribution via the regularized incomplete beta function.

Self-contained numerics: a vectorized modified-Lentz continued fraction
for I_x(a, b) plus fixed-iteration bisection for the quantile, accurate to
~1e-12.  Degrees of freedom may vary per element.
"""

import math

import numpy as np

_LENTZ_MAX_ITER = 300
_LENTZ_EPS = 3e-16
_FPMIN = 1e-300
_BISECT_ITERS = 90

_lgamma = np.vectorize(math.lgamma, otypes=[float])


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta (vectorized Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    for m in range(1, _LENTZ_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        h = h * d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < _LENTZ_EPS):
            break
    return h


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    a, b, x = np.broadcast_arrays(a, b, x)
    out = np.empty_like(x)
    edge0 = x <= 0.0
    edge1 = x >= 1.0
    mid = ~(edge0 | edge1)
    out[edge0] = 0.0
    out[edge1] = 1.0
    if np.any(mid):
        am, bm, xm = a[mid], b[mid], x[mid]
        ln_bt = (
            _lgamma(am + bm) - _lgamma(am) - _lgamma(bm)
            + am * np.log(xm) + bm * np.log1p(-xm)
        )
        bt = np.exp(ln_bt)
        direct = xm < (am + 1.0) / (am + bm + 2.0)
        res = np.empty_like(xm)
        if np.any(direct):
            res[direct] = bt[direct] * _betacf(am[direct], bm[direct], xm[direct]) / am[direct]
        flip = ~direct
        if np.any(flip):
            res[flip] = 1.0 - bt[flip] * _betacf(bm[flip], am[flip], 1.0 - xm[flip]) / bm[flip]
        out[mid] = res
    return out


def student_t_cdf(x, df):
    """CDF of Student's t with (possibly per-element) df > 0."""
    x = np.asarray(x, dtype=float)
    df = np.asarray(df, dtype=float)
    x, df = np.broadcast_arrays(x, df)
    w = df / (df + x * x)
    tail = 0.5 * betainc(df / 2.0, 0.5, w)
    return np.where(x >= 0, 1.0 - tail, tail)


def student_t_quantile(p, df):
    """Inverse CDF of Student's t; p in (0, 1), df > 0 (broadcastable).

    Solved by bisection on w = df/(df + t^2), on which the tail probability
    is monotone.
    """
    p = np.asarray(p, dtype=float)
    df = np.asarray(df, dtype=float)
    p, df = np.broadcast_arrays(p, df)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("p must be strictly inside (0, 1)")
    # two-sided tail probability of |t|: I_w(df/2, 1/2) = 2*min(p, 1-p)
    pp = 2.0 * np.minimum(p, 1.0 - p)
    a = df / 2.0
    b = np.full_like(df, 0.5)
    lo = np.zeros_like(pp)
    hi = np.ones_like(pp)
    for _ in range(_BISECT_ITERS):
        midw = 0.5 * (lo + hi)
        val = betainc(a, b, midw)
        go_right = val < pp
        lo = np.where(go_right, midw, lo)
        hi = np.where(go_right, hi, midw)
    w = 0.5 * (lo + hi)
    w = np.clip(w, np.finfo(float).tiny, 1.0)
    t = np.sqrt(df * (1.0 - w) / w)
    out = np.where(p >= 0.5, t, -t)
    out = np.where(p == 0.5, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out
