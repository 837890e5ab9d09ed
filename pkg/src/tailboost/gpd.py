"""Generalized Pareto distribution kernel.

Distribution/quantile functions, the exceedance deviance (negative
log-likelihood) with its analytic first and second derivatives, an
unconditional maximum-likelihood fit, and tail-quantile extrapolation.

All functions broadcast over numpy arrays and are pure; they are safe to
call from any number of threads.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import NonConvergenceError, PreconditionError

# Switch for the first/second derivative formulas: below this |gamma| the
# exponential-limit expressions are used (the second-derivative formula
# loses ~1e-16/gamma^2 digits to cancellation near zero).
GAMMA_EPS = 1e-6

# Switch for value-level formulas (deviance, cdf, quantile, extrapolation).
# Those are evaluated in a factored log1p/expm1 form that stays accurate
# for tiny gamma, so the limit form is only needed essentially at zero.
VALUE_GAMMA_EPS = 1e-12

# Support clamp for gamma < 0: when 1 + gamma*z/sigma <= U_FLOOR the
# deviance continues linearly in that argument and derivatives are taken
# at the clamp, keeping boosting finite outside the GPD support.
U_FLOOR = 1e-10

# Maximum-likelihood search box (sigma is log-parameterized).
MLE_LOG_SIGMA_BOUNDS = (np.log(1e-8), np.log(1e8))
MLE_GAMMA_BOUNDS = (-0.45, 5.0)


@dataclass(frozen=True)
class GpdParams:
    """Scale/shape pair of a generalized Pareto distribution."""

    sigma: float
    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if not np.isfinite(self.gamma):
            raise ValueError(f"gamma must be finite, got {self.gamma}")


def _ret(out, *inputs):
    if all(np.ndim(a) == 0 for a in inputs):
        return float(out)
    return out


def gpd_cdf(y, sigma, gamma):
    """P(Z <= y) for Z ~ GPD(sigma, gamma); y must be nonnegative."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("gpd_cdf requires y >= 0")
    s = np.asarray(sigma, dtype=float)
    g = np.asarray(gamma, dtype=float)
    x = g * y / s
    small = np.abs(g) < VALUE_GAMMA_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        general = -np.expm1(-np.log1p(np.maximum(x, -1.0)) / g)
        limit = -np.expm1(-y / s)
    out = np.where(small, limit, general)
    out = np.where((~small) & (x <= -1.0), 1.0, out)
    return _ret(np.clip(out, 0.0, 1.0), y, sigma, gamma)


def gpd_quantile(p, sigma, gamma):
    """Inverse of :func:`gpd_cdf` on p in [0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p >= 1)):
        raise ValueError("gpd_quantile requires 0 <= p < 1")
    s = np.asarray(sigma, dtype=float)
    g = np.asarray(gamma, dtype=float)
    base = -np.log1p(-p)
    x = g * base
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(x == 0.0, 1.0, np.expm1(x) / np.where(x == 0.0, 1.0, x))
    out = np.where(np.abs(g) < VALUE_GAMMA_EPS, s * base, s * base * factor)
    return _ret(out, p, sigma, gamma)


def deviance(z, sigma, gamma):
    """Negative GPD log-likelihood of an exceedance; zero when z == 0.

    For gamma < 0 and 1 + gamma*z/sigma <= U_FLOOR the value continues
    linearly beyond the clamped argument (support-violation penalty).
    May be negative (log sigma term).
    """
    z = np.asarray(z, dtype=float)
    s = np.asarray(sigma, dtype=float)
    g = np.asarray(gamma, dtype=float)
    w = z / s
    x = g * w
    u = 1.0 + x
    logs = np.log(s)
    small = np.abs(g) < VALUE_GAMMA_EPS
    violated = (~small) & (u <= U_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_safe = np.where(x == 0.0, 1.0, x)
        ell = np.log1p(np.maximum(x, U_FLOOR - 1.0))
        general = ell + w * (ell / x_safe) + logs
        limit = w + logs
        pen_log = np.log(U_FLOOR) + u / U_FLOOR - 1.0
        penalty = (1.0 + 1.0 / np.where(g == 0.0, 1.0, g)) * pen_log + logs
    out = np.where(small, limit, general)
    out = np.where(violated, penalty, out)
    out = np.where(z == 0.0, 0.0, out)
    return _ret(out, z, sigma, gamma)


def _clamped_z(z, s, g):
    """z at which 1 + g*z/s == U_FLOOR (derivatives are taken there)."""
    return s * (U_FLOOR - 1.0) / g


def deviance_grad(z, sigma, gamma):
    """First partials (d/dsigma, d/dgamma) of :func:`deviance` for z > 0.

    On the support-violation path the derivatives of the penalty surrogate
    (formulas evaluated at the clamped argument) are returned.  Rows with
    z == 0 contribute nothing and return zeros.
    """
    z = np.asarray(z, dtype=float)
    s = np.asarray(sigma, dtype=float)
    g = np.asarray(gamma, dtype=float)
    small = np.abs(g) < GAMMA_EPS
    u = 1.0 + g * z / s
    violated = (~small) & (u <= U_FLOOR)
    zz = np.where(violated, _clamped_z(z, s, np.where(small, 1.0, g)), z)
    w = zz / s
    denom = s + g * zz
    with np.errstate(divide="ignore", invalid="ignore"):
        d_sigma_general = (1.0 - (1.0 + g) * zz / denom) / s
        a = zz / denom
        ell = np.log1p(g * w)
        g_safe = np.where(small, 1.0, g)
        d_gamma_general = a + (g_safe * a - ell) / (g_safe * g_safe)
    d_sigma_limit = (1.0 - w) / s
    d_gamma_limit = w - 0.5 * w * w
    d_sigma = np.where(small, d_sigma_limit, d_sigma_general)
    d_gamma = np.where(small, d_gamma_limit, d_gamma_general)
    zero = z == 0.0
    d_sigma = np.where(zero, 0.0, d_sigma)
    d_gamma = np.where(zero, 0.0, d_gamma)
    return _ret(d_sigma, z, sigma, gamma), _ret(d_gamma, z, sigma, gamma)


def deviance_hessian_diag(z, sigma, gamma):
    """Second partials (d2/dsigma2, d2/dgamma2) of :func:`deviance` for z > 0."""
    z = np.asarray(z, dtype=float)
    s = np.asarray(sigma, dtype=float)
    g = np.asarray(gamma, dtype=float)
    small = np.abs(g) < GAMMA_EPS
    u = 1.0 + g * z / s
    violated = (~small) & (u <= U_FLOOR)
    zz = np.where(violated, _clamped_z(z, s, np.where(small, 1.0, g)), z)
    w = zz / s
    denom = s + g * zz
    with np.errstate(divide="ignore", invalid="ignore"):
        d2_sigma_general = (w + (zz - s) / denom) / (s * denom)
        a = zz / denom
        ell = np.log1p(g * w)
        g_safe = np.where(small, 1.0, g)
        d2_gamma_general = 2.0 * (ell - g_safe * a) / g_safe**3 - (1.0 + 1.0 / g_safe) * a * a
    d2_sigma_limit = (2.0 * w - 1.0) / (s * s)
    d2_gamma_limit = (2.0 / 3.0) * w**3 - w * w
    d2_sigma = np.where(small, d2_sigma_limit, d2_sigma_general)
    d2_gamma = np.where(small, d2_gamma_limit, d2_gamma_general)
    zero = z == 0.0
    d2_sigma = np.where(zero, 0.0, d2_sigma)
    d2_gamma = np.where(zero, 0.0, d2_gamma)
    return _ret(d2_sigma, z, sigma, gamma), _ret(d2_gamma, z, sigma, gamma)


def total_deviance(z, sigma, gamma):
    """Sum of per-observation deviances."""
    return float(np.sum(deviance(z, sigma, gamma)))


def fit_unconditional_mle(z) -> GpdParams:
    """Maximum-likelihood GPD fit to positive exceedances.

    Derivative-free simplex search over (log sigma, gamma) inside the
    module-level box, started from a moment-style guess.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 5:
        raise PreconditionError("need at least 5 positive exceedances")
    if np.any(z <= 0) or not np.all(np.isfinite(z)):
        raise PreconditionError("exceedances must be positive and finite")
    if np.ptp(z) == 0.0:
        raise NonConvergenceError("degenerate likelihood: all exceedances identical")

    def objective(theta):
        return total_deviance(z, np.exp(theta[0]), theta[1])

    x0 = np.array([np.log(z.mean()), 0.1])
    res = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        bounds=[MLE_LOG_SIGMA_BOUNDS, MLE_GAMMA_BOUNDS],
        options={"maxiter": 4000, "maxfev": 8000, "xatol": 1e-10, "fatol": 1e-12},
    )
    if not np.all(np.isfinite(res.x)) or not np.isfinite(res.fun):
        raise NonConvergenceError(f"GPD likelihood optimization failed: {res.message}")
    return GpdParams(sigma=float(np.exp(res.x[0])), gamma=float(res.x[1]))


def extreme_quantile(q_tau0, sigma, gamma, tau0, tau):
    """Extrapolate the tau0-quantile q_tau0 out to tau >= tau0.

    Nondecreasing in tau and exactly q_tau0 at tau == tau0.
    """
    tau0 = np.asarray(tau0, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any((tau0 <= 0) | (tau0 >= 1)) or np.any(tau >= 1):
        raise ValueError("need 0 < tau0 <= tau < 1")
    if np.any(tau < tau0):
        raise ValueError("tau is below the threshold level tau0")
    q0 = np.asarray(q_tau0, dtype=float)
    s = np.asarray(sigma, dtype=float)
    g = np.asarray(gamma, dtype=float)
    base = np.log1p(-tau0) - np.log1p(-tau)  # log((1-tau0)/(1-tau)) >= 0
    x = g * base
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(x == 0.0, 1.0, np.expm1(x) / np.where(x == 0.0, 1.0, x))
    out = np.where(np.abs(g) < VALUE_GAMMA_EPS, q0 + s * base, q0 + s * base * factor)
    return _ret(out, q_tau0, sigma, gamma, tau0, tau)
