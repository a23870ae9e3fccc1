"""Exact Polya-Gamma PG(1, z) variates.

Draws use Devroye's alternating-series accept/reject construction: a proposal
mixing a truncated exponential (right of ``_TRUNC``) and a truncated inverse
Gaussian (left of it), accepted by evaluating partial sums of the Jacobi
density until the uniform falls outside the bracket.  No truncation of the
infinite series is involved, so draws are exact.
"""

import math

import numba
import numpy as np

from .exceptions import ValidationError

_TRUNC = 0.64
_TRUNC_RECIP = 1.0 / _TRUNC
_PI = math.pi
_LOG_HALF_PI = math.log(0.5 * math.pi)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_SQRT_TRUNC_RECIP = math.sqrt(_TRUNC_RECIP)


@numba.njit(cache=True)
def _log_norm_cdf(x):
    p = 0.5 * math.erfc(-x * _INV_SQRT2)
    if p > 0.0:
        return math.log(p)
    # asymptotic tail for x << 0
    return -0.5 * x * x - math.log(-x) - 0.5 * math.log(2.0 * _PI)


@numba.njit(cache=True)
def _series_coef(n, x, base):
    # n-th term of the Jacobi density series, piecewise around _TRUNC;
    # base = -1.5 * log(pi x / 2) is only used left of the truncation point
    k = (n + 0.5) * _PI
    if x > _TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    if x > 0.0:
        return math.exp(base + math.log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x)
    return 0.0


@numba.njit(cache=True)
def _norm_cdf(x):
    return 0.5 * math.erfc(-x * _INV_SQRT2)


@numba.njit(cache=True)
def _mass_texpon(z):
    # probability that the proposal comes from the exponential piece
    t = _TRUNC
    fz = 0.125 * _PI * _PI + 0.5 * z * z
    b = _SQRT_TRUNC_RECIP * (t * z - 1.0)
    a = -_SQRT_TRUNC_RECIP * (t * z + 1.0)
    if z < 8.0:
        scale = fz * math.exp(fz * t)
        qdivp = 4.0 / _PI * scale * (math.exp(-z) * _norm_cdf(b) + math.exp(z) * _norm_cdf(a))
    else:
        # log space: fz * exp(fz * t) overflows for large z
        x0 = math.log(fz) + fz * t
        qdivp = 4.0 / _PI * (math.exp(x0 - z + math.log(_norm_cdf(b)))
                             + math.exp(x0 + z + _log_norm_cdf(a)))
    return 1.0 / (1.0 + qdivp)


@numba.njit(cache=True)
def _rtigauss(rng, z):
    # inverse Gaussian IG(1/z, 1) truncated to (0, _TRUNC)
    t = _TRUNC
    x = t + 1.0
    if _TRUNC_RECIP > z:
        alpha = 0.0
        while rng.random() > alpha:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = 1.0 + e1 * t
            x = t / (x * x)
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > t:
            y = rng.standard_normal()
            y *= y
            half_mu = 0.5 * mu
            mu_y = mu * y
            x = mu + half_mu * mu_y - half_mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
    return x


@numba.njit(cache=True)
def pg1_prepare(z):
    """Per-parameter constants ``(half |z|, exponential rate, exponential mass)``."""
    h = abs(z) * 0.5
    return h, 0.125 * _PI * _PI + 0.5 * h * h, _mass_texpon(h)


@numba.njit(cache=True)
def pg1_draw_prepared(rng, h, fz, p_exp):
    while True:
        if rng.random() < p_exp:
            x = _TRUNC + rng.standard_exponential() / fz
        else:
            x = _rtigauss(rng, h)
        base = -1.5 * (_LOG_HALF_PI + math.log(x)) if x <= _TRUNC else 0.0
        s = _series_coef(0, x, base)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _series_coef(n, x, base)
                if y <= s:
                    return 0.25 * x
            else:
                s += _series_coef(n, x, base)
                if y > s:
                    break


@numba.njit(cache=True)
def pg1_draw(rng, z):
    """One PG(1, z) draw; ``rng`` is a ``numpy.random.Generator``."""
    h, fz, p_exp = pg1_prepare(z)
    return pg1_draw_prepared(rng, h, fz, p_exp)


@numba.njit(cache=True)
def pg1_fill(rng, z, out):
    for i in range(z.shape[0]):
        out[i] = pg1_draw(rng, z[i])


def sample_pg1(z, rng, size=None):
    """Draw PG(1, z) variates.

    Parameters
    ----------
    z : float or array_like
        Tilting parameter(s); must be finite.
    rng : numpy.random.Generator
    size : int, optional
        Number of draws when ``z`` is a scalar.

    Returns
    -------
    float or ndarray
    """
    z_arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z_arr)):
        raise ValidationError("PG tilting parameter must be finite")
    if size is not None:
        z_arr = np.broadcast_to(z_arr, (size,) if np.ndim(size) == 0 else tuple(size))
    flat = np.ascontiguousarray(z_arr, dtype=float).ravel()
    out = np.empty_like(flat)
    pg1_fill(rng, flat, out)
    if z_arr.ndim == 0:
        return float(out[0])
    return out.reshape(z_arr.shape)


def pg1_mean(z):
    """E[PG(1, z)] = tanh(z/2) / (2z), with the limit 1/4 at zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-6
    safe = np.where(small, 1.0, z)
    # series tanh(z/2)/(2z) = 1/4 - z^2/48 + ...
    out = np.where(small, 0.25 - z * z / 48.0, np.tanh(safe / 2.0) / (2.0 * safe))
    return float(out) if out.ndim == 0 else out


def pg1_var(z):
    """Var[PG(1, z)] = (sinh z - z) / (4 z^3 cosh^2(z/2)), 1/24 at zero."""
    z = np.abs(np.asarray(z, dtype=float))
    small = z < 1e-3
    safe = np.where(small, 1.0, z)
    th = np.tanh(safe / 2.0)
    exact = (2.0 * th - safe * (1.0 - th * th)) / (4.0 * safe ** 3)
    out = np.where(small, 1.0 / 24.0 - z * z / 120.0, exact)
    return float(out) if out.ndim == 0 else out
