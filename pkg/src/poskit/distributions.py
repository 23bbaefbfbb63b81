"""Normal, half-normal and bivariate-normal primitives.

These are the only distributions the engine needs. The univariate normal
cdf/quantile are delegated to ``scipy.special`` (``ndtr``/``ndtri``), which
are accurate well below the 1e-12 absolute-error budget the tail-sensitive
calibration integrands require.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError

# Phi^{-1}(0.75): half-normal median = scale * this constant.
HALF_NORMAL_MEDIAN_FACTOR = float(ndtri(0.75))

_LOG_2PI = math.log(2.0 * math.pi)


def norm_pdf(x, mean=0.0, sd=1.0):
    """Normal density, vectorized."""
    z = (np.asarray(x, dtype=float) - mean) / sd
    return np.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))


def norm_logpdf(x, mean=0.0, sd=1.0):
    z = (np.asarray(x, dtype=float) - mean) / sd
    return -0.5 * z * z - math.log(sd) - 0.5 * _LOG_2PI


def norm_cdf(x, mean=0.0, sd=1.0):
    """Normal cdf, vectorized; absolute error below 1e-15."""
    return ndtr((np.asarray(x, dtype=float) - mean) / sd)


def norm_quantile(p, mean=0.0, sd=1.0):
    """Normal quantile, vectorized; inverse of :func:`norm_cdf`."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise DomainError("quantile probability must lie strictly in (0, 1)")
    return mean + sd * ndtri(p)


def expit(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def logit(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise DomainError("logit argument must lie strictly in (0, 1)")
    out = np.log(p / (1.0 - p))
    return out if out.ndim else float(out)


def half_normal_median(scale: float) -> float:
    """Median of |X| for X ~ N(0, scale^2)."""
    if scale < 0:
        raise DomainError("half-normal scale must be nonnegative")
    return scale * HALF_NORMAL_MEDIAN_FACTOR


def half_normal_logpdf(x, scale: float):
    """Log density of the half-normal HN(scale^2) on x >= 0."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    ok = x >= 0
    out[ok] = (
        0.5 * math.log(2.0 / math.pi)
        - math.log(scale)
        - 0.5 * (x[ok] / scale) ** 2
    )
    return out if out.ndim else float(out)


def half_normal_quantile(p, scale: float):
    """Quantile of HN(scale^2): scale * Phi^{-1}((1+p)/2)."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0.0) | (p >= 1.0)):
        raise DomainError("half-normal quantile probability must lie in [0, 1)")
    return scale * ndtri((1.0 + p) / 2.0)


def bivariate_norm_logpdf(x, y, mean_x, mean_y, sd_x, sd_y, corr):
    """Log density of a bivariate normal, vectorized over x/y."""
    if not -1.0 < corr < 1.0:
        raise DomainError("bivariate normal correlation must lie strictly in (-1, 1)")
    zx = (np.asarray(x, dtype=float) - mean_x) / sd_x
    zy = (np.asarray(y, dtype=float) - mean_y) / sd_y
    one_minus_r2 = 1.0 - corr * corr
    quad = (zx * zx - 2.0 * corr * zx * zy + zy * zy) / one_minus_r2
    return -0.5 * quad - math.log(sd_x) - math.log(sd_y) - 0.5 * math.log(one_minus_r2) - _LOG_2PI


def cov_from_sds(sds, corr: float) -> np.ndarray:
    """2x2 covariance matrix from per-coordinate sds and a correlation."""
    sds = np.asarray(sds, dtype=float)
    if sds.shape != (2,):
        raise DomainError("expected exactly two standard deviations")
    if np.any(sds <= 0):
        raise DomainError("standard deviations must be positive")
    off = corr * sds[0] * sds[1]
    return np.array([[sds[0] ** 2, off], [off, sds[1] ** 2]])


def chol2x2(var_x: float, var_y: float, corr: float) -> np.ndarray:
    """Lower Cholesky factor of the 2x2 covariance with the given correlation."""
    sx, sy = math.sqrt(var_x), math.sqrt(var_y)
    return np.array([[sx, 0.0], [corr * sy, sy * math.sqrt(1.0 - corr * corr)]])
