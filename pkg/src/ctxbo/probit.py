"""Probit-likelihood primitives shared by inference and acquisition code.

All ratios φ/Φ are computed in log space via ``log_ndtr`` so that strongly
contradicted observations (latent values of either sign, arbitrarily large)
stay finite.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr, ndtr, roots_hermite

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

_GH_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z - LOG_SQRT_2PI)


def norm_cdf(z):
    return ndtr(z)


def inv_mills(t):
    """φ(t) / Φ(t), stable for arbitrarily negative ``t``."""
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * t * t - LOG_SQRT_2PI - log_ndtr(t))


def probit_loglik_derivs(c, f):
    """Log-likelihood ln Φ((2c−1)f) and its first two derivatives in ``f``.

    Vectorized over matching-shape ``c`` and ``f``. The curvature term
    ``-d2`` is strictly positive for the probit link, which downstream code
    relies on when forming ``W``.
    """
    c = np.asarray(c, dtype=float)
    f = np.asarray(f, dtype=float)
    sign = 2.0 * c - 1.0
    t = sign * f
    value = log_ndtr(t)
    r = inv_mills(t)
    d1 = sign * r
    d2 = -r * (r + t)
    return value, d1, d2


def gauss_hermite(order: int):
    if order not in _GH_CACHE:
        nodes, weights = roots_hermite(order)
        _GH_CACHE[order] = (nodes, weights / np.sqrt(np.pi))
    return _GH_CACHE[order]


def moments_of_probit(mu, var, quad_order: int = 61):
    """Mean and variance of Φ(f) for f ~ N(mu, var).

    The mean uses the exact Gaussian-probit identity; the second moment is
    Gauss-Hermite quadrature. Broadcasts over arrays.
    """
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var < 0):
        raise ValueError("variance must be nonnegative")
    mean = ndtr(mu / np.sqrt(1.0 + var))
    nodes, weights = gauss_hermite(quad_order)
    f = mu[..., None] + np.sqrt(2.0 * var)[..., None] * nodes
    second = np.sum(weights * ndtr(f) ** 2, axis=-1)
    return mean, np.maximum(second - mean**2, 0.0)


def binary_entropy_bits(p):
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - q * np.log2(q)
    return np.where((p <= 0.0) | (p >= 1.0), 0.0, h)
