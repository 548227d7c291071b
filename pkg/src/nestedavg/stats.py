"""Distribution tools for comparing simulated ratios with their limit laws."""
from __future__ import annotations

import math

import numpy as np

_TINY = 1e-300
_EPS = 1e-16
_MAX_ITER = 10000


def _betacf(a, b, x):
    """Continued fraction for I_x(a, b) (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"continued fraction did not converge for a={a}, b={b}, x={x}")


def beta_cdf(a, b, x):
    """Regularised incomplete beta function ``I_x(a, b)``."""
    if not (a > 0 and b > 0):
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return float(x)
    lbt = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(lbt)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def beta_pdf(a, b, x):
    x = np.asarray(x, dtype=float)
    logb = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    with np.errstate(divide="ignore"):
        return np.exp((a - 1) * np.log(x) + (b - 1) * np.log1p(-x) - logb)


def ks_distance(samples, cdf):
    """Two-sided Kolmogorov-Smirnov distance between a sample and a CDF."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise ValueError("empty sample")
    F = np.asarray([cdf(v) for v in x], dtype=float)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def silverman_bandwidth(samples):
    x = np.asarray(samples, dtype=float)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = (q75 - q25) / 1.34
    spread = min(sd, iqr) if iqr > 0 else sd
    if not spread > 0:
        raise ValueError("sample has zero spread")
    return 1.06 * spread * x.size ** (-0.2)


def kde(samples, grid, bandwidth=None):
    """Gaussian kernel density estimate evaluated on ``grid``."""
    x = np.asarray(samples, dtype=float).ravel()
    if np.unique(x).size < 2:
        raise ValueError("need at least two distinct samples")
    h = silverman_bandwidth(x) if bandwidth is None else bandwidth
    grid = np.asarray(grid, dtype=float)
    out = np.empty(grid.shape)
    flat = grid.ravel()
    norm = 1.0 / (x.size * h * math.sqrt(2 * math.pi))
    for s in range(0, flat.size, 256):
        u = (flat[s:s + 256, None] - x[None, :]) / h
        out.ravel()[s:s + 256] = norm * np.exp(-0.5 * u * u).sum(axis=1)
    return out


def survival_curve(samples, z_grid):
    """Empirical ``Pr{sample >= z}`` for each z."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empty sample")
    z = np.asarray(z_grid, dtype=float)
    return (x.size - np.searchsorted(x, z, side="left")) / x.size


def sample_reference_laws(law, count, rng):
    """Exact samplers for the limiting laws of simulated ratios.

    ``"beta_mixture"``: ``U + (1 - U) Beta(1/2, 1/2)`` with ``U ~ Bernoulli(1/2)``.
    ``"one_plus_half_Vsq"``: ``1 + V^2 / 2`` with ``V = max(1 - 1/chi2_1, 0)``.
    ``("beta", a, b)`` or ``"beta:a,b"``: plain Beta draws.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if isinstance(law, str) and law.startswith("beta:"):
        a, b = (float(v) for v in law[5:].split(","))
        law = ("beta", a, b)
    if law == "beta_mixture":
        u = rng.random(count) < 0.5
        return np.where(u, 1.0, rng.beta(0.5, 0.5, count))
    if law == "one_plus_half_Vsq":
        chi = rng.standard_normal(count) ** 2
        v = np.maximum(1.0 - 1.0 / chi, 0.0)
        return 1.0 + 0.5 * v * v
    if isinstance(law, tuple) and len(law) == 3 and law[0] == "beta":
        return rng.beta(law[1], law[2], count)
    raise ValueError(f"unknown reference law {law!r}")


def kernel_smoothed(cdf, grid, bandwidth, bins=20000):
    """Gaussian-kernel smoothing of a law on [0, 1] given its CDF.

    This is the mean of a KDE built from draws of that law, which is the
    right reference when the density has boundary singularities.
    """
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    edges = np.linspace(0.0, 1.0, bins + 1)
    mass = np.diff([cdf(u) for u in edges])
    mid = 0.5 * (edges[1:] + edges[:-1])
    grid = np.asarray(grid, dtype=float)
    z = (grid[:, None] - mid[None, :]) / bandwidth
    return np.exp(-0.5 * z * z) @ mass / (bandwidth * math.sqrt(2 * math.pi))
