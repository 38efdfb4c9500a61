"""Independent inverse normal CDF: bisection against a series/continued-fraction erfc.

Shares nothing with the package's probit (no rational approximation, no
library erfc).
"""

import math

import numpy as np

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def erfc_nonneg(z: np.ndarray) -> np.ndarray:
    """erfc for z >= 0: Maclaurin series of erf below 2, Laplace continued fraction above."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    small = z < 2.0
    if small.any():
        x = z[small]
        x2 = x * x
        term = x.copy()
        total = x.copy()
        for n in range(1, 80):
            term = term * (-x2) / n
            total = total + term / (2 * n + 1)
        out[small] = 1.0 - _TWO_OVER_SQRT_PI * total
    big = ~small
    if big.any():
        x = z[big]
        k = x.copy()
        for n in range(200, 0, -1):
            k = x + (n / 2.0) / k
        out[big] = np.exp(-x * x) / (math.sqrt(math.pi) * k)
    return out


def normal_cdf(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    z = np.abs(x) / math.sqrt(2.0)
    tail = 0.5 * erfc_nonneg(z)
    return np.where(x < 0, tail, 1.0 - tail)


def inverse_normal_cdf(p, iterations: int = 200) -> np.ndarray:
    """Solve cdf(x) = p by bisection on [-40, 40]; upper half by reflection."""
    p = np.asarray(p, dtype=np.float64)
    lower = p <= 0.5
    q = np.where(lower, p, 1.0 - p)
    lo = np.full_like(q, -40.0)
    hi = np.zeros_like(q)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = normal_cdf(mid) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x = 0.5 * (lo + hi)
    x = np.where(q == 0.5, 0.0, x)
    return np.where(lower, x, -x)
