"""Inverse standard normal CDF (normal deviate transform) for DET axes."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

# Acklam's rational approximation (relative error ~1.15e-9 before refinement)
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def _horner(coeffs, x):
    acc = np.full_like(x, coeffs[0])
    for c in coeffs[1:]:
        acc = acc * x + c
    return acc


def _lower_half(p: np.ndarray) -> np.ndarray:
    """Refined quantiles for ``0 < p < 0.5``."""
    x = np.empty_like(p)
    tail = p < _P_LOW
    if tail.any():
        q = np.sqrt(-2.0 * np.log(p[tail]))
        x[tail] = _horner(_C, q) / (_horner(_D, q) * q + 1.0)
    mid = ~tail
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        x[mid] = _horner(_A, r) * q / (_horner(_B, r) * r + 1.0)
    # one Halley step against the CDF
    e = 0.5 * erfc(-x / _SQRT2) - p
    u = e * _SQRT2PI * np.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def probit_array(p) -> np.ndarray:
    """Elementwise inverse normal CDF; every value must lie in ``(0, 1)``.

    Values above 0.5 are reflected, ``probit(p) = -probit(1 - p)``, so the
    refinement always runs in the lower tail where the CDF keeps full
    relative precision.
    """
    p = np.asarray(p, dtype=np.float64)
    if not ((p > 0.0) & (p < 1.0)).all():
        raise ValueError("probit is defined on the open interval (0, 1)")
    flat = p.ravel()
    out = np.zeros_like(flat)
    lo = flat < 0.5
    hi = flat > 0.5
    if lo.any():
        out[lo] = _lower_half(flat[lo])
    if hi.any():
        out[hi] = -_lower_half(1.0 - flat[hi])
    return out.reshape(p.shape)


def probit(p: float) -> float:
    """Inverse of the standard normal CDF for ``0 < p < 1``."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probit is defined on (0, 1), got {p!r}")
    return float(probit_array(np.array([p]))[0])


def clamp_rate(rate: float, n_trials: int) -> float:
    """Replace 0 and 1 by half a count away from the boundary."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate!r}")
    if rate == 0.0:
        return 1.0 / (2 * n_trials)
    if rate == 1.0:
        return 1.0 - 1.0 / (2 * n_trials)
    return rate


def clamp_rates(rates, n_trials: int) -> np.ndarray:
    rates = np.asarray(rates, dtype=np.float64)
    half = 1.0 / (2 * n_trials)
    return np.where(rates == 0.0, half, np.where(rates == 1.0, 1.0 - half, rates))
