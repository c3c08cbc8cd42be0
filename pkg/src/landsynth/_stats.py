"""Numerical conventions shared by every module."""

import numpy as np

EPS = 1e-8
BANDWIDTH_FLOOR = 1e-8


def sample_sd(x) -> float:
    """Sample standard deviation (divisor n - 1); 0.0 for fewer than two values."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        return 0.0
    return float(np.std(x, ddof=1))


def silverman_bandwidth(x) -> float:
    """Rule-of-thumb Gaussian bandwidth ``1.06 * s * n**(-1/5)`` floored at 1e-8."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return BANDWIDTH_FLOOR
    h = 1.06 * sample_sd(x) * x.size ** (-0.2)
    return max(h, BANDWIDTH_FLOOR)


def round_half_away(x: float) -> int:
    return int(np.sign(x) * np.floor(abs(x) + 0.5))


def logsumexp(a, axis=None):
    """``log(sum(exp(a)))``, stable; a lean stand-in for scipy's on small arrays."""
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return out.item() if axis is None else np.squeeze(out, axis=axis)
