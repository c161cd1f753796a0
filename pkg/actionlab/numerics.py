"""
Shared numerical helpers: centered differences, log-log power-law fits
and classical Runge-Kutta steps for first-order systems.
"""

import logging
from typing import Callable, Tuple

import numpy as np

from .error_handling import ParameterError

logger = logging.getLogger(__name__)


def central_difference(func: Callable[[np.ndarray], float], x0: np.ndarray, eps: float) -> np.ndarray:
    """
    Centered-difference gradient of a scalar function at x0, one
    coordinate at a time with step eps.
    """
    x0 = np.asarray(x0, dtype=float)
    grad = np.zeros(x0.size)
    x = x0.copy()
    for j in range(x0.size):
        x[j] = x0[j] + eps
        fplus = func(x)
        x[j] = x0[j] - eps
        fminus = func(x)
        x[j] = x0[j]
        grad[j] = (fplus - fminus) / (2 * eps)
    return grad


def central_difference_jacobian(func: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                                eps: float) -> np.ndarray:
    """Centered-difference Jacobian of a vector function; column j is d func / d x_j."""
    x0 = np.asarray(x0, dtype=float)
    columns = []
    x = x0.copy()
    for j in range(x0.size):
        x[j] = x0[j] + eps
        fplus = np.asarray(func(x), dtype=float)
        x[j] = x0[j] - eps
        fminus = np.asarray(func(x), dtype=float)
        x[j] = x0[j]
        columns.append((fplus - fminus) / (2 * eps))
    return np.stack(columns, axis=-1)


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Element-wise |a - f| / max(1, |a|, |f|), maximized."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / scale))


def fit_power_law(t: np.ndarray, y: np.ndarray, offset: float = 0.0) -> Tuple[float, float]:
    """
    Least-squares fit of log(y) = log(C) + slope * log(offset + t).

    Returns (slope, C). Requires at least two strictly positive samples.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (y > 0) & np.isfinite(y)
    if np.count_nonzero(keep) < 2:
        raise ParameterError("power-law fit needs at least two positive samples")
    logx = np.log(offset + t[keep])
    logy = np.log(y[keep])
    slope, intercept = np.polyfit(logx, logy, 1)
    return float(slope), float(np.exp(intercept))


def rk4_step(fn: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray,
             h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of y' = fn(t, y)."""
    k1 = h * fn(t, y)
    k2 = h * fn(t + h / 2, y + k1 / 2)
    k3 = h * fn(t + h / 2, y + k2 / 2)
    k4 = h * fn(t + h, y + k3)
    return y + (k1 + 2 * k2 + 2 * k3 + k4) / 6


def rk4_linear_propagator(F: np.ndarray, h: float) -> np.ndarray:
    """
    RK4 one-step matrix for the constant linear system y' = F y:
    I + hF + (hF)^2/2 + (hF)^3/6 + (hF)^4/24.
    """
    n = F.shape[0]
    hF = h * F
    R = np.identity(n)
    term = np.identity(n)
    for k in range(1, 5):
        term = term @ hF / k
        R = R + term
    return R
