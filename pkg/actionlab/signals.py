"""
Environment signals x(t) with their derivatives, quasi-periodic
construction and the checks that go with it.

Signals are immutable after construction and evaluation is pure, so a
signal can be shared between worker processes.
"""

import csv
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .error_handling import DomainError, FileSystemError, ParameterError, ShapeError
from .numerics import fit_power_law

logger = logging.getLogger(__name__)

# Returned by estimate_order when every deviation vanishes.
EXACT_PERIODICITY = math.inf


class SignalKind(Enum):
    """Closed forms a signal can take."""
    CONSTANT = "constant"
    SINUSOID_BANK = "sinusoid-bank"
    PERIODIC_PLUS_DECAY = "periodic-plus-decay"
    TABULATED = "tabulated"


class EnvironmentSignal:
    """Base class: a sampler t -> (x(t), xdot(t)) on t >= 0."""

    kind: SignalKind

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ParameterError(f"signal dimension must be positive, got {dimension}")
        self.dimension = int(dimension)

    @property
    def period(self) -> Optional[float]:
        """Exact period when the signal is known to be periodic."""
        return None

    def sample(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Return (x(t), xdot(t))."""
        t = float(t)
        if not math.isfinite(t) or t < 0:
            raise DomainError(f"signal sampled at t={t}; time must be finite and non-negative")
        return self._evaluate(t)

    def position(self, t: float) -> np.ndarray:
        return self.sample(t)[0]

    def _evaluate(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


class ConstantSignal(EnvironmentSignal):
    kind = SignalKind.CONSTANT

    def __init__(self, value: Sequence[float]):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        super().__init__(value.size)
        self._value = value
        self._zero = np.zeros_like(value)

    def _evaluate(self, t):
        return self._value.copy(), self._zero.copy()


class SinusoidBank(EnvironmentSignal):
    """
    x(t) = offset + amplitudes @ sin(2*pi*f*t + phase).

    amplitudes is d x J, one column per frequency.
    """

    kind = SignalKind.SINUSOID_BANK

    def __init__(self, amplitudes, frequencies, phases=None, offset=None, period: Optional[float] = None):
        amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=float))
        frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
        if amplitudes.shape[1] != frequencies.size:
            raise ShapeError(
                f"amplitudes have {amplitudes.shape[1]} columns but {frequencies.size} frequencies were given")
        if np.any(frequencies <= 0):
            raise ParameterError("sinusoid frequencies must be positive")
        super().__init__(amplitudes.shape[0])
        self._amplitudes = amplitudes
        self._omega = 2 * np.pi * frequencies
        self._phases = np.zeros(frequencies.size) if phases is None else np.atleast_1d(np.asarray(phases, dtype=float))
        self._offset = np.zeros(self.dimension) if offset is None else np.atleast_1d(np.asarray(offset, dtype=float))
        if self._phases.size != frequencies.size or self._offset.size != self.dimension:
            raise ShapeError("phases must match frequencies and offset must match the signal dimension")
        if period is None and frequencies.size == 1:
            period = 1.0 / float(frequencies[0])
        self._period = period

    @property
    def period(self):
        return self._period

    def _evaluate(self, t):
        arg = self._omega * t + self._phases
        x = self._offset + self._amplitudes @ np.sin(arg)
        xdot = self._amplitudes @ (self._omega * np.cos(arg))
        return x, xdot


class PeriodicPlusDecaySignal(EnvironmentSignal):
    """
    x(t) = base(t) + delta(t) * v with delta(t) = amplitude / (alpha + t)^order
    and a fixed unit direction v.
    """

    kind = SignalKind.PERIODIC_PLUS_DECAY

    def __init__(self, base: EnvironmentSignal, amplitude: float, alpha: float, order: float,
                 direction: Optional[Sequence[float]] = None, period: Optional[float] = None):
        super().__init__(base.dimension)
        if alpha <= 0:
            raise ParameterError(f"decay offset alpha must be positive, got {alpha}")
        self.base = base
        self.amplitude = float(amplitude)
        self.alpha = float(alpha)
        self.order = float(order)
        self.direction = _unit_direction(direction, base.dimension)
        self._period = period if period is not None else base.period

    @property
    def period(self):
        return self._period

    def decay(self, t: float) -> float:
        return self.amplitude / (self.alpha + t) ** self.order

    def _evaluate(self, t):
        x, xdot = self.base._evaluate(t)
        s = self.alpha + t
        delta = self.amplitude / s ** self.order
        ddelta = -self.order * self.amplitude / s ** (self.order + 1)
        return x + delta * self.direction, xdot + ddelta * self.direction


class TabulatedSignal(EnvironmentSignal):
    """
    Cubic-spline interpolation of tabulated samples; the spline derivative
    is the returned xdot. With repeat=True the segment is extended
    periodically (the table must close on itself).
    """

    kind = SignalKind.TABULATED

    def __init__(self, times, values, repeat: bool = False):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or times.size < 4:
            raise ParameterError("tabulated signal needs at least 4 samples")
        if values.shape[0] != times.size:
            raise ShapeError(f"{times.size} times but {values.shape[0]} value rows")
        if np.any(np.diff(times) <= 0):
            raise ParameterError("tabulated times must be strictly increasing")
        super().__init__(values.shape[1])
        self.repeat = bool(repeat)
        if self.repeat:
            scale = 1.0 + float(np.max(np.abs(values)))
            if not np.allclose(values[0], values[-1], rtol=0.0, atol=1e-9 * scale):
                raise ParameterError("a repeated segment must end where it starts")
            values = values.copy()
            values[-1] = values[0]
            self._spline = CubicSpline(times, values, axis=0, bc_type='periodic')
        else:
            self._spline = CubicSpline(times, values, axis=0)
        self._derivative = self._spline.derivative()
        self.t_start = float(times[0])
        self.t_end = float(times[-1])

    @property
    def period(self):
        return self.t_end - self.t_start if self.repeat else None

    @classmethod
    def from_csv(cls, path: str, repeat: bool = False) -> "TabulatedSignal":
        """Load a table with header `t,x_1,...,x_d`."""
        try:
            with open(path, newline='') as f:
                rows = list(csv.reader(f))
        except OSError as e:
            raise FileSystemError(f"cannot read tabulated signal {path}: {e}", cause=e)
        if not rows:
            raise ParameterError(f"{path} is empty")
        header = [h.strip() for h in rows[0]]
        expected = ['t'] + [f'x_{i}' for i in range(1, len(header))]
        if len(header) < 2 or header != expected:
            raise ParameterError(f"{path}: header must be {','.join(expected)}, got {','.join(header)}")
        try:
            data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
        except ValueError as e:
            raise ParameterError(f"{path}: non-numeric entry ({e})", cause=e)
        logger.debug(f"Loaded {data.shape[0]} samples of a {data.shape[1] - 1}-dimensional signal from {path}")
        return cls(data[:, 0], data[:, 1:], repeat=repeat)

    def _evaluate(self, t):
        if t < self.t_start:
            raise DomainError(f"t={t} precedes the table start {self.t_start}")
        if self.repeat:
            t = self.t_start + math.fmod(t - self.t_start, self.t_end - self.t_start)
        elif t > self.t_end:
            raise DomainError(f"t={t} is beyond the table end {self.t_end}")
        return np.asarray(self._spline(t), dtype=float), np.asarray(self._derivative(t), dtype=float)


@dataclass(frozen=True)
class DerivativeCheck:
    max_rel_err: float
    worst_t: float
    passed: bool


def check_derivative(signal: EnvironmentSignal, grid: Sequence[float], step: float = 1e-5,
                     tolerance: float = 1e-4) -> DerivativeCheck:
    """Compare xdot against the central difference of x at every grid time."""
    worst, worst_t = 0.0, float('nan')
    for t in grid:
        t = float(t)
        lo = max(t - step, 0.0)
        hi = t + step
        numeric = (signal.position(hi) - signal.position(lo)) / (hi - lo)
        _, analytic = signal.sample(t)
        err = float(np.max(np.abs(analytic - numeric)) / max(1.0, float(np.max(np.abs(analytic)))))
        if err > worst or math.isnan(worst_t):
            worst, worst_t = err, t
    return DerivativeCheck(max_rel_err=worst, worst_t=worst_t, passed=worst <= tolerance)


class AdvanceMap:
    """gamma(t) = t + tau(t)."""

    def __call__(self, t):
        raise NotImplementedError

    def tau(self, t):
        return self(t) - np.asarray(t, dtype=float)

    def check(self, grid: Sequence[float], tolerance: float = 1e-9) -> "AdvanceCheck":
        """
        tau > 0 on the grid and gamma' > 1 by forward differences. A constant
        tau (gamma' = 1) is admitted as the boundary convention and flagged.
        """
        grid = np.asarray(grid, dtype=float)
        if grid.size < 2:
            raise ParameterError("advance-map check needs at least two grid points")
        taus = np.asarray(self.tau(grid), dtype=float)
        slopes = np.diff(np.asarray(self(grid), dtype=float)) / np.diff(grid)
        constant_tau = bool(np.all(np.abs(taus - taus[0]) <= tolerance * max(1.0, abs(taus[0]))))
        tau_ok = bool(np.all(taus > 0))
        if constant_tau:
            slope_ok = bool(np.all(slopes >= 1.0 - tolerance))
        else:
            slope_ok = bool(np.all(slopes - 1.0 > tolerance))
        return AdvanceCheck(min_tau=float(np.min(taus)), min_slope=float(np.min(slopes)),
                            boundary_convention=constant_tau, passed=tau_ok and slope_ok)


@dataclass(frozen=True)
class AdvanceCheck:
    min_tau: float
    min_slope: float
    boundary_convention: bool
    passed: bool


class AffineAdvance(AdvanceMap):
    def __init__(self, tau0: float):
        if not tau0 > 0 or not math.isfinite(tau0):
            raise ParameterError(f"pseudo-period must be positive and finite, got {tau0}")
        self.tau0 = float(tau0)

    def __call__(self, t):
        return np.asarray(t, dtype=float) + self.tau0 if np.ndim(t) else float(t) + self.tau0


class TabulatedAdvance(AdvanceMap):
    """Monotone (PCHIP) interpolation of samples (t_k, gamma(t_k))."""

    def __init__(self, times, gammas):
        times = np.asarray(times, dtype=float)
        gammas = np.asarray(gammas, dtype=float)
        if times.size < 2 or times.size != gammas.size:
            raise ParameterError("tabulated advance map needs matching time and gamma samples")
        if np.any(np.diff(times) <= 0) or np.any(np.diff(gammas) <= 0):
            raise ParameterError("tabulated advance map must be strictly increasing")
        if np.any(gammas <= times):
            raise ParameterError("tabulated advance map needs tau(t) > 0")
        self._interp = PchipInterpolator(times, gammas, extrapolate=False)
        self.t_start = float(times[0])
        self.t_end = float(times[-1])

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr < self.t_start) or np.any(arr > self.t_end):
            raise DomainError(f"advance map evaluated outside [{self.t_start}, {self.t_end}]")
        out = self._interp(arr)
        return out if np.ndim(t) else float(out)


@dataclass(frozen=True)
class QuasiPeriodSpec:
    epsilon: float
    alpha: float
    order: float
    advance: AdvanceMap

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")

    def envelope(self, t):
        return self.epsilon / (self.alpha + np.asarray(t, dtype=float)) ** self.order


def make_quasi_periodic(base: EnvironmentSignal, period: float, epsilon: float, alpha: float,
                        order: float, direction: Optional[Sequence[float]] = None) -> PeriodicPlusDecaySignal:
    """
    Perturb an exactly periodic base by delta(t) * v with
    delta(t) = (epsilon / 2) / (alpha + t)^order, so that
    ||x(t) - x(t + period)|| <= epsilon / (alpha + t)^order for order >= 0.
    """
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    if order < 0:
        raise ParameterError(f"the construction only guarantees the envelope for order >= 0, got {order}")
    if not period > 0:
        raise ParameterError(f"period must be positive, got {period}")

    checkpoints = np.linspace(0.0, 10.0 * period, 257)
    for t in checkpoints:
        x0 = base.position(t)
        x1 = base.position(t + period)
        if np.max(np.abs(x0 - x1)) > 1e-9 * (1.0 + np.max(np.abs(x0))):
            raise ParameterError(f"base signal is not periodic with period {period} (mismatch at t={t:g})")

    return PeriodicPlusDecaySignal(base, epsilon / 2.0, alpha, order, direction, period=period)


@dataclass(frozen=True)
class QuasiPeriodReport:
    max_violation: float
    worst_t: float
    first_violation_t: Optional[float]
    passed: bool
    advance: AdvanceCheck


def deviations(signal: EnvironmentSignal, advance: AdvanceMap, grid: Sequence[float]) -> np.ndarray:
    """||x(t) - x(gamma(t))|| on the grid."""
    grid = np.asarray(grid, dtype=float)
    gammas = np.atleast_1d(advance(grid))
    return np.array([np.linalg.norm(signal.position(t) - signal.position(g)) for t, g in zip(grid, gammas)])


def verify_quasi_periodicity(signal: EnvironmentSignal, spec: QuasiPeriodSpec, grid: Sequence[float],
                             tolerance: float = 1e-12) -> QuasiPeriodReport:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ParameterError("quasi-periodicity check needs a nonempty grid")
    excess = deviations(signal, spec.advance, grid) - spec.envelope(grid)
    worst = int(np.argmax(excess))
    violating = np.nonzero(excess > tolerance)[0]
    advance_check = spec.advance.check(grid) if grid.size > 1 else AdvanceCheck(
        float(spec.advance.tau(grid[0])), float('nan'), True, True)
    report = QuasiPeriodReport(
        max_violation=float(excess[worst]),
        worst_t=float(grid[worst]),
        first_violation_t=float(grid[violating[0]]) if violating.size else None,
        passed=bool(excess[worst] <= tolerance),
        advance=advance_check,
    )
    if advance_check.boundary_convention:
        logger.debug("constant pseudo-period: gamma' = 1 admitted as the boundary convention")
    return report


def estimate_order(signal: EnvironmentSignal, advance: AdvanceMap, grid: Sequence[float],
                   alpha_hat: float = 1.0, atol: float = 1e-12) -> float:
    """
    Negated least-squares slope of log deviation against log(alpha_hat + t).
    Returns EXACT_PERIODICITY when no deviation rises above atol.
    """
    grid = np.asarray(grid, dtype=float)
    devs = deviations(signal, advance, grid)
    keep = devs > atol
    if np.count_nonzero(keep) < 2:
        return EXACT_PERIODICITY
    slope, _ = fit_power_law(grid[keep], devs[keep], offset=alpha_hat)
    return -slope


def _unit_direction(direction, dimension: int) -> np.ndarray:
    if direction is None:
        v = np.zeros(dimension)
        v[0] = 1.0
        return v
    v = np.asarray(direction, dtype=float)
    if v.shape != (dimension,):
        raise ShapeError(f"direction has shape {v.shape}, expected ({dimension},)")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ParameterError("perturbation direction must be nonzero")
    return v / norm
