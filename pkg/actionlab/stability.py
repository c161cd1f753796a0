"""
Stability machinery for x'' + 2A(t)x' + B(t)x = 0.

Matrix measures, the two exponential-stability certificates (the general
measure-based one and the homogeneous-damping one with A = (theta/2)I),
and simulation oracles that check a certificate against the transition
matrix of the first-order reduction.
"""

import csv
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.interpolate import interp1d

from .error_handling import (DivergenceError, DomainError, FileSystemError, HypothesisViolationError,
                             ParameterError, ShapeError)
from .numerics import fit_power_law, rk4_linear_propagator, rk4_step

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e12
DEFAULT_GRID_SIZE = 512
M_GRID_SIZE = 256
BIBO_SLACK = 0.2


def _norm_order(norm):
    if norm in (1, "1"):
        return 1
    if norm in (2, "2"):
        return 2
    if norm in ("inf", "∞") or (isinstance(norm, float) and math.isinf(norm) and norm > 0):
        return np.inf
    raise ParameterError(f"unsupported matrix measure norm '{norm}' (1 | 2 | inf)")


def matrix_measure(P, norm=2) -> float:
    """Logarithmic norm of P in closed form."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ShapeError(f"matrix measure needs a square matrix, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ParameterError("matrix measure of a non-finite matrix")
    order = _norm_order(norm)
    if order == 2:
        return float(np.linalg.eigvalsh(0.5 * (P + P.T))[-1])
    off = np.abs(P) - np.diag(np.abs(np.diag(P)))
    if order == 1:
        return float(np.max(np.diag(P) + off.sum(axis=0)))
    return float(np.max(np.diag(P) + off.sum(axis=1)))


def matrix_measure_limit(P, norm=2, h: float = 1e-7) -> float:
    """(||I + hP|| - 1) / h, the one-sided derivative the closed forms stand for."""
    P = np.asarray(P, dtype=float)
    order = _norm_order(norm)
    return float((np.linalg.norm(np.identity(P.shape[0]) + h * P, ord=order) - 1.0) / h)


class MatrixProvider:
    """Time-dependent coefficient matrix."""

    is_constant = False

    def __init__(self, dimension: int):
        self.dimension = int(dimension)

    def __call__(self, t: float) -> np.ndarray:
        raise NotImplementedError


class ConstantMatrix(MatrixProvider):
    is_constant = True

    def __init__(self, matrix):
        M = np.atleast_2d(np.asarray(matrix, dtype=float))
        if M.shape[0] != M.shape[1]:
            raise ShapeError(f"coefficient matrix must be square, got {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ParameterError("coefficient matrix has non-finite entries")
        super().__init__(M.shape[0])
        self.matrix = M

    def __call__(self, t):
        return self.matrix


class GridMatrix(MatrixProvider):
    """Matrices sampled on increasing times, linearly interpolated in between."""

    def __init__(self, times, matrices):
        times = np.asarray(times, dtype=float)
        matrices = np.asarray(matrices, dtype=float)
        if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2] or matrices.shape[0] != times.size:
            raise ShapeError(f"grid matrices must have shape (N, n, n) with N = {times.size}")
        if times.size < 2 or np.any(np.diff(times) <= 0):
            raise ParameterError("grid times must be strictly increasing with at least two nodes")
        if not np.all(np.isfinite(matrices)):
            raise ParameterError("grid matrices have non-finite entries")
        super().__init__(matrices.shape[1])
        self.times = times
        self._interp = interp1d(times, matrices, axis=0)

    def __call__(self, t):
        lo, hi = self.times[0], self.times[-1]
        slack = 1e-9 * (1.0 + abs(hi))
        if t < lo - slack or t > hi + slack:
            raise DomainError(f"t={t} outside the coefficient grid [{lo}, {hi}]")
        return self._interp(min(max(t, lo), hi))


class ClosedFormMatrix(MatrixProvider):
    def __init__(self, func: Callable[[float], np.ndarray], dimension: int):
        super().__init__(dimension)
        self.func = func

    def __call__(self, t):
        M = np.asarray(self.func(t), dtype=float)
        if M.shape != (self.dimension, self.dimension):
            raise ShapeError(f"closed-form matrix returned shape {M.shape}, expected {(self.dimension,) * 2}")
        return M


class TimeVaryingSystem:
    """x'' + 2A(t)x' + B(t)x = 0."""

    def __init__(self, A: MatrixProvider, B: MatrixProvider):
        if A.dimension != B.dimension:
            raise ShapeError(f"A is {A.dimension}x{A.dimension} but B is {B.dimension}x{B.dimension}")
        self.A = A
        self.B = B
        self.dimension = A.dimension

    @classmethod
    def constant(cls, A, B) -> "TimeVaryingSystem":
        return cls(ConstantMatrix(A), ConstantMatrix(B))

    @property
    def is_constant(self) -> bool:
        return self.A.is_constant and self.B.is_constant

    def first_order_matrix(self, t: float) -> np.ndarray:
        n = self.dimension
        F = np.zeros((2 * n, 2 * n))
        F[:n, n:] = np.identity(n)
        F[n:, :n] = -self.B(t)
        F[n:, n:] = -2.0 * self.A(t)
        return F


def load_system_csv(path: str) -> TimeVaryingSystem:
    """Read a `t, a_11..a_nn, b_11..b_nn` table (row-major entries)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise FileSystemError(f"cannot read coefficient table {path}: {e}", cause=e)
    if not rows:
        raise ParameterError(f"coefficient table {path} is empty")
    header = [h.strip() for h in rows[0]]
    n = int(round(math.sqrt((len(header) - 1) / 2)))
    expected = (["t"] + [f"a_{i}{j}" for i in range(1, n + 1) for j in range(1, n + 1)]
                + [f"b_{i}{j}" for i in range(1, n + 1) for j in range(1, n + 1)])
    if n < 1 or header != expected:
        raise ParameterError(f"coefficient table {path}: header must be {', '.join(expected) if n else 't, a_.., b_..'}")
    data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
    times = data[:, 0]
    A = data[:, 1:1 + n * n].reshape(-1, n, n)
    B = data[:, 1 + n * n:].reshape(-1, n, n)
    return TimeVaryingSystem(GridMatrix(times, A), GridMatrix(times, B))


def default_t_grid(t0: float, T: float, size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    return np.linspace(t0, T, size)


def default_m_grid(system: TimeVaryingSystem, t_grid: Sequence[float], size: int = M_GRID_SIZE) -> np.ndarray:
    scale = max(1.0,
                2.0 * max(np.linalg.norm(system.A(t), 2) for t in t_grid),
                2.0 * math.sqrt(max(np.linalg.norm(system.B(t), 2) for t in t_grid)))
    return np.geomspace(1e-3 * scale, scale, size)


@dataclass(frozen=True)
class StabilityCertificate:
    m: float
    l: float
    c: float
    margin: float
    decay_rate: float
    method: str
    grid_size: int
    chi: Optional[float] = None
    lambda_min: Optional[float] = None

    def envelope(self, t, gamma: float = 1.0, t0: float = 0.0):
        return gamma * np.exp(-self.decay_rate * (np.asarray(t, dtype=float) - t0))


def _evaluate_grid(system: TimeVaryingSystem, t_grid) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise ParameterError("time grid is empty")
    if system.is_constant:
        return [system.A(t_grid[0])], [system.B(t_grid[0])]
    return [system.A(t) for t in t_grid], [system.B(t) for t in t_grid]


def _sun_terms(As, Bs, m: float) -> Tuple[float, float, float, float]:
    n = As[0].shape[0]
    I = np.identity(n)
    l = max(max(0.0, 2.0 * matrix_measure(m * I - A, 2)) for A in As)
    c = max(np.linalg.norm(2.0 * m * A - m * m * I - B, 2) for A, B in zip(As, Bs))
    root = math.sqrt(l * l + 4.0 * c)
    return l, c, l + root - 2.0 * m, m - (l + root) / 2.0


def sun_margin(system: TimeVaryingSystem, m: float, t_grid) -> Tuple[float, float, float, float]:
    """(l, c, margin, decay rate) for a single m."""
    if not m > 0:
        raise ParameterError(f"m must be positive, got {m}")
    As, Bs = _evaluate_grid(system, t_grid)
    return _sun_terms(As, Bs, m)


def certify_sun(system: TimeVaryingSystem, m_grid: Optional[Sequence[float]] = None,
                t_grid: Optional[Sequence[float]] = None) -> Optional[StabilityCertificate]:
    """
    First m in m_grid with l + sqrt(l^2 + 4c) - 2m < 0, where l and c are
    the suprema over t_grid. None when no m qualifies.
    """
    if t_grid is None:
        if not system.is_constant:
            raise ParameterError("time-varying systems need an explicit t_grid")
        t_grid = [0.0]
    t_grid = np.asarray(t_grid, dtype=float)
    if m_grid is None:
        m_grid = default_m_grid(system, t_grid)
    m_grid = np.asarray(m_grid, dtype=float)
    if m_grid.size == 0 or t_grid.size == 0:
        raise ParameterError("certificate search needs non-empty m and t grids")
    if np.any(m_grid <= 0):
        raise ParameterError("m grid must be positive")

    As, Bs = _evaluate_grid(system, t_grid)
    for m in m_grid:
        l, c, margin, rate = _sun_terms(As, Bs, float(m))
        if margin < 0:
            logger.debug(f"certificate at m={m:.6g}: l={l:.6g}, c={c:.6g}, margin={margin:.3e}")
            return StabilityCertificate(m=float(m), l=l, c=c, margin=margin, decay_rate=rate,
                                        method="sun", grid_size=int(t_grid.size))
    logger.debug(f"no certificate over {m_grid.size} values of m")
    return None


@dataclass(frozen=True)
class HomogeneousAnalysis:
    theta: float
    lambda_min: float
    lambda_max: float
    chi: float
    first_condition: bool
    second_condition_literal: bool
    second_condition_simplified: bool
    window: Optional[Tuple[float, float]]
    certificate: Optional[StabilityCertificate]
    grid_size: int


def _spectrum(B: np.ndarray) -> Tuple[np.ndarray, float]:
    """Eigenvalues and the 2-norm condition number of the eigenvector matrix."""
    if np.allclose(B, B.T, rtol=0.0, atol=1e-12):
        return np.linalg.eigvalsh(0.5 * (B + B.T)), 1.0
    values, vectors = linalg.eig(B)
    if np.max(np.abs(values.imag)) > 1e-12 * max(1.0, np.max(np.abs(values))):
        raise HypothesisViolationError("B(t) has complex eigenvalues; its spectrum must be real and positive")
    return np.sort(values.real), float(np.linalg.cond(vectors, 2))


def analyze_homogeneous(theta: float, B_provider: MatrixProvider, t_grid,
                        m_grid_size: int = M_GRID_SIZE) -> HomogeneousAnalysis:
    """
    Conditions of the homogeneous-damping certificate for w'' + theta w' + B(t) w = 0
    together with the search for m inside the feasible window.
    """
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise ParameterError("time grid is empty")
    nodes = t_grid[:1] if B_provider.is_constant else t_grid
    spectra = []
    chi = 1.0
    for t in nodes:
        values, cond = _spectrum(B_provider(t))
        if values[0] <= 0:
            raise HypothesisViolationError(f"B(t) has non-positive eigenvalue {values[0]:.6g} at t={t:.6g}")
        spectra.append(values)
        chi = max(chi, cond)
    lam_min = float(min(v[0] for v in spectra))
    lam_max = float(max(v[-1] for v in spectra))

    first = theta ** 2 >= 4.0 * lam_min
    literal = theta ** 2 >= 4.0 * lam_min * chi * (1.0 + chi) / chi
    simplified = theta ** 2 >= 4.0 * lam_min * (1.0 + chi)

    window = None
    certificate = None
    discriminant = chi ** 2 * theta ** 2 - 4.0 * chi * (1.0 + chi) * lam_min
    if first and literal and discriminant >= 0:
        lower = (theta * chi - math.sqrt(discriminant)) / (2.0 * (1.0 + chi))
        half_width = 0.5 * math.sqrt(theta ** 2 - 4.0 * lam_min)
        lo = max(lower, theta / 2.0 - half_width)
        hi = min(theta / 2.0, theta / 2.0 + half_width)
        if lo < hi:
            window = (lo, hi)
            candidates = np.geomspace(max(lo, 1e-300), hi, m_grid_size + 2)[1:-1]
            for m in candidates:
                # sup over the whole spectrum; reduces to |m theta - m^2 - lambda_min| when B = lambda I
                c = max(float(np.max(np.abs(m * theta - m * m - v))) for v in spectra) * chi
                if math.sqrt(c) < m:
                    rate = m - math.sqrt(c)
                    certificate = StabilityCertificate(
                        m=float(m), l=0.0, c=c, margin=2.0 * math.sqrt(c) - 2.0 * m, decay_rate=rate,
                        method="homogeneous", grid_size=int(t_grid.size), chi=chi, lambda_min=lam_min)
                    break
    logger.debug(f"homogeneous analysis theta={theta}: lambda_min={lam_min:.6g}, chi={chi:.6g}, "
                 f"window={window}, certified={certificate is not None}")
    return HomogeneousAnalysis(theta=theta, lambda_min=lam_min, lambda_max=lam_max, chi=chi,
                               first_condition=first, second_condition_literal=literal,
                               second_condition_simplified=simplified, window=window,
                               certificate=certificate, grid_size=int(t_grid.size))


def certify_homogeneous(theta: float, B_provider: MatrixProvider, t_grid,
                        m_grid_size: int = M_GRID_SIZE) -> Optional[StabilityCertificate]:
    return analyze_homogeneous(theta, B_provider, t_grid, m_grid_size).certificate


@dataclass(frozen=True)
class TransitionEnvelope:
    times: np.ndarray
    norms: np.ndarray
    t0: float


def simulate_transition(system: TimeVaryingSystem, t0: float, T: float, h: float,
                        basis: Optional[np.ndarray] = None, sample_stride: int = 1) -> TransitionEnvelope:
    """
    Integrate the 2n-dimensional reduction from each column of basis
    (the identity by default) and report ||Phi(t, t0)||_2 over time.
    """
    if not h > 0:
        raise ParameterError(f"step size must be positive, got {h}")
    if not T > t0:
        raise ParameterError(f"horizon T={T} must exceed t0={t0}")
    size = 2 * system.dimension
    Phi = np.identity(size) if basis is None else np.array(basis, dtype=float)
    if Phi.shape[0] != size:
        raise ShapeError(f"basis must have {size} rows")

    n_steps = int(round((T - t0) / h))
    propagator = rk4_linear_propagator(system.first_order_matrix(t0), h) if system.is_constant else None

    def rhs(t, Y):
        return system.first_order_matrix(t) @ Y

    times = [t0]
    norms = [float(np.linalg.norm(Phi, 2))]
    for step in range(1, n_steps + 1):
        t = t0 + (step - 1) * h
        Phi = propagator @ Phi if propagator is not None else rk4_step(rhs, t, Phi, h)
        t_next = t0 + step * h
        if not np.all(np.isfinite(Phi)):
            raise DivergenceError(f"non-finite transition matrix at step {step}", step=step, t=t_next)
        if step % sample_stride == 0 or step == n_steps:
            norm = float(np.linalg.norm(Phi, 2))
            if norm > DIVERGENCE_THRESHOLD:
                raise DivergenceError(f"transition matrix norm exceeded {DIVERGENCE_THRESHOLD:.0e} "
                                      f"at step {step} (t={t_next:.6g})", step=step, t=t_next)
            times.append(t_next)
            norms.append(norm)
    return TransitionEnvelope(times=np.array(times), norms=np.array(norms), t0=t0)


@dataclass(frozen=True)
class EnvelopeCheck:
    gamma_hat: float
    decay_rate: float
    violations: int
    worst_ratio: float
    passed: bool


def envelope_check(envelope: TransitionEnvelope, decay_rate: float, burn_in: float = 0.1,
                   rtol: float = 1e-9) -> EnvelopeCheck:
    """
    Fit gamma_hat = max ||Phi|| e^(lambda (t - t0)) on the burn-in prefix and
    count later samples above gamma_hat e^(-lambda (t - t0)).
    """
    elapsed = envelope.times - envelope.t0
    scaled = envelope.norms * np.exp(decay_rate * elapsed)
    cut = elapsed <= burn_in * elapsed[-1]
    gamma_hat = float(np.max(scaled[cut]))
    later = scaled[~cut] / gamma_hat
    violations = int(np.count_nonzero(later > 1.0 + rtol))
    worst = float(np.max(later)) if later.size else 0.0
    return EnvelopeCheck(gamma_hat=gamma_hat, decay_rate=decay_rate, violations=violations,
                         worst_ratio=worst, passed=violations == 0)


@dataclass(frozen=True)
class BiboReport:
    q: Optional[float]
    fitted_exponent: float
    bound: float
    passed: bool


def bibo_decay_check(system: TimeVaryingSystem, q: Optional[float], T: float = 500.0, h: float = 0.05,
                     certificate: Optional[StabilityCertificate] = None,
                     slack: float = BIBO_SLACK) -> BiboReport:
    """
    Drive a certified system with ||u(t)|| = (1 + t)^q on the velocity block
    and fit the tail decay exponent of the state norm on [T/10, T].
    q = None runs the unforced system.
    """
    if q is not None:
        if q == -0.5:
            raise ParameterError("forcing exponent q = -1/2 is excluded")
        if q >= 0:
            raise ParameterError(f"forcing exponent must be negative, got {q}")
    if certificate is None:
        certificate = certify_sun(system, t_grid=default_t_grid(0.0, T))
        if certificate is None:
            raise HypothesisViolationError("decay check needs an exponentially stable system; no certificate found")

    n = system.dimension
    direction = np.zeros(2 * n)
    direction[n:] = 1.0 / math.sqrt(n)
    forcing = (lambda t: 0.0) if q is None else (lambda t: (1.0 + t) ** q)

    def rhs(t, y):
        return system.first_order_matrix(t) @ y + forcing(t) * direction

    y = np.zeros(2 * n)
    y[0] = 1.0
    n_steps = int(round(T / h))
    times = np.arange(n_steps + 1) * h
    norms = np.empty(n_steps + 1)
    norms[0] = 1.0
    for step in range(1, n_steps + 1):
        y = rk4_step(rhs, (step - 1) * h, y, h)
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) > DIVERGENCE_THRESHOLD:
            raise DivergenceError(f"forced response diverged at step {step}", step=step, t=step * h)
        norms[step] = np.linalg.norm(y)

    tail = times >= T / 10.0
    try:
        exponent, _ = fit_power_law(times[tail], norms[tail], offset=1.0)
    except ParameterError:
        exponent = -math.inf
    bound = -math.inf if q is None else q + 0.5
    passed = True if q is None else exponent <= bound + slack
    logger.debug(f"bibo decay q={q}: fitted exponent {exponent:.4g}, bound {bound:.4g}")
    return BiboReport(q=q, fitted_exponent=float(exponent), bound=bound, passed=passed)
