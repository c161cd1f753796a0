"""
Second-order learning dynamics

    m_i w_i'' + (psi'/psi)(t) w_i' + V_{w_i}(x(t), w) = 0

integrated with fixed-step classical Runge-Kutta. The energy integrands
are carried through the same four stages so the ledger quadrature has
the integrator's order.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
import psutil

from . import energy
from .error_handling import DivergenceError, ParameterError, ShapeError
from .potentials import PotentialModel
from .signals import EnvironmentSignal

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e12
MEMORY_FRACTION = 0.5


class DissipationKind(Enum):
    EXPONENTIAL = "exponential"
    POWER = "power"
    CONSTANT = "constant"


@dataclass(frozen=True)
class DissipationSchedule:
    """
    Developmental function psi. Only psi'/psi and log(psi) are ever
    evaluated so e^(theta t) never overflows.
    """
    kind: DissipationKind = DissipationKind.CONSTANT
    theta: float = 0.0
    alpha: float = 1.0
    k: float = 0.0

    def __post_init__(self):
        if self.kind == DissipationKind.EXPONENTIAL and not self.theta >= 0:
            raise ParameterError(f"exponential dissipation needs theta >= 0, got {self.theta}")
        if self.kind == DissipationKind.POWER:
            if not self.alpha > 0:
                raise ParameterError(f"power dissipation needs alpha > 0, got {self.alpha}")
            if not self.k >= 0:
                raise ParameterError(f"power dissipation needs k >= 0, got {self.k}")

    @classmethod
    def exponential(cls, theta: float) -> "DissipationSchedule":
        return cls(DissipationKind.EXPONENTIAL, theta=theta)

    @classmethod
    def power(cls, alpha: float, k: float) -> "DissipationSchedule":
        return cls(DissipationKind.POWER, alpha=alpha, k=k)

    @classmethod
    def constant(cls) -> "DissipationSchedule":
        return cls(DissipationKind.CONSTANT)

    def ratio(self, t: float) -> float:
        if self.kind == DissipationKind.EXPONENTIAL:
            return self.theta
        if self.kind == DissipationKind.POWER:
            return self.k / (self.alpha + t)
        return 0.0

    def log_value(self, t: float) -> float:
        if self.kind == DissipationKind.EXPONENTIAL:
            return self.theta * t
        if self.kind == DissipationKind.POWER:
            return self.k * math.log(self.alpha + t)
        return 0.0

    def value(self, t: float) -> float:
        try:
            return math.exp(self.log_value(t))
        except OverflowError:
            return math.inf


@dataclass
class AgentConfig:
    masses: np.ndarray
    dissipation: DissipationSchedule
    potential: PotentialModel
    signal: EnvironmentSignal
    w0: np.ndarray
    wdot0: np.ndarray

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        self.w0 = np.asarray(self.w0, dtype=float)
        self.wdot0 = np.asarray(self.wdot0, dtype=float)
        m = self.potential.weight_dim
        if self.masses.shape != (m,):
            raise ShapeError(f"{self.masses.size} masses given for {m} weights")
        if not np.all(self.masses > 0):
            raise ParameterError("all masses must be strictly positive")
        if self.w0.shape != (m,) or self.wdot0.shape != (m,):
            raise ShapeError(f"initial state must have {m} weights and {m} velocities")
        if self.signal.dimension != self.potential.input_dim:
            raise ShapeError(f"signal dimension {self.signal.dimension} does not match "
                             f"potential input dimension {self.potential.input_dim}")

    @property
    def weight_dim(self) -> int:
        return self.potential.weight_dim

    def initial_state(self) -> "AgentState":
        return AgentState(0.0, self.w0.copy(), self.wdot0.copy())


@dataclass
class AgentState:
    t: float
    w: np.ndarray
    wdot: np.ndarray


@dataclass
class TrajectoryRecord:
    """Uniformly sampled trajectory with cumulative ledger columns."""
    times: np.ndarray
    w: np.ndarray
    wdot: np.ndarray
    V: np.ndarray
    K: np.ndarray
    Z: np.ndarray
    E: np.ndarray
    W: np.ndarray
    A: np.ndarray
    h: float
    sample_stride: int
    steps: int
    method: str = "rk4"
    ledger: Optional[energy.EnergyLedger] = None
    metadata: dict = field(default_factory=dict)

    @property
    def U(self) -> np.ndarray:
        return self.V + self.K

    @property
    def residual(self) -> np.ndarray:
        return self.Z + (self.U - self.U[0]) - self.E

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def __len__(self):
        return self.times.size


def acceleration(state: AgentState, config: AgentConfig) -> np.ndarray:
    x = config.signal.position(state.t)
    grad_w = config.potential.grad_w(x, state.w)
    if not np.all(np.isfinite(grad_w)):
        raise DivergenceError(f"non-finite loss gradient at t={state.t}", t=state.t)
    return -(config.dissipation.ratio(state.t) * state.wdot + grad_w) / config.masses


def _second_order_rhs(config: AgentConfig) -> Callable[[float, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """Right-hand side on y = [w, wdot] returning (y', ledger integrands)."""
    m = config.weight_dim
    masses = config.masses
    potential = config.potential
    signal = config.signal
    schedule = config.dissipation

    def rhs(t, y):
        w, v = y[:m], y[m:]
        x, xdot = signal.sample(t)
        grad_w, grad_x = potential.gradients(x, w)
        ratio = schedule.ratio(t)
        acc = -(ratio * v + grad_w) / masses
        return np.concatenate([v, acc]), energy.ledger_integrands(ratio, v, grad_w, grad_x, xdot)

    return rhs


def _gradient_flow_rhs(config: AgentConfig, theta: float):
    m = config.weight_dim
    potential = config.potential
    signal = config.signal

    def rhs(t, y):
        x, xdot = signal.sample(t)
        grad_w, grad_x = potential.gradients(x, y[:m])
        v = -grad_w / theta
        return v, energy.ledger_integrands(theta, v, grad_w, grad_x, xdot)

    return rhs


def _rk4_with_integrands(rhs, t: float, y: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    k1, q1 = rhs(t, y)
    k2, q2 = rhs(t + h / 2, y + h / 2 * k1)
    k3, q3 = rhs(t + h / 2, y + h / 2 * k2)
    k4, q4 = rhs(t + h, y + h * k3)
    y_next = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y_next, (q1, q2, q3, q4)


def _check_state(y: np.ndarray, m: int, step: int, t: float) -> None:
    if not np.all(np.isfinite(y)):
        raise DivergenceError(f"non-finite state at step {step} (t={t:.6g})", step=step, t=t)
    if np.linalg.norm(y[:m]) > DIVERGENCE_THRESHOLD:
        raise DivergenceError(f"weights exceeded {DIVERGENCE_THRESHOLD:.0e} at step {step} (t={t:.6g})",
                              step=step, t=t)


def step_rk4(state: AgentState, config: AgentConfig, h: float) -> AgentState:
    if not h > 0:
        raise ParameterError(f"step size must be positive, got {h}")
    m = config.weight_dim
    y = np.concatenate([state.w, state.wdot])
    y_next, _ = _rk4_with_integrands(_second_order_rhs(config), state.t, y, h)
    t_next = state.t + h
    _check_state(y_next, m, 1, t_next)
    return AgentState(t_next, y_next[:m], y_next[m:])


def plan_steps(T: float, h: float, sample_stride: int) -> Tuple[int, np.ndarray]:
    """Number of steps and the sampled step indices (the final step is always kept)."""
    if not T > 0:
        raise ParameterError(f"horizon T must be positive, got {T}")
    if not h > 0:
        raise ParameterError(f"step size h must be positive, got {h}")
    if sample_stride < 1:
        raise ParameterError(f"sample_stride must be at least 1, got {sample_stride}")
    n_steps = int(round(T / h))
    if n_steps < 1:
        raise ParameterError(f"horizon T={T} is shorter than one step h={h}")
    if abs(n_steps * h - T) > 1e-9 * max(1.0, T):
        logger.warning(f"T={T} is not a multiple of h={h}; integrating to {n_steps * h}")
    sampled = np.arange(0, n_steps + 1, sample_stride)
    if sampled[-1] != n_steps:
        sampled = np.append(sampled, n_steps)
    return n_steps, sampled


def check_memory_budget(n_samples: int, width: int) -> None:
    """Refuse runs whose sample storage would take more than half of the available memory."""
    needed = n_samples * width * 8
    available = psutil.virtual_memory().available
    if needed > MEMORY_FRACTION * available:
        raise ParameterError(f"trajectory storage needs {needed / 2**20:.1f} MiB, "
                             f"only {available / 2**20:.1f} MiB available; increase sample_stride or h")


def _integrate(config: AgentConfig, rhs, y0: np.ndarray, T: float, h: float, sample_stride: int,
               first_order: bool, velocity: Callable[[float, np.ndarray], np.ndarray],
               method: str) -> TrajectoryRecord:
    m = config.weight_dim
    n_steps, sampled = plan_steps(T, h, sample_stride)
    check_memory_budget(sampled.size, 2 * m + 7)

    n = sampled.size
    times = sampled * h
    W_s = np.zeros((n, m))
    Wdot_s = np.zeros((n, m))
    cols = {name: np.zeros(n) for name in ("V", "K", "Z", "E", "W", "A")}

    y = y0.copy()
    state = AgentState(0.0, y[:m].copy(), velocity(0.0, y))
    ledger = energy.EnergyLedger.open(state, config, first_order=first_order)
    logger.debug(f"{method}: {n_steps} steps of h={h}, {n} samples")

    def record(i, st):
        W_s[i] = st.w
        Wdot_s[i] = st.wdot
        cols["V"][i] = ledger.V
        cols["K"][i] = ledger.K
        cols["Z"][i] = ledger.Z
        cols["E"][i] = ledger.E
        cols["W"][i] = ledger.W
        cols["A"][i] = ledger.A

    record(0, state)
    next_sample = 1
    for step in range(1, n_steps + 1):
        t = (step - 1) * h
        y, stages = _rk4_with_integrands(rhs, t, y, h)
        t_next = step * h
        _check_state(y, m, step, t_next)
        next_state = AgentState(t_next, y[:m].copy(), velocity(t_next, y))
        energy.accumulate(ledger, state, next_state, config, h, stage_integrands=stages)
        state = next_state
        if next_sample < n and sampled[next_sample] == step:
            record(next_sample, state)
            next_sample += 1

    return TrajectoryRecord(times=times, w=W_s, wdot=Wdot_s, h=h, sample_stride=sample_stride,
                            steps=n_steps, method=method, ledger=ledger, **cols)


def simulate(config: AgentConfig, T: float, h: float, sample_stride: int = 1) -> TrajectoryRecord:
    """Fixed-step RK4 trajectory with the energy ledger accumulated every step."""
    m = config.weight_dim
    y0 = np.concatenate([config.w0, config.wdot0])
    return _integrate(config, _second_order_rhs(config), y0, T, h, sample_stride,
                      first_order=False, velocity=lambda t, y: y[m:].copy(), method="rk4")


def gradient_flow_reference(config: AgentConfig, T: float, h: float,
                            sample_stride: int = 1) -> TrajectoryRecord:
    """
    First-order comparison flow w' = -V_w / theta, the large-theta limit of
    the second-order dynamics. Its ledger has K = 0 and Z = int theta ||w'||^2.
    """
    schedule = config.dissipation
    if schedule.kind != DissipationKind.EXPONENTIAL or not schedule.theta > 0:
        raise ParameterError("gradient flow reference needs exponential dissipation with theta > 0")
    theta = schedule.theta
    m = config.weight_dim
    potential = config.potential
    signal = config.signal

    def velocity(t, y):
        return -potential.grad_w(signal.position(t), y[:m]) / theta

    return _integrate(config, _gradient_flow_rhs(config, theta), config.w0.copy(), T, h, sample_stride,
                      first_order=True, velocity=velocity, method="rk4-gradient-flow")


def max_deviation(first: TrajectoryRecord, second: TrajectoryRecord, t_min: float = 0.0) -> float:
    """sup over shared sample times >= t_min of ||w_first - w_second||."""
    if first.times.shape != second.times.shape or not np.array_equal(first.times, second.times):
        raise ShapeError("trajectories must share sample times")
    keep = first.times >= t_min
    return float(np.max(np.linalg.norm(first.w[keep] - second.w[keep], axis=1)))