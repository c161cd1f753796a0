"""
Energy ledger along learning trajectories.

    Z  dissipated energy      int (psi'/psi) sum_i w_i'^2 dt
    E  environmental energy   int V_x . x' dt
    W  weight work            int V_w . w' dt   (chain-rule cross-check)
    A  environmental variation int |V_x . x'| dt

The balance Z + (U(T) - U(0)) - E vanishes along exact solutions, with
U = V + K the internal energy.
"""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from .error_handling import ParameterError

if TYPE_CHECKING:
    from .dynamics import AgentConfig, AgentState

logger = logging.getLogger(__name__)

COROLLARY_TOLERANCE = 1e-6


def kinetic(state, masses: Sequence[float]) -> float:
    """1/2 sum m_i w_i'^2; accepts an AgentState or a bare velocity vector."""
    wdot = np.asarray(getattr(state, "wdot", state), dtype=float)
    return 0.5 * float(np.asarray(masses, dtype=float) @ (wdot * wdot))


def ledger_integrands(ratio: float, wdot: np.ndarray, grad_w: np.ndarray, grad_x: np.ndarray,
                      xdot: np.ndarray) -> np.ndarray:
    """Instantaneous rates of (Z, E, W, A)."""
    drive = float(grad_x @ xdot)
    return np.array([ratio * float(wdot @ wdot), drive, float(grad_w @ wdot), abs(drive)])


@dataclass
class EnergyLedger:
    U0: float
    V0: float
    K0: float
    V: float
    K: float
    t: float = 0.0
    Z: float = 0.0
    E: float = 0.0
    W: float = 0.0
    A: float = 0.0
    first_order: bool = False
    residual_history: List[float] = field(default_factory=list)

    @classmethod
    def open(cls, state: "AgentState", config: "AgentConfig", first_order: bool = False) -> "EnergyLedger":
        V = config.potential.value(config.signal.position(state.t), state.w)
        K = 0.0 if first_order else kinetic(state, config.masses)
        return cls(U0=V + K, V0=V, K0=K, V=V, K=K, t=state.t, first_order=first_order,
                   residual_history=[0.0])

    @property
    def U(self) -> float:
        return self.V + self.K

    @property
    def delta_U(self) -> float:
        return self.U - self.U0


def _hermite_midpoint(p0, d0, p1, d1, h):
    return 0.5 * (p0 + p1) + h / 8.0 * (d0 - d1)


def _endpoint_integrands(state: "AgentState", config: "AgentConfig") -> np.ndarray:
    x, xdot = config.signal.sample(state.t)
    grad_w, grad_x = config.potential.gradients(x, state.w)
    return ledger_integrands(config.dissipation.ratio(state.t), state.wdot, grad_w, grad_x, xdot)


def accumulate(ledger: EnergyLedger, prev_state: "AgentState", next_state: "AgentState",
               config: "AgentConfig", h: Optional[float] = None,
               stage_integrands: Optional[Sequence[np.ndarray]] = None) -> EnergyLedger:
    """
    Add one step to the ledger. With the four RK4 stage integrands the
    increment uses Simpson weights (1, 2, 2, 1)/6; without them the
    midpoint state is rebuilt by cubic Hermite interpolation and Simpson's
    rule is applied to the endpoint and midpoint integrands.
    """
    h = next_state.t - prev_state.t if h is None else h
    if stage_integrands is not None:
        q1, q2, q3, q4 = stage_integrands
        increment = h / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
    else:
        from .dynamics import AgentState, acceleration

        acc0 = acceleration(prev_state, config)
        acc1 = acceleration(next_state, config)
        mid = AgentState(
            prev_state.t + h / 2,
            _hermite_midpoint(prev_state.w, prev_state.wdot, next_state.w, next_state.wdot, h),
            _hermite_midpoint(prev_state.wdot, acc0, next_state.wdot, acc1, h),
        )
        increment = h / 6.0 * (_endpoint_integrands(prev_state, config)
                               + 4.0 * _endpoint_integrands(mid, config)
                               + _endpoint_integrands(next_state, config))

    ledger.Z += float(increment[0])
    ledger.E += float(increment[1])
    ledger.W += float(increment[2])
    ledger.A += float(increment[3])
    ledger.t = next_state.t
    ledger.V = config.potential.value(config.signal.position(next_state.t), next_state.w)
    ledger.K = 0.0 if ledger.first_order else kinetic(next_state, config.masses)
    ledger.residual_history.append(balance_residual(ledger))
    return ledger


def balance_residual(ledger: EnergyLedger) -> float:
    """Z(T) + (U(T) - U(0)) - E(T)."""
    return ledger.Z + ledger.delta_U - ledger.E


def chain_rule_residual(ledger: EnergyLedger) -> float:
    """E - (V(T) - V(0) - int V_w . w'); zero when V(t, w(t)) is differentiated consistently."""
    return ledger.E - (ledger.V - ledger.V0 - ledger.W)


def residual_tolerance(ledger: EnergyLedger, rtol: float = 1e-6) -> float:
    return rtol * (1.0 + abs(ledger.E) + abs(ledger.delta_U))


@dataclass(frozen=True)
class CorollaryCheck:
    delta_U: float
    E: float
    passed: bool
    rest_to_rest: bool
    delta_V: float


def check_corollary(ledger: EnergyLedger, tolerance: float = COROLLARY_TOLERANCE,
                    rest_tolerance: float = 1e-12) -> CorollaryCheck:
    """Internal energy growth bounded by the environmental energy: dU <= E."""
    rest = ledger.K0 <= rest_tolerance and ledger.K <= rest_tolerance
    return CorollaryCheck(
        delta_U=ledger.delta_U,
        E=ledger.E,
        passed=ledger.delta_U <= ledger.E + tolerance * (1.0 + abs(ledger.E)),
        rest_to_rest=rest,
        delta_V=ledger.V - ledger.V0,
    )


@dataclass(frozen=True)
class PerfectLearningProbe:
    max_dVdt: float
    E: float
    delta_V: float
    samples: int


def perfect_learning_probe(config: "AgentConfig", w_bar: Sequence[float], T: float,
                           samples: int = 2001) -> PerfectLearningProbe:
    """
    Freeze the weights at w_bar and integrate dV/dt = V_x(x(t), w_bar) . x'(t)
    over [0, T]. E should equal V(T, w_bar) - V(0, w_bar).
    """
    if not T > 0:
        raise ParameterError(f"probe horizon must be positive, got {T}")
    if samples < 3:
        raise ParameterError("probe needs at least 3 samples")
    w_bar = np.asarray(w_bar, dtype=float)
    times = np.linspace(0.0, T, samples)
    rates = np.empty(samples)
    for i, t in enumerate(times):
        x, xdot = config.signal.sample(t)
        rates[i] = float(config.potential.grad_x(x, w_bar) @ xdot)
    E = float(simpson(rates, x=times))
    delta_V = (config.potential.value(config.signal.position(T), w_bar)
               - config.potential.value(config.signal.position(0.0), w_bar))
    logger.debug(f"perfect-learning probe over [0, {T}]: E={E:.6g}, dV={delta_V:.6g}")
    return PerfectLearningProbe(max_dVdt=float(np.max(np.abs(rates))), E=E, delta_V=float(delta_V),
                                samples=samples)
