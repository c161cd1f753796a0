"""
Builds runtime objects (signals, potentials, agents, systems) from
validated scenario blocks.
"""

import logging
from typing import Callable, Optional

import numpy as np

from .config import PotentialConfig, ScenarioConfig, SignalConfig, SystemConfig
from .dynamics import AgentConfig, DissipationKind, DissipationSchedule
from .error_handling import ParameterError
from .potentials import (AffineTarget, FeatureMap, LinearRegression, PotentialModel, QuadraticTracking,
                         TwoLayerTanh)
from .signals import (AffineAdvance, ConstantSignal, EnvironmentSignal, QuasiPeriodSpec, SinusoidBank,
                      TabulatedSignal, make_quasi_periodic)
from .stability import ConstantMatrix, TimeVaryingSystem, load_system_csv

logger = logging.getLogger(__name__)

Resolver = Callable[[str], str]


def build_signal(cfg: SignalConfig, resolve: Resolver = lambda p: p) -> EnvironmentSignal:
    if cfg.kind == "constant":
        return ConstantSignal(cfg.value)
    if cfg.kind == "sinusoid-bank":
        return SinusoidBank(cfg.amplitudes, cfg.frequencies, phases=cfg.phases, offset=cfg.offset,
                            period=cfg.period)
    if cfg.kind == "periodic-plus-decay":
        base = build_signal(cfg.base, resolve)
        return make_quasi_periodic(base, cfg.period, cfg.epsilon, cfg.alpha, cfg.order, cfg.direction)
    if cfg.kind == "tabulated":
        return TabulatedSignal.from_csv(resolve(cfg.path), repeat=cfg.repeat)
    raise ParameterError(f"unknown signal kind '{cfg.kind}'")


def build_potential(cfg: PotentialConfig, input_dim: int, seed: int = 0) -> PotentialModel:
    if cfg.kind == "quadratic-tracking":
        return QuadraticTracking(cfg.matrix)
    target = AffineTarget(cfg.target.coef, cfg.target.bias)
    if cfg.kind == "linear-regression":
        features = FeatureMap(cfg.features, input_dim, n_features=cfg.n_features, scale=cfg.scale, seed=seed)
        return LinearRegression(features, target)
    if cfg.kind == "two-layer-tanh":
        return TwoLayerTanh(input_dim, cfg.hidden, target)
    raise ParameterError(f"unknown potential kind '{cfg.kind}'")


def build_dissipation(cfg) -> DissipationSchedule:
    kind = DissipationKind(cfg.kind)
    return DissipationSchedule(kind, theta=cfg.theta, alpha=cfg.alpha, k=cfg.k)


def build_agent(scenario: ScenarioConfig, seed: int, resolve: Resolver = lambda p: p) -> AgentConfig:
    """Agent for a dynamics scenario; missing initial weights are drawn from the seed."""
    rng = np.random.default_rng(seed)
    signal = build_signal(scenario.signal, resolve)
    potential = build_potential(scenario.potential, signal.dimension, seed)
    m = potential.weight_dim
    state = scenario.initial_state
    w0 = np.asarray(state.w, dtype=float) if state.w is not None else rng.normal(0.0, state.random_scale, m)
    wdot0 = np.asarray(state.wdot, dtype=float) if state.wdot is not None else np.zeros(m)
    masses = np.asarray(scenario.masses, dtype=float) if scenario.masses is not None else np.ones(m)
    return AgentConfig(masses=masses, dissipation=build_dissipation(scenario.dissipation),
                       potential=potential, signal=signal, w0=w0, wdot0=wdot0)


def build_quasi_period(scenario: ScenarioConfig) -> Optional[QuasiPeriodSpec]:
    """Explicit quasi_period block, else the parameters of a periodic-plus-decay signal."""
    qp = scenario.quasi_period
    if qp is not None:
        return QuasiPeriodSpec(qp.epsilon, qp.alpha, qp.order_value, AffineAdvance(qp.tau0))
    signal = scenario.signal
    if signal is not None and signal.kind == "periodic-plus-decay":
        return QuasiPeriodSpec(signal.epsilon, signal.alpha, float(signal.order), AffineAdvance(signal.period))
    return None


def build_system(cfg: SystemConfig, resolve: Resolver = lambda p: p) -> TimeVaryingSystem:
    if cfg.path is not None:
        system = load_system_csv(resolve(cfg.path))
        if cfg.method == "homogeneous":
            n = system.dimension
            return TimeVaryingSystem(ConstantMatrix(0.5 * cfg.theta * np.identity(n)), system.B)
        return system
    if cfg.method == "homogeneous":
        B = np.atleast_2d(np.asarray(cfg.B, dtype=float))
        return TimeVaryingSystem.constant(0.5 * cfg.theta * np.identity(B.shape[0]), B)
    return TimeVaryingSystem.constant(cfg.A, cfg.B)


def time_grid(cfg: SystemConfig) -> np.ndarray:
    return np.linspace(cfg.t0, cfg.T, cfg.grid_size)
