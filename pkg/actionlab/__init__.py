"""
Cognitive Action Laboratory
Second-order learning dynamics, their energy balance, quasi-periodic
environments and stability certificates.
"""

__version__ = "1.0.0"

from .dynamics import AgentConfig, AgentState, DissipationSchedule, TrajectoryRecord, simulate
from .energy import EnergyLedger, balance_residual
from .potentials import LinearRegression, QuadraticTracking, TwoLayerTanh
from .signals import ConstantSignal, QuasiPeriodSpec, SinusoidBank, make_quasi_periodic
from .stability import TimeVaryingSystem, certify_homogeneous, certify_sun, matrix_measure
from .utils import load_environment

__all__ = [
    'AgentConfig',
    'AgentState',
    'DissipationSchedule',
    'TrajectoryRecord',
    'simulate',
    'EnergyLedger',
    'balance_residual',
    'LinearRegression',
    'QuadraticTracking',
    'TwoLayerTanh',
    'ConstantSignal',
    'QuasiPeriodSpec',
    'SinusoidBank',
    'make_quasi_periodic',
    'TimeVaryingSystem',
    'certify_homogeneous',
    'certify_sun',
    'matrix_measure',
    'load_environment',
]
