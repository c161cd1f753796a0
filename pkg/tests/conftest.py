"""Shared fixtures for the actionlab tests."""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure the package import works when the repository root is not on the path
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from actionlab.dynamics import AgentConfig, DissipationSchedule  # noqa: E402
from actionlab.potentials import QuadraticTracking  # noqa: E402
from actionlab.signals import ConstantSignal, SinusoidBank  # noqa: E402

REPO_ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = REPO_ROOT / "config"


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def scalar_agent():
    """Factory for V = 1/2 (w - x)^2 agents with unit mass."""

    def make(theta=None, signal=None, w0=1.0, wdot0=0.0, schedule=None):
        if schedule is None:
            schedule = DissipationSchedule.constant() if theta is None else DissipationSchedule.exponential(theta)
        return AgentConfig(
            masses=[1.0],
            dissipation=schedule,
            potential=QuadraticTracking([[1.0]]),
            signal=signal if signal is not None else ConstantSignal([0.0]),
            w0=[w0],
            wdot0=[wdot0],
        )

    return make


@pytest.fixture
def tracking_agent():
    """Sinusoid tracking with theta = 1 used by the energy and convergence tests."""
    return AgentConfig(
        masses=[1.0],
        dissipation=DissipationSchedule.exponential(1.0),
        potential=QuadraticTracking([[1.0]]),
        signal=SinusoidBank([[1.0]], [0.25]),
        w0=[0.0],
        wdot0=[0.0],
    )


@pytest.fixture
def write_config(tmp_path):
    """Write a suite config dict to tmp_path and return its path."""

    def write(data, name="suite.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2))
        return str(path)

    return write


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for var in ("ACTIONLAB_OUTPUT_DIR", "ACTIONLAB_LOG_LEVEL", "ACTIONLAB_LOG_DIR", "ACTIONLAB_JOBS"):
        monkeypatch.delenv(var, raising=False)
