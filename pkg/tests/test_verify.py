"""Tests for the trajectory-level checks."""

import numpy as np
import pytest

from actionlab.dynamics import AgentConfig, DissipationSchedule, simulate
from actionlab.error_handling import ParameterError
from actionlab.potentials import QuadraticTracking
from actionlab.signals import (EXACT_PERIODICITY, AffineAdvance, ConstantSignal, QuasiPeriodSpec, SinusoidBank,
                               make_quasi_periodic)
from actionlab.verify import (TheoremReport, Verdict, convergence_check, corollary_report, deviation_series,
                              energy_balance_report, environmental_energy_boundedness, pseudo_period_deviation,
                              stability_certificate_report, variation_system)


def _tracking_config(signal, theta=3.0):
    dim = signal.dimension
    return AgentConfig(masses=np.ones(dim), dissipation=DissipationSchedule.exponential(theta),
                       potential=QuadraticTracking(np.identity(dim)), signal=signal,
                       w0=np.zeros(dim), wdot0=np.zeros(dim))


def _quasi_periodic(order, period=1.0, base=None):
    base = base if base is not None else ConstantSignal([1.0, -0.5])
    signal = make_quasi_periodic(base, period=period, epsilon=2.0, alpha=1.0, order=order)
    return signal, QuasiPeriodSpec(2.0, 1.0, order, AffineAdvance(period))


@pytest.fixture(scope="module")
def quasi_periodic_run():
    signal, spec = _quasi_periodic(2.0)
    config = _tracking_config(signal)
    return config, spec, simulate(config, T=1000.0, h=0.01, sample_stride=100)


def test_quasi_periodic_run_passes_every_check(quasi_periodic_run):
    config, spec, trajectory = quasi_periodic_run
    reports = [
        energy_balance_report(trajectory, "qp"),
        corollary_report(trajectory, "qp"),
        pseudo_period_deviation(trajectory, spec, "qp"),
        environmental_energy_boundedness(trajectory, spec, "qp", horizon=400.0),
        convergence_check(trajectory, scenario="qp"),
        stability_certificate_report(trajectory, config, "qp"),
    ]
    for report in reports:
        assert report.verdict == Verdict.PASS, (report.theorem, report.message)


def test_weight_variation_decays_faster_than_the_bound(quasi_periodic_run):
    _, spec, trajectory = quasi_periodic_run
    report = pseudo_period_deviation(trajectory, spec)
    assert report.measured["bound_exponent"] == pytest.approx(-1.5)
    assert report.measured["fitted_exponent"] == pytest.approx(-3.0, abs=0.2)
    assert report.measured["bounded"]
    assert report.anchor == "theorem:pseudo-period-bound"


def test_fitted_exponents_follow_the_order():
    exponents = []
    for order in (1.0, 2.0, 3.0):
        signal, spec = _quasi_periodic(order)
        trajectory = simulate(_tracking_config(signal), T=500.0, h=0.05, sample_stride=20)
        report = pseudo_period_deviation(trajectory, spec)
        assert report.passed, report.message
        exponents.append(report.measured["fitted_exponent"])
    assert exponents[0] > exponents[1] > exponents[2]


def test_deviation_series_interpolates_between_samples():
    signal, _ = _quasi_periodic(2.0, period=1.5)
    config = _tracking_config(signal)
    h = 0.01
    sparse = simulate(config, T=50.0, h=h, sample_stride=7)
    dense = simulate(config, T=50.0, h=h)
    times, devs = deviation_series(sparse, AffineAdvance(1.5))
    assert times[-1] <= 48.5 + 1e-9
    index = np.rint(times / h).astype(int)
    expected = np.linalg.norm(dense.w[index] - dense.w[index + 150], axis=1)
    late = times >= 10.0
    np.testing.assert_allclose(devs[late], expected[late], atol=1e-8)


def test_exact_periodicity_checks_entrainment():
    config = _tracking_config(SinusoidBank([[1.0]], [1.0]))
    trajectory = simulate(config, T=100.0, h=0.01, sample_stride=10)
    spec = QuasiPeriodSpec(1.0, 1.0, EXACT_PERIODICITY, AffineAdvance(1.0))
    report = pseudo_period_deviation(trajectory, spec, "entrainment")
    assert report.passed, report.message
    assert report.measured["max_tail_deviation"] <= 1e-8


def test_half_order_is_excluded(quasi_periodic_run):
    _, _, trajectory = quasi_periodic_run
    with pytest.raises(ParameterError):
        pseudo_period_deviation(trajectory, QuasiPeriodSpec(2.0, 1.0, 0.5, AffineAdvance(1.0)))
    with pytest.raises(ParameterError):
        pseudo_period_deviation(trajectory, QuasiPeriodSpec(2.0, 1.0, 0.0, AffineAdvance(1.0)))


def test_short_horizon_is_rejected():
    signal, spec = _quasi_periodic(2.0)
    trajectory = simulate(_tracking_config(signal), T=3.0, h=0.01, sample_stride=50)
    with pytest.raises(ParameterError):
        pseudo_period_deviation(trajectory, spec)


def test_generalization_needs_order_above_three_halves(quasi_periodic_run):
    _, _, trajectory = quasi_periodic_run
    report = environmental_energy_boundedness(trajectory, QuasiPeriodSpec(2.0, 1.0, 1.0, AffineAdvance(1.0)))
    assert report.verdict == Verdict.NOT_APPLICABLE
    assert not report.passed and not report.failed


def test_generalization_rejects_horizon_beyond_trajectory(quasi_periodic_run):
    _, spec, trajectory = quasi_periodic_run
    with pytest.raises(ParameterError):
        environmental_energy_boundedness(trajectory, spec, horizon=5000.0)


def test_constant_environment_has_zero_environmental_energy(scalar_agent):
    trajectory = simulate(scalar_agent(theta=2.0, signal=ConstantSignal([0.3])), T=20.0, h=0.01, sample_stride=10)
    spec = QuasiPeriodSpec(1.0, 1.0, 2.0, AffineAdvance(1.0))
    report = environmental_energy_boundedness(trajectory, spec)
    assert report.measured["C_E_hat"] == 0.0
    assert report.passed


def test_periodic_drive_keeps_supplying_energy():
    signal, spec = _quasi_periodic(2.0, base=SinusoidBank([[1.0]], [1.0]))
    trajectory = simulate(_tracking_config(signal), T=40.0, h=0.01, sample_stride=10)
    report = environmental_energy_boundedness(trajectory, spec)
    assert report.failed
    assert report.measured["increment"] > 0.3 * report.measured["C_E_hat"]


def test_undamped_oscillator_does_not_converge(scalar_agent):
    trajectory = simulate(scalar_agent(), T=20.0, h=0.01, sample_stride=10)
    report = convergence_check(trajectory)
    assert report.failed
    assert report.measured["tail_spread"] > 0.1


def test_damped_agent_converges_to_constant_target(scalar_agent):
    trajectory = simulate(scalar_agent(theta=2.0, signal=ConstantSignal([0.3])), T=60.0, h=0.01, sample_stride=10)
    report = convergence_check(trajectory, minimizer=[0.3])
    assert report.passed, report.message
    assert report.measured["minimizer_error"] <= 1e-6
    assert not convergence_check(trajectory, minimizer=[0.4]).passed


def test_convergence_validates_tail_fraction(scalar_agent):
    trajectory = simulate(scalar_agent(theta=2.0), T=1.0, h=0.01)
    with pytest.raises(ParameterError):
        convergence_check(trajectory, tail_fraction=0.0)


def test_variation_system_along_tracking_run(quasi_periodic_run):
    config, _, trajectory = quasi_periodic_run
    system = variation_system(trajectory, config)
    t = float(trajectory.times[3])
    np.testing.assert_allclose(system.A(t), 1.5 * np.identity(2))
    np.testing.assert_allclose(system.B(t), np.identity(2))


def test_stability_report_uses_measure_certificate_for_power_damping():
    config = AgentConfig(masses=[1.0], dissipation=DissipationSchedule.power(1.0, 2.0),
                         potential=QuadraticTracking([[1.0]]), signal=ConstantSignal([0.0]),
                         w0=[1.0], wdot0=[0.0])
    trajectory = simulate(config, T=10.0, h=0.01, sample_stride=10)
    report = stability_certificate_report(trajectory, config, "power")
    assert report.anchor == "lemma:exp-stability"
    assert report.failed
    assert report.message == "no certificate"


def test_energy_balance_report_fields(tracking_agent):
    trajectory = simulate(tracking_agent, T=5.0, h=1e-3, sample_stride=100)
    report = energy_balance_report(trajectory, "tracking")
    assert report.passed
    assert report.scenario == "tracking"
    assert report.parameters["h"] == 1e-3
    assert abs(report.measured["residual"]) <= report.measured["tolerance"]
    assert report.anchor == "theorem:energy-invariant"


def test_judged_report():
    assert TheoremReport.judged("convergence", "s", True).verdict == Verdict.PASS
    report = TheoremReport.judged("custom", "s", False)
    assert report.failed
    assert report.anchor == "custom"
    assert report.message == ""
