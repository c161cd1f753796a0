"""Tests for matrix measures, stability certificates and the simulation oracles."""

import math

import numpy as np
import pytest

from actionlab.error_handling import DivergenceError, DomainError, HypothesisViolationError, ParameterError
from actionlab.stability import (ClosedFormMatrix, ConstantMatrix, GridMatrix, TimeVaryingSystem,
                                 analyze_homogeneous, bibo_decay_check, certify_homogeneous, certify_sun,
                                 envelope_check, load_system_csv, matrix_measure, matrix_measure_limit,
                                 simulate_transition, sun_margin)

from conftest import CONFIG_DIR


@pytest.mark.parametrize("P, expected", [
    (np.identity(2), 1.0),
    (np.diag([-1.0, -3.0]), -1.0),
    (np.array([[0.0, 1.0], [-1.0, 0.0]]), 0.0),
])
def test_two_norm_measure_examples(P, expected):
    assert matrix_measure(P, 2) == pytest.approx(expected, abs=1e-14)


def test_one_and_inf_measures_in_closed_form():
    P = np.array([[-3.0, 1.0], [2.0, -1.0]])
    assert matrix_measure(P, 1) == pytest.approx(max(-3.0 + 2.0, -1.0 + 1.0))
    assert matrix_measure(P, "inf") == pytest.approx(max(-3.0 + 1.0, -1.0 + 2.0))
    assert matrix_measure(P, math.inf) == matrix_measure(P, "inf")


@pytest.mark.parametrize("norm", [1, 2, "inf"])
def test_closed_forms_match_the_limit_definition(norm):
    rng = np.random.default_rng(4)
    for _ in range(100):
        P = rng.normal(size=(4, 4))
        assert matrix_measure(P, norm) == pytest.approx(matrix_measure_limit(P, norm, h=1e-7), abs=1e-5)


def test_measure_rejects_unsupported_norm():
    with pytest.raises(ParameterError):
        matrix_measure(np.identity(2), 3)
    with pytest.raises(ParameterError):
        matrix_measure(np.array([[np.nan]]), 2)


def test_scalar_certificate_worked_by_hand():
    system = TimeVaryingSystem.constant([[1.5]], [[1.0]])
    l, c, margin, rate = sun_margin(system, 1.2, [0.0])
    assert l == 0.0
    assert c == pytest.approx(1.16)
    assert margin == pytest.approx(math.sqrt(4.64) - 2.4)
    certificate = certify_sun(system, m_grid=[1.2])
    assert certificate is not None
    assert certificate.m == 1.2
    assert certificate.decay_rate == pytest.approx(1.2 - math.sqrt(1.16))
    assert certificate.decay_rate == pytest.approx(0.123, abs=1e-3)


def test_unstable_system_has_no_certificate():
    system = TimeVaryingSystem.constant([[0.0]], [[-1.0]])
    assert certify_sun(system) is None
    assert certify_sun(system, m_grid=np.geomspace(1e-3, 1e3, 400)) is None


def test_certificate_search_validates_grids():
    system = TimeVaryingSystem.constant([[1.5]], [[1.0]])
    with pytest.raises(ParameterError):
        certify_sun(system, m_grid=[])
    with pytest.raises(ParameterError):
        certify_sun(system, m_grid=[1.0], t_grid=[])
    with pytest.raises(ParameterError):
        certify_sun(system, m_grid=[-1.0])
    varying = TimeVaryingSystem(ClosedFormMatrix(lambda t: [[1.5 + 0.1 * math.sin(t)]], 1), ConstantMatrix([[1.0]]))
    with pytest.raises(ParameterError):
        certify_sun(varying)


def test_homogeneous_certificate_worked_by_hand():
    analysis = analyze_homogeneous(3.0, ConstantMatrix(np.identity(2)), [0.0])
    assert analysis.lambda_min == pytest.approx(1.0)
    assert analysis.chi == 1.0
    assert analysis.first_condition
    assert analysis.second_condition_literal and analysis.second_condition_simplified
    lo, hi = analysis.window
    assert lo == pytest.approx(0.5)
    assert hi == pytest.approx(1.5)
    certificate = analysis.certificate
    assert certificate is not None
    assert lo < certificate.m < hi
    assert math.sqrt(certificate.c) < certificate.m


def test_homogeneous_second_condition_fails_at_theta_two():
    analysis = analyze_homogeneous(2.0, ConstantMatrix(np.identity(1)), [0.0])
    assert analysis.first_condition
    assert not analysis.second_condition_literal
    assert analysis.certificate is None


def test_negative_spectrum_is_a_hypothesis_violation():
    with pytest.raises(HypothesisViolationError):
        certify_homogeneous(2.0, ConstantMatrix([[-1.0]]), [0.0])


def test_complex_spectrum_is_a_hypothesis_violation():
    with pytest.raises(HypothesisViolationError):
        certify_homogeneous(4.0, ConstantMatrix([[1.0, -2.0], [2.0, 1.0]]), [0.0])


def _rotated(rng, eigenvalues):
    n = len(eigenvalues)
    Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
    B = Q @ np.diag(eigenvalues) @ Q.T
    return 0.5 * (B + B.T)


def _assert_envelope_holds(system, certificate):
    horizon = 50.0 / certificate.decay_rate
    transition = simulate_transition(system, 0.0, horizon, 0.05, sample_stride=4)
    check = envelope_check(transition, certificate.decay_rate, burn_in=0.1)
    assert check.passed, (system.A(0.0), system.B(0.0), certificate, check)


def test_measure_certificates_are_sound_on_seeded_systems():
    rng = np.random.default_rng(17)
    for _ in range(12):
        n = int(rng.integers(1, 4))
        B = _rotated(rng, rng.uniform(0.5, 1.5, size=n))
        a = rng.uniform(1.5, 2.5)
        system = TimeVaryingSystem.constant(a * np.identity(n), B)
        eigenvalues = np.linalg.eigvalsh(B)
        # upper root of m^2 - 2am + mid(B) = 0 leaves c = spread(B) / 2
        m = a + math.sqrt(a * a - 0.5 * (eigenvalues[0] + eigenvalues[-1]))
        certificate = certify_sun(system, m_grid=[m])
        assert certificate is not None
        assert certificate.decay_rate == pytest.approx(a - math.sqrt(a * a - eigenvalues[0]), rel=1e-9)
        _assert_envelope_holds(system, certificate)


@pytest.mark.parametrize("theta, eigenvalues, grid_size", [
    (3.0, [1.0], 4),
    (3.0, [0.8, 1.0, 1.2], 9),
    (3.5, [0.8, 1.1, 1.4], 20),
    (3.2, [1.0, 1.1], 7),
    (3.6, [0.9, 1.3], 17),
    (3.8, [1.2, 1.4, 1.6], 11),
    (2.9, [0.7], 11),
    (4.0, [1.5, 1.8], 8),
])
def test_homogeneous_certificates_are_sound_on_seeded_systems(theta, eigenvalues, grid_size):
    rng = np.random.default_rng(int(10 * theta) + len(eigenvalues))
    B = _rotated(rng, eigenvalues)
    certificate = certify_homogeneous(theta, ConstantMatrix(B), [0.0], m_grid_size=grid_size)
    assert certificate is not None
    assert certificate.decay_rate > 0.05
    _assert_envelope_holds(TimeVaryingSystem.constant(theta * np.identity(len(eigenvalues)), B), certificate)


@pytest.mark.parametrize("norm", [1, 2, "inf"])
def test_measure_lower_bound_and_subadditivity(norm):
    rng = np.random.default_rng(23)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        P = rng.normal(size=(n, n))
        Q = rng.normal(size=(n, n))
        assert matrix_measure(P, norm) >= -matrix_measure(-P, norm) - 1e-12
        assert matrix_measure(P + Q, norm) <= matrix_measure(P, norm) + matrix_measure(Q, norm) + 1e-12


@pytest.mark.parametrize("theta, eigenvalues", [(3.0, [1.0, 1.0]), (3.4, [0.6, 1.3]), (4.0, [1.0, 1.5, 1.9])])
def test_homogeneous_certificate_agrees_with_measure_terms(theta, eigenvalues):
    B = _rotated(np.random.default_rng(5), eigenvalues)
    certificate = certify_homogeneous(theta, ConstantMatrix(B), [0.0])
    assert certificate is not None
    n = len(eigenvalues)
    l, c, margin, rate = sun_margin(TimeVaryingSystem.constant(0.5 * theta * np.identity(n), B), certificate.m, [0.0])
    assert l == 0.0
    assert c == pytest.approx(certificate.c, rel=1e-12, abs=1e-14)
    assert margin == pytest.approx(certificate.margin, rel=1e-9, abs=1e-12)
    assert rate == pytest.approx(certificate.decay_rate, rel=1e-9, abs=1e-12)


def test_certified_scalar_system_stays_inside_its_envelope():
    system = TimeVaryingSystem.constant([[1.5]], [[1.0]])
    certificate = certify_sun(system, m_grid=[1.2])
    transition = simulate_transition(system, 0.0, 50.0, 0.01)
    check = envelope_check(transition, certificate.decay_rate)
    assert check.passed
    assert check.violations == 0
    assert check.gamma_hat >= 1.0


def test_undamped_oscillator_is_bounded_but_does_not_decay():
    transition = simulate_transition(TimeVaryingSystem.constant([[0.0]], [[1.0]]), 0.0, 30.0, 0.01)
    assert np.max(transition.norms) == pytest.approx(1.0, abs=1e-6)
    assert transition.norms[-1] == pytest.approx(1.0, abs=1e-6)


def test_hyperbolic_system_grows_exponentially():
    transition = simulate_transition(TimeVaryingSystem.constant([[0.0]], [[-1.0]]), 0.0, 10.0, 0.01)
    slope = np.polyfit(transition.times[500:], np.log(transition.norms[500:]), 1)[0]
    assert slope == pytest.approx(1.0, abs=1e-3)


def test_runaway_transition_raises():
    with pytest.raises(DivergenceError):
        simulate_transition(TimeVaryingSystem.constant([[0.0]], [[-100.0]]), 0.0, 10.0, 0.01)


def test_time_varying_transition_matches_constant_propagation():
    constant = TimeVaryingSystem.constant([[0.5]], [[2.0]])
    closed = TimeVaryingSystem(ClosedFormMatrix(lambda t: [[0.5]], 1), ClosedFormMatrix(lambda t: [[2.0]], 1))
    first = simulate_transition(constant, 0.0, 5.0, 0.01)
    second = simulate_transition(closed, 0.0, 5.0, 0.01)
    np.testing.assert_allclose(first.norms, second.norms, rtol=1e-10)


@pytest.mark.parametrize("q, bound", [(-2.0, -1.3), (-3.0, -2.3)])
def test_polynomial_forcing_decays_through_a_stable_system(q, bound):
    system = TimeVaryingSystem.constant([[1.5]], [[1.0]])
    report = bibo_decay_check(system, q, certificate=certify_sun(system, m_grid=[1.2]))
    assert report.fitted_exponent <= bound
    assert report.passed


def test_unforced_decay_passes_trivially():
    system = TimeVaryingSystem.constant([[1.5]], [[1.0]])
    report = bibo_decay_check(system, None, T=100.0)
    assert report.passed
    assert report.fitted_exponent < -5.0


@pytest.mark.parametrize("q", [-0.5, 0.0, 1.0])
def test_excluded_forcing_exponents(q):
    with pytest.raises(ParameterError):
        bibo_decay_check(TimeVaryingSystem.constant([[1.5]], [[1.0]]), q)


def test_decay_check_needs_a_stable_system():
    with pytest.raises(HypothesisViolationError):
        bibo_decay_check(TimeVaryingSystem.constant([[0.0]], [[-1.0]]), -2.0, T=10.0)


def test_grid_system_from_csv():
    system = load_system_csv(str(CONFIG_DIR / "data" / "varying_system.csv"))
    assert system.dimension == 1
    assert not system.is_constant
    assert system.A(0.0)[0, 0] == pytest.approx(1.5)
    assert system.B(0.0)[0, 0] == pytest.approx(1.05)
    with pytest.raises(DomainError):
        system.A(11.0)
    certificate = certify_sun(system, t_grid=np.linspace(0.0, 10.0, 201))
    assert certificate is not None
    transition = simulate_transition(system, 0.0, 10.0, 0.05)
    assert envelope_check(transition, certificate.decay_rate, burn_in=0.3).passed


def test_grid_matrix_interpolates_linearly():
    grid = GridMatrix([0.0, 1.0], [[[0.0]], [[2.0]]])
    assert grid(0.25)[0, 0] == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        GridMatrix([0.0, 0.0], [[[0.0]], [[1.0]]])


def test_system_csv_header_is_checked(tmp_path):
    path = tmp_path / "system.csv"
    path.write_text("t,a,b\n0,1,1\n1,1,1\n")
    with pytest.raises(ParameterError):
        load_system_csv(str(path))
