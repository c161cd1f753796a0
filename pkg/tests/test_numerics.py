"""Tests for the shared numerical helpers."""

import numpy as np
import pytest

from actionlab.error_handling import ParameterError
from actionlab.numerics import (central_difference, central_difference_jacobian, fit_power_law,
                                max_relative_error, rk4_linear_propagator, rk4_step)


def test_central_difference_of_quadratic():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    x0 = np.array([0.3, -1.2])
    grad = central_difference(lambda x: 0.5 * x @ Q @ x, x0, 1e-5)
    np.testing.assert_allclose(grad, Q @ x0, atol=1e-9)


def test_central_difference_jacobian_columns():
    F = np.array([[1.0, 2.0, 0.0], [0.0, -1.0, 3.0]])
    J = central_difference_jacobian(lambda x: F @ x, np.ones(3), 1e-6)
    np.testing.assert_allclose(J, F, atol=1e-8)


def test_max_relative_error_uses_unit_floor():
    assert max_relative_error([1e-12], [2e-12]) == pytest.approx(1e-12)
    assert max_relative_error([100.0], [101.0]) == pytest.approx(1.0 / 101.0)
    assert max_relative_error([], []) == 0.0


def test_fit_power_law_recovers_exponent_and_constant():
    t = np.linspace(10.0, 1000.0, 200)
    y = 3.0 * (1.0 + t) ** -2.5
    slope, C = fit_power_law(t, y, offset=1.0)
    assert slope == pytest.approx(-2.5, abs=1e-10)
    assert C == pytest.approx(3.0, rel=1e-9)


def test_fit_power_law_ignores_non_positive_samples():
    t = np.array([1.0, 2.0, 4.0, 8.0])
    y = np.array([1.0, 0.0, 0.0625, -1.0])
    slope, _ = fit_power_law(t, y)
    assert slope == pytest.approx(-2.0)


def test_fit_power_law_needs_two_positive_samples():
    with pytest.raises(ParameterError):
        fit_power_law(np.array([1.0, 2.0]), np.array([0.0, 1.0]))


def test_rk4_propagator_matches_single_step():
    F = np.array([[0.0, 1.0], [-2.0, -0.5]])
    y = np.array([1.0, -0.3])
    h = 0.1
    stepped = rk4_step(lambda t, v: F @ v, 0.0, y, h)
    np.testing.assert_allclose(rk4_linear_propagator(F, h) @ y, stepped, rtol=1e-14, atol=1e-15)


def test_rk4_step_is_fourth_order():
    # y' = y, exact e^h
    errors = [abs(rk4_step(lambda t, v: v, 0.0, np.array([1.0]), h)[0] - np.exp(h)) for h in (0.1, 0.05)]
    assert errors[0] / errors[1] == pytest.approx(32.0, rel=0.05)
