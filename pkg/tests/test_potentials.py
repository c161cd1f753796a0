"""Tests for the losses, their gradients and Jacobian blocks."""

import numpy as np
import pytest

from actionlab.error_handling import ParameterError, ShapeError
from actionlab.potentials import (AffineTarget, FeatureMap, LinearRegression, QuadraticTracking, TwoLayerTanh,
                                  check_gradients, check_jacobians)


def _models():
    return {
        "quadratic": QuadraticTracking([[1.0, 0.5, 0.0], [0.0, 2.0, -1.0]]),
        "regression-affine": LinearRegression(FeatureMap("affine", 2), AffineTarget([0.3, -0.7], 0.2)),
        "regression-fourier": LinearRegression(FeatureMap("fourier", 2, n_features=5, scale=1.5, seed=1),
                                               AffineTarget([1.0, 0.5], -0.1)),
        "two-layer-tanh": TwoLayerTanh(2, 3, AffineTarget([0.5, -0.25], 0.1)),
    }


@pytest.mark.parametrize("name", list(_models()))
def test_gradients_match_central_differences_at_seeded_points(name):
    model = _models()[name]
    rng = np.random.default_rng(1234)
    for _ in range(20):
        x = rng.normal(size=model.input_dim)
        w = rng.normal(size=model.weight_dim)
        report = check_gradients(model, x, w)
        assert report.passed, (name, report)


@pytest.mark.parametrize("name", list(_models()))
def test_jacobian_blocks_are_consistent(name):
    model = _models()[name]
    rng = np.random.default_rng(99)
    for _ in range(5):
        x = rng.normal(size=model.input_dim)
        w = rng.normal(size=model.weight_dim)
        report = check_jacobians(model, x, w)
        assert report.symmetry_err <= 1e-10
        assert report.mixed_partial_err <= 1e-10
        assert report.passed, (name, report)


class _SkewedCurvature(QuadraticTracking):
    """Quadratic tracking with a curvature term that breaks both symmetries."""

    def curvature(self, x, w, r):
        H = np.zeros((self.weight_dim + self.input_dim,) * 2)
        H[0, 1] = 1e-3
        H[0, self.weight_dim] = 1e-3
        return H


def test_asymmetric_blocks_are_flagged():
    model = _SkewedCurvature([[1.0, 0.5], [0.0, 2.0]])
    report = check_jacobians(model, np.array([0.3, -0.2]), np.array([1.0, 0.5]))
    assert report.symmetry_err == pytest.approx(1e-3)
    assert report.mixed_partial_err == pytest.approx(1e-3)
    assert not report.passed


def test_quadratic_blocks_in_closed_form():
    M = np.array([[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]])
    model = QuadraticTracking(M)
    blocks = model.jacobian_blocks(np.zeros(3), np.zeros(2))
    np.testing.assert_allclose(blocks.Jw, M.T @ M)
    np.testing.assert_allclose(blocks.Jx, -M.T)
    np.testing.assert_allclose(blocks.Kw, -M)
    np.testing.assert_allclose(blocks.Kx, np.identity(3))


def test_quadratic_vanishes_at_its_minimizer():
    model = QuadraticTracking([[2.0, 0.0], [0.0, 4.0]])
    x = np.array([1.0, -2.0])
    w = np.array([0.5, -0.5])
    assert model.value(x, w) == 0.0
    grad_w, grad_x = model.gradients(x, w)
    np.testing.assert_array_equal(grad_w, [0.0, 0.0])
    np.testing.assert_array_equal(grad_x, [0.0, 0.0])


def test_two_layer_tanh_insensitive_to_hidden_weights_when_output_weights_vanish():
    model = TwoLayerTanh(2, 3, AffineTarget([1.0, 1.0], 0.5))
    rng = np.random.default_rng(5)
    w = rng.normal(size=model.weight_dim)
    w[6:] = 0.0
    grad_w = model.grad_w(rng.normal(size=2), w)
    np.testing.assert_array_equal(grad_w[:6], np.zeros(6))


def test_two_layer_tanh_packing():
    model = TwoLayerTanh(2, 3, AffineTarget([0.0, 0.0]))
    assert model.weight_dim == 9
    A, c = model.unpack(np.arange(9.0))
    np.testing.assert_array_equal(A, [[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
    np.testing.assert_array_equal(c, [6.0, 7.0, 8.0])


def test_shape_mismatch_raises():
    model = QuadraticTracking([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ShapeError):
        model.value(np.zeros(3), np.zeros(2))
    with pytest.raises(ShapeError):
        model.gradients(np.zeros(2), np.zeros(1))


def test_target_and_input_dimensions_must_agree():
    with pytest.raises(ShapeError):
        TwoLayerTanh(2, 3, AffineTarget([1.0]))
    with pytest.raises(ShapeError):
        LinearRegression(FeatureMap("identity", 3), AffineTarget([1.0, 2.0]))


def test_feature_maps():
    x = np.array([0.2, -0.4])
    np.testing.assert_array_equal(FeatureMap("affine", 2).value(x), [0.2, -0.4, 1.0])
    first = FeatureMap("fourier", 2, n_features=4, seed=3).value(x)
    second = FeatureMap("fourier", 2, n_features=4, seed=3).value(x)
    np.testing.assert_array_equal(first, second)
    with pytest.raises(ParameterError):
        FeatureMap("polynomial", 2)
    with pytest.raises(ParameterError):
        FeatureMap("fourier", 2)
