"""
Instantaneous losses V(x, w) with analytic gradients and Jacobian blocks.

Every kind is a squared residual V = 1/2 ||r(x, w)||^2, so first
derivatives come from the residual Jacobian and the joint (w, x) Hessian
is Jr^T Jr plus the residual curvature term. The four blocks used by the
stability results are read off that joint Hessian.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .error_handling import ParameterError, ShapeError
from .numerics import central_difference, central_difference_jacobian, max_relative_error

logger = logging.getLogger(__name__)


class PotentialKind(Enum):
    QUADRATIC_TRACKING = "quadratic-tracking"
    LINEAR_REGRESSION = "linear-regression"
    TWO_LAYER_TANH = "two-layer-tanh"


@dataclass(frozen=True)
class JacobianBlocks:
    """Jw = d_w V_w (m x m), Jx = d_x V_w (m x d), Kw = d_w V_x (d x m), Kx = d_x V_x (d x d)."""
    Jw: np.ndarray
    Jx: np.ndarray
    Kw: np.ndarray
    Kx: np.ndarray


class PotentialModel:
    """Base class for squared-residual losses."""

    kind: PotentialKind

    def __init__(self, input_dim: int, weight_dim: int):
        if input_dim < 1 or weight_dim < 1:
            raise ParameterError("potential dimensions must be positive")
        self.input_dim = int(input_dim)
        self.weight_dim = int(weight_dim)

    # Subclasses provide the residual, its Jacobian over (w, x) and sum_k r_k Hess(r_k).
    def residual(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def residual_jacobian(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def curvature(self, x: np.ndarray, w: np.ndarray, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_shapes(self, x, w) -> Tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        if x.shape != (self.input_dim,):
            raise ShapeError(f"input has shape {x.shape}, expected ({self.input_dim},)")
        if w.shape != (self.weight_dim,):
            raise ShapeError(f"weights have shape {w.shape}, expected ({self.weight_dim},)")
        return x, w

    def value(self, x, w) -> float:
        x, w = self._check_shapes(x, w)
        r = self.residual(x, w)
        return 0.5 * float(r @ r)

    def gradients(self, x, w) -> Tuple[np.ndarray, np.ndarray]:
        """(V_w, V_x) in one pass."""
        x, w = self._check_shapes(x, w)
        r = self.residual(x, w)
        g = self.residual_jacobian(x, w).T @ r
        return g[:self.weight_dim], g[self.weight_dim:]

    def grad_w(self, x, w) -> np.ndarray:
        return self.gradients(x, w)[0]

    def grad_x(self, x, w) -> np.ndarray:
        return self.gradients(x, w)[1]

    def joint_hessian(self, x, w) -> np.ndarray:
        x, w = self._check_shapes(x, w)
        r = self.residual(x, w)
        jac = self.residual_jacobian(x, w)
        return jac.T @ jac + self.curvature(x, w, r)

    def jacobian_blocks(self, x, w) -> JacobianBlocks:
        H = self.joint_hessian(x, w)
        m = self.weight_dim
        return JacobianBlocks(Jw=H[:m, :m], Jx=H[:m, m:], Kw=H[m:, :m], Kx=H[m:, m:])


class QuadraticTracking(PotentialModel):
    """V = 1/2 ||M w - x||^2."""

    kind = PotentialKind.QUADRATIC_TRACKING

    def __init__(self, matrix):
        M = np.atleast_2d(np.asarray(matrix, dtype=float))
        super().__init__(M.shape[0], M.shape[1])
        self.matrix = M
        self._jac = np.hstack([M, -np.identity(M.shape[0])])
        self._zero_curvature = np.zeros((self._jac.shape[1],) * 2)

    def residual(self, x, w):
        return self.matrix @ w - x

    def residual_jacobian(self, x, w):
        return self._jac

    def curvature(self, x, w, r):
        return self._zero_curvature

    def gradients(self, x, w):
        x, w = self._check_shapes(x, w)
        r = self.matrix @ w - x
        return self.matrix.T @ r, -r


class AffineTarget:
    """y(x) = coef . x + bias."""

    def __init__(self, coef: Sequence[float], bias: float = 0.0):
        self.coef = np.atleast_1d(np.asarray(coef, dtype=float))
        self.bias = float(bias)

    def __call__(self, x: np.ndarray) -> float:
        return float(self.coef @ x) + self.bias


class FeatureMap:
    """phi: R^d -> R^n with Jacobian (n x d) and the contraction sum_k c_k Hess(phi_k)."""

    def __init__(self, kind: str, input_dim: int, n_features: Optional[int] = None,
                 scale: float = 1.0, seed: int = 0):
        self.kind = kind
        self.input_dim = int(input_dim)
        if kind == "identity":
            self.n_features = self.input_dim
        elif kind == "affine":
            self.n_features = self.input_dim + 1
        elif kind == "fourier":
            if not n_features or n_features < 1:
                raise ParameterError("fourier features need a positive n_features")
            rng = np.random.default_rng(seed)
            self.n_features = int(n_features)
            self._omega = rng.normal(0.0, scale, size=(self.n_features, self.input_dim))
            self._shift = rng.uniform(0.0, 2 * np.pi, size=self.n_features)
        else:
            raise ParameterError(f"unknown feature map '{kind}' (identity | affine | fourier)")

    def value(self, x):
        if self.kind == "identity":
            return x
        if self.kind == "affine":
            return np.append(x, 1.0)
        return np.cos(self._omega @ x + self._shift)

    def jacobian(self, x):
        if self.kind == "identity":
            return np.identity(self.input_dim)
        if self.kind == "affine":
            return np.vstack([np.identity(self.input_dim), np.zeros((1, self.input_dim))])
        return -np.sin(self._omega @ x + self._shift)[:, None] * self._omega

    def hessian_contraction(self, x, coeffs):
        if self.kind in ("identity", "affine"):
            return np.zeros((self.input_dim, self.input_dim))
        weights = coeffs * np.cos(self._omega @ x + self._shift)
        return -(self._omega.T * weights) @ self._omega


class LinearRegression(PotentialModel):
    """V = 1/2 (w . phi(x) - y(x))^2."""

    kind = PotentialKind.LINEAR_REGRESSION

    def __init__(self, features: FeatureMap, target: AffineTarget):
        if target.coef.size != features.input_dim:
            raise ShapeError(f"target has {target.coef.size} coefficients, input dimension is {features.input_dim}")
        super().__init__(features.input_dim, features.n_features)
        self.features = features
        self.target = target

    def residual(self, x, w):
        return np.array([w @ self.features.value(x) - self.target(x)])

    def residual_jacobian(self, x, w):
        phi = self.features.value(x)
        dphi = self.features.jacobian(x)
        return np.concatenate([phi, dphi.T @ w - self.target.coef])[None, :]

    def curvature(self, x, w, r):
        m, d = self.weight_dim, self.input_dim
        dphi = self.features.jacobian(x)
        H = np.zeros((m + d, m + d))
        H[:m, m:] = dphi
        H[m:, :m] = dphi.T
        H[m:, m:] = self.features.hessian_contraction(x, w)
        return r[0] * H


class TwoLayerTanh(PotentialModel):
    """
    V = 1/2 (c . tanh(A x) - y(x))^2 with w packing A (hidden x d, row-major)
    followed by c (hidden).
    """

    kind = PotentialKind.TWO_LAYER_TANH

    def __init__(self, input_dim: int, hidden: int, target: AffineTarget):
        if hidden < 1:
            raise ParameterError("two-layer-tanh needs at least one hidden unit")
        if target.coef.size != input_dim:
            raise ShapeError(f"target has {target.coef.size} coefficients, input dimension is {input_dim}")
        super().__init__(input_dim, hidden * input_dim + hidden)
        self.hidden = int(hidden)
        self.target = target

    def unpack(self, w) -> Tuple[np.ndarray, np.ndarray]:
        split = self.hidden * self.input_dim
        return w[:split].reshape(self.hidden, self.input_dim), w[split:]

    def _activations(self, x, w):
        A, c = self.unpack(w)
        s = np.tanh(A @ x)
        s1 = 1.0 - s * s
        return A, c, s, s1

    def residual(self, x, w):
        A, c, s, _ = self._activations(x, w)
        return np.array([c @ s - self.target(x)])

    def residual_jacobian(self, x, w):
        A, c, s, s1 = self._activations(x, w)
        grad_A = np.outer(c * s1, x).ravel()
        grad_x = A.T @ (c * s1) - self.target.coef
        return np.concatenate([grad_A, s, grad_x])[None, :]

    def curvature(self, x, w, r):
        A, c, s, s1 = self._activations(x, w)
        s2 = -2.0 * s * s1
        h, d = self.hidden, self.input_dim
        hd = h * d
        m = self.weight_dim
        H = np.zeros((m + d, m + d))

        H[:hd, :hd] = np.kron(np.diag(c * s2), np.outer(x, x))
        ac = np.kron(np.diag(s1), x[:, None])
        H[:hd, hd:m] = ac
        H[hd:m, :hd] = np.kron(np.diag(s1), x[None, :])
        ax = (np.einsum('k,j,ki->kji', c * s2, x, A)
              + np.einsum('k,ji->kji', c * s1, np.identity(d))).reshape(hd, d)
        H[:hd, m:] = ax
        H[m:, :hd] = (np.einsum('k,j,ki->ikj', c * s2, x, A)
                      + np.einsum('k,ij->ikj', c * s1, np.identity(d))).reshape(d, hd)
        cx = s1[:, None] * A
        H[hd:m, m:] = cx
        H[m:, hd:m] = A.T * s1
        H[m:, m:] = (A.T * (c * s2)) @ A
        return r[0] * H


@dataclass(frozen=True)
class GradientCheck:
    max_rel_err_w: float
    max_rel_err_x: float
    passed: bool


def check_gradients(model: PotentialModel, x, w, tolerance: float = 1e-5) -> GradientCheck:
    """Analytic gradients against central differences of value()."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    grad_w, grad_x = model.gradients(x, w)
    fd_w = central_difference(lambda ww: model.value(x, ww), w, 1e-6 * (1.0 + np.linalg.norm(w)))
    fd_x = central_difference(lambda xx: model.value(xx, w), x, 1e-6 * (1.0 + np.linalg.norm(x)))
    err_w = max_relative_error(grad_w, fd_w)
    err_x = max_relative_error(grad_x, fd_x)
    logger.debug(f"{model.kind.value} gradient check: err_w={err_w:.3e} err_x={err_x:.3e}")
    return GradientCheck(max_rel_err_w=err_w, max_rel_err_x=err_x,
                         passed=err_w <= tolerance and err_x <= tolerance)


def finite_difference_blocks(model: PotentialModel, x, w) -> JacobianBlocks:
    """Jacobian blocks by central differences of the analytic gradients."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    hw = 1e-6 * (1.0 + np.linalg.norm(w))
    hx = 1e-6 * (1.0 + np.linalg.norm(x))
    return JacobianBlocks(
        Jw=central_difference_jacobian(lambda ww: model.grad_w(x, ww), w, hw),
        Jx=central_difference_jacobian(lambda xx: model.grad_w(xx, w), x, hx),
        Kw=central_difference_jacobian(lambda ww: model.grad_x(x, ww), w, hw),
        Kx=central_difference_jacobian(lambda xx: model.grad_x(xx, w), x, hx),
    )


@dataclass(frozen=True)
class JacobianCheck:
    symmetry_err: float
    mixed_partial_err: float
    max_rel_err: float
    passed: bool


def check_jacobians(model: PotentialModel, x, w, symmetry_tol: float = 1e-10,
                    tolerance: float = 1e-5) -> JacobianCheck:
    """Jw symmetric, Kw = Jx^T, and agreement with differenced gradients."""
    blocks = model.jacobian_blocks(x, w)
    numeric = finite_difference_blocks(model, x, w)
    symmetry = float(np.max(np.abs(blocks.Jw - blocks.Jw.T)))
    mixed = float(np.max(np.abs(blocks.Kw - blocks.Jx.T)))
    err = max(max_relative_error(getattr(blocks, name), getattr(numeric, name))
              for name in ("Jw", "Jx", "Kw", "Kx"))
    return JacobianCheck(symmetry_err=symmetry, mixed_partial_err=mixed, max_rel_err=err,
                         passed=symmetry <= symmetry_tol and mixed <= symmetry_tol and err <= tolerance)
