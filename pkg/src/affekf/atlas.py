"""Charts, atlases and chart-based Jacobian machinery.

An atlas provides, for any center state, an invertible error map into R^m
(``error``) and its inverse (``retract``). The EKF linearizes through these
maps; ``numeric_jacobians`` evaluates the chart compositions by central
finite differences, and ``transform_jacobians``/``transform_covariance``
move linearizations between a base atlas and an affine atlas built on it.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import DimensionMismatchError, SingularAffineError

# Central finite-difference step for all chart-composition derivatives.
FD_STEP = 1e-6
# Affine chart matrices beyond this condition number are treated as singular.
MAX_AFFINE_COND = 1e8

State = Any
Control = Any


@dataclass(frozen=True)
class JacobianTriple:
    """(F, G, H) for one filter step in a given atlas."""

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        m = self.F.shape[0]
        if self.F.shape != (m, m):
            raise DimensionMismatchError(f"F must be square, got {self.F.shape}")
        if self.G.shape[0] != m or self.H.shape[1] != m:
            raise DimensionMismatchError(
                f"inconsistent shapes F{self.F.shape} G{self.G.shape} H{self.H.shape}"
            )
        if not (np.isfinite(self.F).all() and np.isfinite(self.G).all() and np.isfinite(self.H).all()):
            raise ValueError("non-finite Jacobian entries")


class Atlas(ABC):
    """Family of charts centered at any state."""

    @abstractmethod
    def dim(self, center: State) -> int:
        """Error dimension of the chart centered at ``center``."""

    @abstractmethod
    def error(self, center: State, state: State) -> np.ndarray:
        """Chart coordinates of ``state`` in the chart centered at ``center``."""

    @abstractmethod
    def retract(self, center: State, eps: np.ndarray) -> State:
        """Inverse of ``error``."""

    def linearization(self, center: State) -> np.ndarray:
        """First-order chart matrix relative to the underlying standard chart.

        Identity for standard charts; the affine matrix A_X for affine
        atlases; the analytic first-order map for group charts.
        """
        return np.eye(self.dim(center))


class AffineAtlas(Atlas):
    """Base atlas left-multiplied by a state-dependent invertible matrix."""

    def __init__(self, base: Atlas, affine: Callable[[State], np.ndarray]):
        self.base = base
        self.affine = affine

    def dim(self, center: State) -> int:
        return self.base.dim(center)

    def matrix(self, center: State) -> np.ndarray:
        return self.affine(center)

    def validated_matrix(self, center: State) -> np.ndarray:
        """Chart matrix with the invertibility invariant enforced (audit paths)."""
        a = self.affine(center)
        if np.linalg.cond(a) > MAX_AFFINE_COND:
            raise SingularAffineError("affine chart matrix is numerically singular")
        return a

    def error(self, center: State, state: State) -> np.ndarray:
        return self.matrix(center) @ self.base.error(center, state)

    def retract(self, center: State, eps: np.ndarray) -> State:
        return self.base.retract(center, np.linalg.solve(self.matrix(center), eps))

    def linearization(self, center: State) -> np.ndarray:
        return self.matrix(center) @ self.base.linearization(center)


def _fd_columns(fun: Callable[[np.ndarray], np.ndarray], dim: int, step: float) -> np.ndarray:
    cols = []
    for i in range(dim):
        delta = np.zeros(dim)
        delta[i] = step
        cols.append((fun(delta) - fun(-delta)) / (2.0 * step))
    return np.column_stack(cols)


def numeric_jacobians(
    atlas: Atlas,
    f: Callable[[State, Control], State],
    h: Callable[[State], np.ndarray],
    x_prev: State,
    x_pred: State,
    u: Control,
    control_dim: int,
    perturb_control: Callable[[Control, np.ndarray], Control] | None = None,
    step: float = FD_STEP,
) -> JacobianTriple:
    """Central finite differences of the chart compositions defining F, G, H.

    ``x_pred`` must equal ``f(x_prev, u)`` (the prediction is the chart
    center). ``perturb_control`` applies a small Euclidean perturbation to
    the control; plain addition is used when it is None.
    """
    m = atlas.dim(x_prev)

    def f_err(eps):
        return atlas.error(x_pred, f(atlas.retract(x_prev, eps), u))

    def g_err(delta):
        if perturb_control is None:
            return atlas.error(x_pred, f(x_prev, u + delta))
        return atlas.error(x_pred, f(x_prev, perturb_control(u, delta)))

    def h_err(eps):
        return np.asarray(h(atlas.retract(x_pred, eps)), dtype=float)

    F = _fd_columns(f_err, m, step)
    G = _fd_columns(g_err, control_dim, step)
    H = _fd_columns(h_err, atlas.dim(x_pred), step)
    return JacobianTriple(F, G, H)


def transform_jacobians(tri: JacobianTriple, a_prev: np.ndarray, a_pred: np.ndarray) -> JacobianTriple:
    """Re-express (F, G, H) from a base atlas in the affine atlas with matrices A.

    F' = A_pred F A_prev^-1, G' = A_pred G, H' = H A_pred^-1.
    """
    for a in (a_prev, a_pred):
        if np.linalg.cond(a) > MAX_AFFINE_COND:
            raise SingularAffineError("affine matrix in Jacobian transform is singular")
    a_prev_inv = np.linalg.inv(a_prev)
    a_pred_inv = np.linalg.inv(a_pred)
    return JacobianTriple(
        a_pred @ tri.F @ a_prev_inv,
        a_pred @ tri.G,
        tri.H @ a_pred_inv,
    )


def transform_covariance(p: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Equivalent covariance under the affine chart change: A P A^T, symmetrized."""
    out = a @ p @ a.T
    return 0.5 * (out + out.T)


def affine_from_chart(pi: Atlas, phi: Atlas, x: State, step: float = FD_STEP) -> np.ndarray:
    """Jacobian of the coordinate transformation between two charts at their center.

    Returns the matrix A with pi_x(phi_x^-1(eta)) = A eta + O(|eta|^2); this
    is the affine map that reproduces the first atlas's linearization on top
    of the second.
    """
    m = phi.dim(x)
    if pi.dim(x) != m:
        raise DimensionMismatchError("charts of different dimension")

    def comp(eta):
        return pi.error(x, phi.retract(x, eta))

    a = _fd_columns(comp, m, step)
    if np.linalg.cond(a) > MAX_AFFINE_COND:
        raise SingularAffineError("chart-change Jacobian is numerically singular")
    return a
