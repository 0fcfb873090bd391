"""Generic EKF steps on a manifold for a given atlas.

Beliefs are values; every step is a pure function old-belief -> new-belief.
The covariance update uses the plain (I - KH) P form with explicit
symmetrization after every step. ``alt_affine_step`` implements the
covariance-correction formulation of an affine-atlas filter: one standard
step followed by P <- L P L^T with L = A(X_upd)^-1 A(X_pred).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np

from .atlas import Atlas, numeric_jacobians, transform_covariance
from .errors import SingularInnovationError

State = Any

# Innovation covariances beyond this condition number abort the update.
MAX_INNOVATION_COND = 1e12


@dataclass(frozen=True)
class NoiseSpec:
    """Odometry and observation noise standard deviations.

    sigma_w1: odometry rotation (rad), sigma_w2: odometry translation (m),
    sigma_v: observation (m). The odometry noise convention is
    measured rotation = so_exp(w1) @ true rotation and
    measured translation = true translation + w2.
    """

    sigma_w1: float
    sigma_w2: float
    sigma_v: float

    def __post_init__(self):
        if min(self.sigma_w1, self.sigma_w2, self.sigma_v) <= 0:
            raise ValueError("noise standard deviations must be positive")

    def control_cov(self) -> np.ndarray:
        return np.diag([self.sigma_w1**2] * 3 + [self.sigma_w2**2] * 3)

    def obs_cov(self, p: int = 3) -> np.ndarray:
        return self.sigma_v**2 * np.eye(p)


@dataclass(frozen=True)
class GaussianBelief:
    """State estimate with covariance expressed in the belief's atlas."""

    state: State
    cov: np.ndarray
    atlas: Atlas

    def validate(self, rel_tol: float = 1e-10, eig_tol: float = 1e-9) -> None:
        p = self.cov
        scale = max(np.abs(p).max(), 1e-30)
        if np.abs(p - p.T).max() > rel_tol * scale:
            raise ValueError("covariance is not symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (p + p.T))
        if eigs.min() < -eig_tol * max(np.trace(p), 1e-30):
            raise ValueError(f"covariance has negative eigenvalue {eigs.min():.3e}")


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def propagate(
    belief: GaussianBelief,
    u_hat,
    sigma: np.ndarray,
    *,
    f: Callable[[State, Any], State],
    F: np.ndarray | None = None,
    G: np.ndarray | None = None,
    perturb_control=None,
    h_dummy: Callable[[State], np.ndarray] | None = None,
) -> GaussianBelief:
    """Predict through the process model: X <- f(X, u), P <- F P F^T + G Sigma G^T.

    Analytic F and G (in the belief's atlas) are used when given; otherwise
    both are obtained by finite differences of the chart compositions.
    """
    x_pred = f(belief.state, u_hat)
    if F is None or G is None:
        h = h_dummy if h_dummy is not None else (lambda x: np.zeros(1))
        tri = numeric_jacobians(
            belief.atlas, f, h, belief.state, x_pred, u_hat,
            control_dim=sigma.shape[0], perturb_control=perturb_control,
        )
        F = tri.F if F is None else F
        G = tri.G if G is None else G
    p_pred = _symmetrize(F @ belief.cov @ F.T + G @ sigma @ G.T)
    return replace(belief, state=x_pred, cov=p_pred)


def update(
    belief: GaussianBelief,
    z_hat: np.ndarray,
    omega: np.ndarray,
    *,
    h: Callable[[State], np.ndarray],
    H: np.ndarray,
    retract: Callable[[State, np.ndarray], State] | None = None,
) -> GaussianBelief:
    """Correct with one observation block: X <- retract(K y), P <- (I - KH) P.

    ``retract`` overrides the belief atlas's retraction (used when a pass of
    sequential updates is pinned to one chart).
    """
    p = belief.cov
    hp = H @ p
    s = hp @ H.T + omega
    # SPD factorization as the invertibility check; diagonal spread of the
    # factor bounds the condition number.
    try:
        chol = np.linalg.cholesky(0.5 * (s + s.T))
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError("innovation covariance is not positive definite") from exc
    diag = np.diag(chol)
    if (diag.max() / diag.min()) ** 2 > MAX_INNOVATION_COND:
        raise SingularInnovationError("innovation covariance is numerically singular")
    k = np.linalg.solve(s, hp).T
    y = np.asarray(z_hat, dtype=float) - np.asarray(h(belief.state), dtype=float)
    delta = k @ y
    x_new = retract(belief.state, delta) if retract else belief.atlas.retract(belief.state, delta)
    p_new = _symmetrize(p - k @ hp)
    return replace(belief, state=x_new, cov=p_new)


def affine_covariance_correction(
    p: np.ndarray, a_pred: np.ndarray, a_upd: np.ndarray
) -> np.ndarray:
    """Covariance modification L P L^T with L = A(X_upd)^-1 A(X_pred)."""
    l = np.linalg.solve(a_upd, a_pred)
    return _symmetrize(l @ p @ l.T)


def alt_affine_step(
    belief: GaussianBelief,
    affine: Callable[[State], np.ndarray],
    u_hat,
    z_hat: np.ndarray,
    sigma: np.ndarray,
    omega: np.ndarray,
    *,
    f: Callable[[State, Any], State],
    h: Callable[[State], np.ndarray],
    jac: Callable[[State, State, Any], tuple[np.ndarray, np.ndarray]],
    obs_jac: Callable[[State], np.ndarray],
) -> GaussianBelief:
    """One affine-atlas filter step realized as a corrected standard step.

    ``belief`` must live in the standard atlas and carry the corrected
    covariance from the previous step. The produced state is identical to
    the plain standard step's state; only the covariance is modified.
    """
    pred = propagate_with(belief, u_hat, sigma, f=f, jac=jac)
    upd = update(pred, z_hat, omega, h=h, H=obs_jac(pred.state))
    p_corr = affine_covariance_correction(upd.cov, affine(pred.state), affine(upd.state))
    return replace(upd, cov=p_corr)


def propagate_with(belief, u_hat, sigma, *, f, jac) -> GaussianBelief:
    """Propagate with analytic Jacobians supplied by ``jac(x_prev, x_pred, u)``."""
    x_pred = f(belief.state, u_hat)
    F, G = jac(belief.state, x_pred, u_hat)
    p_pred = _symmetrize(F @ belief.cov @ F.T + G @ sigma @ G.T)
    return replace(belief, state=x_pred, cov=p_pred)


def augment_feature(
    belief: GaussianBelief,
    z: np.ndarray,
    omega: np.ndarray,
    *,
    init: Callable[[State, np.ndarray], tuple[State, np.ndarray, np.ndarray]],
) -> GaussianBelief:
    """Extend the belief with a new feature initialized from one observation.

    ``init`` inverts the observation model at the current estimate and
    returns (augmented state, d(new coords)/d(state error) in the standard
    atlas, d(new coords)/d(observation)). For non-standard atlases the
    covariance is extended in the standard atlas and mapped back through the
    enlarged chart matrix.
    """
    a_old = belief.atlas.linearization(belief.state)
    trivial = np.array_equal(a_old, np.eye(a_old.shape[0]))
    p_std = belief.cov if trivial else transform_covariance(belief.cov, np.linalg.inv(a_old))

    x_new, j_x, j_z = init(belief.state, np.asarray(z, dtype=float))
    cross = p_std @ j_x.T
    corner = j_x @ cross + j_z @ omega @ j_z.T
    m, t = p_std.shape[0], j_x.shape[0]
    p_aug = np.zeros((m + t, m + t))
    p_aug[:m, :m] = p_std
    p_aug[:m, m:] = cross
    p_aug[m:, :m] = cross.T
    p_aug[m:, m:] = corner

    a_new = belief.atlas.linearization(x_new)
    if not np.array_equal(a_new, np.eye(m + t)):
        p_aug = transform_covariance(p_aug, a_new)
    return replace(belief, state=x_new, cov=_symmetrize(p_aug))
