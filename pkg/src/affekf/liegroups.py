"""Rotation-group and SE_{K+1}(d) primitives (skew, exp, log).

Conventions: rotations are d x d numpy arrays (d in {2, 3}); tangent
coordinates are radians. SE_{K+1}(d) elements carry one rotation block and
K+1 translation-like columns (robot position plus feature slots).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AngleNearPiError, DimensionMismatchError

# Below this angle the trigonometric coefficients switch to Taylor branches.
SMALL_ANGLE = 1e-7
# Logarithms are rejected this close to the branch cut at pi.
PI_MARGIN = 1e-6

_PLANAR_GEN = np.array([[0.0, -1.0], [1.0, 0.0]])


def skew(v: np.ndarray) -> np.ndarray:
    """Hat operator: skew(v) @ w == cross(v, w)."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def skew_batch(vs: np.ndarray) -> np.ndarray:
    """Hat operator applied to rows of a (K, 3) array; returns (K, 3, 3)."""
    vs = np.asarray(vs, dtype=float)
    out = np.zeros((vs.shape[0], 3, 3))
    out[:, 0, 1] = -vs[:, 2]
    out[:, 0, 2] = vs[:, 1]
    out[:, 1, 0] = vs[:, 2]
    out[:, 1, 2] = -vs[:, 0]
    out[:, 2, 0] = -vs[:, 1]
    out[:, 2, 1] = vs[:, 0]
    return out


def unskew(m: np.ndarray) -> np.ndarray:
    """Inverse of skew for antisymmetric 3x3 matrices."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def so_exp(v: np.ndarray) -> np.ndarray:
    """Exponential map of SO(d): length-1 input -> planar rotation, length-3 -> Rodrigues."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape == (1,):
        c, s = np.cos(v[0]), np.sin(v[0])
        return np.array([[c, -s], [s, c]])
    if v.shape != (3,):
        raise DimensionMismatchError(f"so_exp expects a 1- or 3-vector, got shape {v.shape}")
    theta = np.linalg.norm(v)
    vx = skew(v)
    if theta < SMALL_ANGLE:
        a = 1.0 - theta**2 / 6.0
        b = 0.5 - theta**2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * vx + b * (vx @ vx)


def so_log(r: np.ndarray) -> np.ndarray:
    """Logarithm of SO(d); raises AngleNearPiError within PI_MARGIN of the cut."""
    r = np.asarray(r, dtype=float)
    if r.shape == (2, 2):
        theta = np.arctan2(r[1, 0], r[0, 0])
        if abs(theta) > np.pi - PI_MARGIN:
            raise AngleNearPiError(f"planar rotation angle {theta:.6f} too close to pi")
        return np.array([theta])
    if r.shape != (3, 3):
        raise DimensionMismatchError(f"so_log expects a 2x2 or 3x3 matrix, got shape {r.shape}")
    cos_theta = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if theta > np.pi - PI_MARGIN:
        raise AngleNearPiError(f"rotation angle {theta:.6f} too close to pi")
    if theta < SMALL_ANGLE:
        scale = 0.5 + theta**2 / 12.0
    else:
        scale = theta / (2.0 * np.sin(theta))
    return scale * unskew(r - r.T)


def so_left_jacobian(v: np.ndarray) -> np.ndarray:
    """Left Jacobian J_l of SO(d); maps algebra translations to group ones in exp."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape == (1,):
        theta = v[0]
        if abs(theta) < SMALL_ANGLE:
            a = 1.0 - theta**2 / 6.0
            b = theta / 2.0 - theta**3 / 24.0
        else:
            a = np.sin(theta) / theta
            b = (1.0 - np.cos(theta)) / theta
        return a * np.eye(2) + b * _PLANAR_GEN
    theta = np.linalg.norm(v)
    vx = skew(v)
    if theta < SMALL_ANGLE:
        b = 0.5 - theta**2 / 24.0
        c = 1.0 / 6.0 - theta**2 / 120.0
    else:
        b = (1.0 - np.cos(theta)) / theta**2
        c = (theta - np.sin(theta)) / theta**3
    return np.eye(3) + b * vx + c * (vx @ vx)


def so_left_jacobian_inv(v: np.ndarray) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape == (1,):
        return np.linalg.inv(so_left_jacobian(v))
    theta = np.linalg.norm(v)
    vx = skew(v)
    if theta < SMALL_ANGLE:
        c = 1.0 / 12.0 + theta**2 / 720.0
    else:
        c = 1.0 / theta**2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) - 0.5 * vx + c * (vx @ vx)


@dataclass(frozen=True)
class SEkElement:
    """Element of SE_{K+1}(d): rotation block plus K+1 translation-like columns.

    ``columns`` has shape (K+1, d); row i is the i-th translation slot.
    """

    rotation: np.ndarray
    columns: np.ndarray

    @property
    def d(self) -> int:
        return self.rotation.shape[0]

    def compose(self, other: "SEkElement") -> "SEkElement":
        if self.columns.shape != other.columns.shape:
            raise DimensionMismatchError("SE_k elements of different sizes")
        return SEkElement(
            self.rotation @ other.rotation,
            other.columns @ self.rotation.T + self.columns,
        )

    def inverse(self) -> "SEkElement":
        rt = self.rotation.T
        return SEkElement(rt, -self.columns @ self.rotation)


def sek_identity(n_columns: int, d: int = 3) -> SEkElement:
    return SEkElement(np.eye(d), np.zeros((n_columns, d)))


def _split_tangent(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Partition a tangent vector into its rotational part and column stack."""
    xi = np.asarray(xi, dtype=float)
    for d, rot_dim in ((3, 3), (2, 1)):
        rest = xi.size - rot_dim
        if rest >= 0 and rest % d == 0 and rest // d >= 1:
            return xi[:rot_dim], xi[rot_dim:].reshape(-1, d), d
    raise DimensionMismatchError(f"tangent length {xi.size} fits no SE_k(2/3) layout")


def sek_exp(xi: np.ndarray, d: int | None = None) -> SEkElement:
    """Exponential map of SE_{K+1}(d): rotation block plus left-Jacobian-mapped columns."""
    xi = np.asarray(xi, dtype=float)
    if d is not None:
        rot_dim = 3 if d == 3 else 1
        w, cols = xi[:rot_dim], xi[rot_dim:].reshape(-1, d)
    else:
        w, cols, d = _split_tangent(xi)
    jl = so_left_jacobian(w)
    return SEkElement(so_exp(w), cols @ jl.T)


def sek_log(el: SEkElement) -> np.ndarray:
    """Inverse of sek_exp; raises AngleNearPiError near the rotation branch cut."""
    w = so_log(el.rotation)
    jinv = so_left_jacobian_inv(w)
    return np.concatenate([w, (el.columns @ jinv.T).ravel()])


def project_to_rotation(m: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (polar decomposition via SVD)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def is_rotation(r: np.ndarray, tol: float = 1e-9) -> bool:
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        return False
    ortho = np.linalg.norm(r @ r.T - np.eye(r.shape[0]))
    return ortho < tol and abs(np.linalg.det(r) - 1.0) < tol


def random_rotation(rng: np.random.Generator, max_angle: float = np.pi - 0.2) -> np.ndarray:
    """Uniform-axis random 3D rotation with angle uniform in [0, max_angle]."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return so_exp(axis * rng.uniform(0.0, max_angle))
