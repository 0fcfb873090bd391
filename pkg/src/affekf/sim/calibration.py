"""NEES calibration on a synthetic linear-Gaussian filtering problem.

Runs an exactly-matched Kalman filter through the generic machinery and
feeds the errors through the same NEES computation used by the SLAM
harness; a consistent pipeline must average to 1.
"""
from __future__ import annotations

import numpy as np

from ..atlas import Atlas
from ..ekf_core import GaussianBelief, propagate_with, update
from .metrics import nees


class VectorAtlas(Atlas):
    """Identity chart on R^n."""

    def __init__(self, n: int):
        self.n = n

    def dim(self, center) -> int:
        return self.n

    def error(self, center, state) -> np.ndarray:
        return np.asarray(state, dtype=float) - np.asarray(center, dtype=float)

    def retract(self, center, eps: np.ndarray) -> np.ndarray:
        return np.asarray(center, dtype=float) + eps


def linear_gaussian_nees(
    samples: int = 100_000,
    steps_per_run: int = 500,
    seed: int = 0,
    dim: int = 2,
) -> float:
    """Mean NEES over at least ``samples`` filter steps of a linear system."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    theta = 0.3
    f_mat = 0.97 * np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    if dim != 2:
        f_mat = 0.97 * np.eye(dim)
    h_mat = np.eye(dim)[:1]  # observe the first coordinate
    q = 0.04 * np.eye(dim)
    r = 0.25 * np.eye(1)
    p0 = np.eye(dim)
    atlas = VectorAtlas(dim)

    runs = int(np.ceil(samples / steps_per_run))
    values = np.empty(runs * steps_per_run)
    idx = 0
    for _ in range(runs):
        x_true = rng.standard_normal(dim)
        x_est = x_true + np.linalg.cholesky(p0) @ rng.standard_normal(dim)
        belief = GaussianBelief(x_est, p0.copy(), atlas)
        for _ in range(steps_per_run):
            w = np.linalg.cholesky(q) @ rng.standard_normal(dim)
            x_true = f_mat @ x_true + w
            belief = propagate_with(
                belief, None, q, f=lambda x, _u: f_mat @ x, jac=lambda *_: (f_mat, np.eye(dim))
            )
            z = h_mat @ x_true + np.sqrt(r[0, 0]) * rng.standard_normal(1)
            belief = update(belief, z, r, h=lambda x: h_mat @ x, H=h_mat)
            values[idx] = nees(x_true - belief.state, belief.cov, dim)
            idx += 1
    return float(np.mean(values[:idx]))
