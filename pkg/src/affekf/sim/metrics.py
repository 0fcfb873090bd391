"""RMSE/NEES metrics shared by the filters and the calibration harness."""
from __future__ import annotations

import numpy as np

from ..errors import SingularCovarianceError


def nees(eps: np.ndarray, cov: np.ndarray, dim: int | None = None) -> float:
    """Normalized estimation error squared: eps' P^-1 eps / dim."""
    eps = np.asarray(eps, dtype=float)
    if dim is None:
        dim = eps.size
    try:
        value = float(eps @ np.linalg.solve(cov, eps)) / dim
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("covariance block is numerically singular") from exc
    if not np.isfinite(value):
        raise SingularCovarianceError("covariance block is numerically singular")
    return value


def block_nees(eps: np.ndarray, cov: np.ndarray, starts: np.ndarray, width: int) -> np.ndarray:
    """NEES of equally-sized diagonal blocks, batched (one value per block)."""
    rows = starts[:, None] + np.arange(width)[None, :]
    blocks = cov[rows[:, :, None], rows[:, None, :]]
    vecs = eps[rows]
    try:
        sol = np.linalg.solve(blocks, vecs[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("feature covariance block is singular") from exc
    return np.einsum("ij,ij->i", vecs, sol) / width


def rmse_series(errors: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-step RMSE over runs and its trajectory average.

    ``errors`` has shape (runs, steps); the per-step RMSE is the root mean
    square over runs, and the trajectory average is the mean over steps.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 2 or errors.shape[0] < 1:
        raise ValueError("errors must be a (runs, steps) array with at least one run")
    per_step = np.sqrt(np.mean(errors**2, axis=0))
    return per_step, float(np.mean(per_step))
