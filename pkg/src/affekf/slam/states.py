"""State and odometry containers for the SLAM applications.

All values are immutable after construction. Feature storage is one row per
feature: 3D positions (point), (x, y) plane coordinates (constrained
point), or closest-point plane vectors d * n (plane).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..liegroups import so_exp


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Odometry:
    """Relative pose increment (R_u, p_u) in the body frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(self.rotation))
        object.__setattr__(self, "translation", _frozen(self.translation))


def perturb_odometry(u: Odometry, delta: np.ndarray) -> Odometry:
    """Apply the noise convention: rotation left-perturbed, translation additive."""
    return Odometry(so_exp(delta[:3]) @ u.rotation, u.translation + delta[3:])


@dataclass(frozen=True)
class PointState:
    """Robot pose plus K point features in the world frame."""

    rotation: np.ndarray
    position: np.ndarray
    features: np.ndarray  # (K, 3)

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(self.rotation))
        object.__setattr__(self, "position", _frozen(self.position))
        object.__setattr__(self, "features", _frozen(np.reshape(self.features, (-1, 3))))

    @property
    def num_features(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class CpState:
    """Robot pose plus K point features constrained to a horizontal plane.

    ``height`` is the shared feature z-coordinate when it is being
    estimated; None in the known-height scenario (the model carries the
    constant) and before the height has been initialized.
    """

    rotation: np.ndarray
    position: np.ndarray
    features: np.ndarray  # (K, 2)
    height: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(self.rotation))
        object.__setattr__(self, "position", _frozen(self.position))
        object.__setattr__(self, "features", _frozen(np.reshape(self.features, (-1, 2))))

    @property
    def num_features(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class PlaneState:
    """Robot pose plus K planes in closest-point form (each row is d * n)."""

    rotation: np.ndarray
    position: np.ndarray
    planes: np.ndarray  # (K, 3)

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(self.rotation))
        object.__setattr__(self, "position", _frozen(self.position))
        object.__setattr__(self, "planes", _frozen(np.reshape(self.planes, (-1, 3))))

    @property
    def num_features(self) -> int:
        return self.planes.shape[0]
