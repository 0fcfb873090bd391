"""Application models: process/observation functions, analytic Jacobians in
the standard atlas, consistency-preserving affine maps, and analytic
unobservable-subspace bases.

Three applications share the pose kinematics (R <- R R_u, p <- p + R p_u)
and differ in the feature parameterization:

* point features: world 3-vectors, observed as R^T (p_f - p_r);
* constrained points: features on a horizontal plane z = c (c known or
  estimated), same observation with p_f = (x, y, c);
* planes in closest-point form p_f = d * n, observed as
  (d - p_r . n) R^T n.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import replace
from typing import Callable

import numpy as np

from ..atlas import Atlas
from ..errors import (
    DegenerateObservationError,
    DegeneratePlaneError,
    VariantUnsupportedError,
)
from ..liegroups import (
    SEkElement,
    random_rotation,
    sek_exp,
    sek_log,
    skew,
    skew_batch,
    so_exp,
    so_log,
)
from .states import CpState, Odometry, PlaneState, PointState

# Planes closer than this to the origin-side singularity are rejected.
PLANE_D_MIN = 0.05


def _set_block_diag(a: np.ndarray, offset: int, count: int, block: np.ndarray) -> None:
    """Write the same 3x3 block onto `count` diagonal slots starting at offset."""
    rows = offset + np.arange(3 * count).reshape(count, 3)
    a[rows[:, :, None], rows[:, None, :]] = block


class StandardAtlas(Atlas):
    """Rotation log plus coordinate differences on the Euclidean part."""

    def __init__(self, model: "AppModel"):
        self.model = model

    def dim(self, center) -> int:
        return self.model.state_dim(center)

    def error(self, center, state) -> np.ndarray:
        eth = so_log(state.rotation @ center.rotation.T)
        return np.concatenate([eth, self.model.euclidean(state) - self.model.euclidean(center)])

    def retract(self, center, eps: np.ndarray):
        rot = so_exp(eps[:3]) @ center.rotation
        return self.model.from_euclidean(rot, self.model.euclidean(center) + eps[3:], center)


class AppModel(ABC):
    """Behavior bundle for one SLAM application."""

    name: str
    feature_dim: int
    obs_dim: int = 3
    control_dim: int = 6

    def __init__(self, nominal_features: int):
        if nominal_features < 1:
            raise ValueError("need at least one feature")
        self.nominal_features = nominal_features

    # -- state structure ---------------------------------------------------
    @property
    def dim(self) -> int:
        """Error dimension for the nominal feature count."""
        return self.base_dim + self.feature_dim * self.nominal_features

    @property
    @abstractmethod
    def base_dim(self) -> int:
        """Error dimension of the feature-free part (pose, plus c if estimated)."""

    def state_dim(self, x) -> int:
        return 3 + self.euclidean(x).size

    @abstractmethod
    def euclidean(self, x) -> np.ndarray:
        """All non-rotation coordinates in error-vector order."""

    @abstractmethod
    def from_euclidean(self, rotation, e, like):
        """Rebuild a state from a rotation and the euclidean coordinate vector."""

    def num_features(self, x) -> int:
        return x.num_features

    def feature_slice(self, x, j: int) -> slice:
        start = self.base_dim + self.feature_dim * j
        return slice(start, start + self.feature_dim)

    @abstractmethod
    def feature_params(self, x, j: int) -> np.ndarray:
        ...

    @abstractmethod
    def replace_feature(self, x, j: int, params):
        ...

    def replace_position(self, x, position):
        return replace(x, position=np.asarray(position, dtype=float))

    # -- dynamics and observation -------------------------------------------
    def process(self, x, u: Odometry):
        """Compose the pose with the odometry; features are static."""
        return replace(
            x,
            rotation=x.rotation @ u.rotation,
            position=x.position + x.rotation @ u.translation,
        )

    @abstractmethod
    def observe(self, x, j: int) -> np.ndarray:
        ...

    # -- analytic Jacobians in the standard atlas ----------------------------
    def propagation_jacobians(self, x_prev, x_pred) -> tuple[np.ndarray, np.ndarray]:
        """F and G of the process model evaluated at the two given states."""
        m = self.state_dim(x_pred)
        f = np.eye(m)
        f[3:6, 0:3] = -skew(x_pred.position - x_prev.position)
        g = np.zeros((m, self.control_dim))
        g[0:3, 0:3] = x_prev.rotation
        g[3:6, 3:6] = x_prev.rotation
        return f, g

    @abstractmethod
    def obs_jacobian(self, x, j: int) -> np.ndarray:
        ...

    def stacked_obs_jacobian(self, x) -> np.ndarray:
        return np.vstack([self.obs_jacobian(x, j) for j in range(self.num_features(x))])

    # -- consistency machinery ------------------------------------------------
    def standard_atlas(self) -> StandardAtlas:
        return StandardAtlas(self)

    @abstractmethod
    def affine_map(self, variant: str) -> Callable:
        """State -> A_X for the named consistency-preserving atlas."""

    def affine_map_inverse(self, variant: str) -> Callable:
        """State -> A_X^-1; overridden with closed forms per application."""
        fn = self.affine_map(variant)
        return lambda x: np.linalg.inv(fn(x))

    @abstractmethod
    def true_nullspace(self, x) -> np.ndarray:
        """Analytic unobservable-subspace basis of the underlying system at x."""

    @abstractmethod
    def init_feature(self, x, z: np.ndarray):
        """Invert the observation at the estimate x; returns (state, J_state, J_obs)."""

    @abstractmethod
    def random_state(self, rng: np.random.Generator, n_features: int | None = None):
        ...

    @abstractmethod
    def blank_state(self, rotation, position):
        """Feature-free state at a pose (nothing about the map assumed known)."""

    def random_odometry(self, rng: np.random.Generator) -> Odometry:
        return Odometry(random_rotation(rng, 0.5), rng.uniform(-1.0, 1.0, size=3))


class PointModel(AppModel):
    name = "point"
    feature_dim = 3

    @property
    def base_dim(self) -> int:
        return 6

    def euclidean(self, x: PointState) -> np.ndarray:
        return np.concatenate([x.position, x.features.ravel()])

    def from_euclidean(self, rotation, e, like: PointState) -> PointState:
        return PointState(rotation, e[:3], e[3:].reshape(-1, 3))

    def feature_params(self, x, j):
        return x.features[j]

    def replace_feature(self, x, j, params):
        feats = x.features.copy()
        feats[j] = params
        return replace(x, features=feats)

    def observe(self, x: PointState, j: int) -> np.ndarray:
        return x.rotation.T @ (x.features[j] - x.position)

    def obs_jacobian(self, x: PointState, j: int) -> np.ndarray:
        m = self.state_dim(x)
        rt = x.rotation.T
        h = np.zeros((3, m))
        h[:, 0:3] = rt @ skew(x.features[j] - x.position)
        h[:, 3:6] = -rt
        h[:, self.feature_slice(x, j)] = rt
        return h

    def affine_map(self, variant: str) -> Callable[[PointState], np.ndarray]:
        if variant not in ("v1", "v2"):
            raise VariantUnsupportedError(f"point model has no affine map {variant!r}")

        def a_v1(x: PointState) -> np.ndarray:
            m = self.state_dim(x)
            a = np.eye(m)
            a[3:6, 0:3] = skew(x.position)
            a[6:, 0:3] = skew_batch(x.features).reshape(-1, 3)
            return a

        def a_v2(x: PointState) -> np.ndarray:
            m = self.state_dim(x)
            rt = x.rotation.T
            a = np.eye(m)
            a[3:6, 0:3] = rt @ skew(x.position)
            a[3:6, 3:6] = rt
            a[6:, 0:3] = np.matmul(rt, skew_batch(x.features)).reshape(-1, 3)
            _set_block_diag(a, 6, x.num_features, rt)
            return a

        return a_v1 if variant == "v1" else a_v2

    def affine_map_inverse(self, variant: str) -> Callable[[PointState], np.ndarray]:
        if variant not in ("v1", "v2"):
            raise VariantUnsupportedError(f"point model has no affine map {variant!r}")

        def inv_v1(x: PointState) -> np.ndarray:
            a = np.eye(self.state_dim(x))
            a[3:6, 0:3] = -skew(x.position)
            a[6:, 0:3] = -skew_batch(x.features).reshape(-1, 3)
            return a

        def inv_v2(x: PointState) -> np.ndarray:
            a = np.eye(self.state_dim(x))
            a[3:6, 0:3] = -skew(x.position)
            a[3:6, 3:6] = x.rotation
            a[6:, 0:3] = -skew_batch(x.features).reshape(-1, 3)
            _set_block_diag(a, 6, x.num_features, x.rotation)
            return a

        return inv_v1 if variant == "v1" else inv_v2

    def true_nullspace(self, x: PointState) -> np.ndarray:
        m = self.state_dim(x)
        n = np.zeros((m, 6))
        n[0:3, 0:3] = np.eye(3)
        n[3:6, 0:3] = -skew(x.position)
        n[3:6, 3:6] = np.eye(3)
        for j in range(x.num_features):
            sl = self.feature_slice(x, j)
            n[sl, 0:3] = -skew(x.features[j])
            n[sl, 3:6] = np.eye(3)
        return n

    def init_feature(self, x: PointState, z: np.ndarray):
        m = self.state_dim(x)
        body = x.rotation @ z
        new = replace(x, features=np.vstack([x.features, x.position + body]))
        j_x = np.zeros((3, m))
        j_x[:, 0:3] = -skew(body)
        j_x[:, 3:6] = np.eye(3)
        return new, j_x, x.rotation.copy()


    def blank_state(self, rotation, position) -> PointState:
        return PointState(rotation, position, np.zeros((0, 3)))

    def random_state(self, rng, n_features=None) -> PointState:
        k = self.nominal_features if n_features is None else n_features
        return PointState(
            random_rotation(rng),
            rng.uniform(-5.0, 5.0, size=3),
            rng.uniform(-5.0, 5.0, size=(k, 3)),
        )


class CpModel(AppModel):
    """Point features sharing a horizontal-plane height c.

    ``height_mode`` is "known" (c fixed in the model) or "unknown" (c is a
    state coordinate placed between the pose and the feature block).
    """

    name = "cp"
    feature_dim = 2

    def __init__(self, nominal_features: int, height_mode: str, known_height: float = 0.0):
        super().__init__(nominal_features)
        if height_mode not in ("known", "unknown"):
            raise ValueError(f"bad height_mode {height_mode!r}")
        self.height_mode = height_mode
        self.known_height = known_height

    @property
    def estimates_height(self) -> bool:
        return self.height_mode == "unknown"

    @property
    def base_dim(self) -> int:
        return 7 if self.estimates_height else 6

    def _height_of(self, x: CpState) -> float:
        if self.estimates_height:
            if x.height is None:
                raise ValueError("height not initialized in unknown-height mode")
            return x.height
        return self.known_height

    def euclidean(self, x: CpState) -> np.ndarray:
        parts = [x.position]
        if self.estimates_height and x.height is not None:
            parts.append(np.array([x.height]))
        parts.append(x.features.ravel())
        return np.concatenate(parts)

    def from_euclidean(self, rotation, e, like: CpState) -> CpState:
        if self.estimates_height and like.height is not None:
            return CpState(rotation, e[:3], e[4:].reshape(-1, 2), float(e[3]))
        return CpState(rotation, e[:3], e[3:].reshape(-1, 2), like.height)

    def feature_params(self, x, j):
        return x.features[j]

    def replace_feature(self, x, j, params):
        feats = x.features.copy()
        feats[j] = params
        return replace(x, features=feats)

    def feature_point(self, x: CpState, j: int) -> np.ndarray:
        return np.array([x.features[j, 0], x.features[j, 1], self._height_of(x)])

    def observe(self, x: CpState, j: int) -> np.ndarray:
        return x.rotation.T @ (self.feature_point(x, j) - x.position)

    def obs_jacobian(self, x: CpState, j: int) -> np.ndarray:
        m = self.state_dim(x)
        rt = x.rotation.T
        h = np.zeros((3, m))
        h[:, 0:3] = rt @ skew(self.feature_point(x, j) - x.position)
        h[:, 3:6] = -rt
        if self.estimates_height:
            h[:, 6] = rt[:, 2]
        h[:, self.feature_slice(x, j)] = rt[:, 0:2]
        return h

    def affine_map(self, variant: str) -> Callable[[CpState], np.ndarray]:
        if variant != "aff":
            raise VariantUnsupportedError(f"cp model has no affine map {variant!r}")

        def a_cp(x: CpState) -> np.ndarray:
            # Only the yaw column picks up state entries; everything else is identity.
            a = np.eye(self.state_dim(x))
            a[3, 2] = x.position[1]
            a[4, 2] = -x.position[0]
            for j in range(x.num_features):
                s = self.feature_slice(x, j).start
                a[s, 2] = x.features[j, 1]
                a[s + 1, 2] = -x.features[j, 0]
            return a

        return a_cp

    def affine_map_inverse(self, variant: str) -> Callable[[CpState], np.ndarray]:
        fwd = self.affine_map(variant)

        def inv_cp(x: CpState) -> np.ndarray:
            a = fwd(x)
            a[3:, 2] = -a[3:, 2]
            return a

        return inv_cp

    def true_nullspace(self, x: CpState) -> np.ndarray:
        m = self.state_dim(x)
        cols = 4 if self.estimates_height else 3
        n = np.zeros((m, cols))
        yaw = cols - 1
        n[2, yaw] = 1.0
        n[3, 0] = 1.0
        n[4, 1] = 1.0
        n[3, yaw] = -x.position[1]
        n[4, yaw] = x.position[0]
        if self.estimates_height:
            n[5, 2] = 1.0  # vertical shift moves the robot ...
            n[6, 2] = 1.0  # ... together with the shared height
        for j in range(x.num_features):
            s = self.feature_slice(x, j).start
            n[s, 0] = 1.0
            n[s + 1, 1] = 1.0
            n[s, yaw] = -x.features[j, 1]
            n[s + 1, yaw] = x.features[j, 0]
        return n

    def init_feature(self, x: CpState, z: np.ndarray):
        m = self.state_dim(x)
        body = x.rotation @ z
        point = x.position + body
        j_point = np.zeros((3, m))
        j_point[:, 0:3] = -skew(body)
        j_point[:, 3:6] = np.eye(3)
        feats = np.vstack([x.features, point[0:2]])
        if self.estimates_height and x.height is None:
            # First sighting also initializes the shared height from the
            # third inverted component; new coordinates are (c, x, y).
            new = CpState(x.rotation, x.position, feats, float(point[2]))
            order = [2, 0, 1]
            return new, j_point[order], x.rotation[order, :].copy()
        new = replace(x, features=feats)
        return new, j_point[0:2], x.rotation[0:2, :].copy()


    def blank_state(self, rotation, position) -> CpState:
        return CpState(rotation, position, np.zeros((0, 2)), None)

    def random_state(self, rng, n_features=None) -> CpState:
        k = self.nominal_features if n_features is None else n_features
        height = rng.uniform(-3.0, 3.0) if self.estimates_height else None
        return CpState(
            random_rotation(rng),
            rng.uniform(-5.0, 5.0, size=3),
            rng.uniform(-5.0, 5.0, size=(k, 2)),
            height,
        )


class PlaneModel(AppModel):
    name = "plane"
    feature_dim = 3

    @property
    def base_dim(self) -> int:
        return 6

    def euclidean(self, x: PlaneState) -> np.ndarray:
        return np.concatenate([x.position, x.planes.ravel()])

    def from_euclidean(self, rotation, e, like: PlaneState) -> PlaneState:
        return PlaneState(rotation, e[:3], e[3:].reshape(-1, 3))

    def feature_params(self, x, j):
        return x.planes[j]

    def replace_feature(self, x, j, params):
        planes = x.planes.copy()
        planes[j] = params
        return replace(x, planes=planes)

    def _plane(self, x: PlaneState, j: int) -> tuple[float, np.ndarray]:
        pf = x.planes[j]
        d = float(np.linalg.norm(pf))
        if d < PLANE_D_MIN:
            raise DegeneratePlaneError(f"plane {j} has d = {d:.4f} < {PLANE_D_MIN}")
        return d, pf / d

    def _plane_batch(self, x: PlaneState):
        d = np.linalg.norm(x.planes, axis=1)
        if x.num_features and d.min() < PLANE_D_MIN:
            raise DegeneratePlaneError(f"a plane has d = {d.min():.4f} < {PLANE_D_MIN}")
        n = x.planes / d[:, None]
        return d, n, n[:, :, None] * n[:, None, :]

    def observe(self, x: PlaneState, j: int) -> np.ndarray:
        d, n = self._plane(x, j)
        return (d - x.position @ n) * (x.rotation.T @ n)

    def obs_jacobian(self, x: PlaneState, j: int) -> np.ndarray:
        m = self.state_dim(x)
        d, n = self._plane(x, j)
        pr = x.position
        rt = x.rotation.T
        nnt = np.outer(n, n)
        depth = d - pr @ n
        h1 = depth * skew(n)
        h2 = -nnt
        h3 = (depth * np.eye(3) - np.outer(n, pr) + 2.0 * (n @ pr) * nnt) / d
        h = np.zeros((3, m))
        h[:, 0:3] = rt @ h1
        h[:, 3:6] = rt @ h2
        h[:, self.feature_slice(x, j)] = rt @ h3
        return h

    def affine_map(self, variant: str) -> Callable[[PlaneState], np.ndarray]:
        if variant != "aff":
            raise VariantUnsupportedError(f"plane model has no affine map {variant!r}")

        def a_plane(x: PlaneState) -> np.ndarray:
            a = np.eye(self.state_dim(x))
            psk = skew(x.position)
            a[3:6, 0:3] = psk
            d, n, nnt = self._plane_batch(x)
            a[6:, 0:3] = (d[:, None, None] * skew_batch(n) - nnt @ psk).reshape(-1, 3)
            a[6:, 3:6] = -nnt.reshape(-1, 3)
            return a

        return a_plane

    def affine_map_inverse(self, variant: str) -> Callable[[PlaneState], np.ndarray]:
        if variant != "aff":
            raise VariantUnsupportedError(f"plane model has no affine map {variant!r}")

        def inv_plane(x: PlaneState) -> np.ndarray:
            a = np.eye(self.state_dim(x))
            a[3:6, 0:3] = -skew(x.position)
            d, n, nnt = self._plane_batch(x)
            a[6:, 0:3] = (-d[:, None, None] * skew_batch(n)).reshape(-1, 3)
            a[6:, 3:6] = nnt.reshape(-1, 3)
            return a

        return inv_plane

    def true_nullspace(self, x: PlaneState) -> np.ndarray:
        m = self.state_dim(x)
        n_basis = np.zeros((m, 6))
        n_basis[0:3, 3:6] = np.eye(3)
        n_basis[3:6, 0:3] = np.eye(3)
        n_basis[3:6, 3:6] = -skew(x.position)
        for j in range(x.num_features):
            d, n = self._plane(x, j)
            sl = self.feature_slice(x, j)
            n_basis[sl, 0:3] = np.outer(n, n)
            n_basis[sl, 3:6] = -d * skew(n)
        return n_basis

    def init_feature(self, x: PlaneState, z: np.ndarray):
        """Closest-point initialization: d_r = |z|, n = R z / |z|, d = d_r + p.n."""
        m = self.state_dim(x)
        r = float(np.linalg.norm(z))
        if r < 1e-6:
            raise DegenerateObservationError("plane observation too short to invert")
        w = x.rotation @ z
        pr = x.position
        pf = w + (pr @ w) * w / r**2
        dg_dw = (
            np.eye(3) * (1.0 + (pr @ w) / r**2)
            + np.outer(w, pr) / r**2
            - 2.0 * (pr @ w) * np.outer(w, w) / r**4
        )
        new = replace(x, planes=np.vstack([x.planes, pf]))
        j_x = np.zeros((3, m))
        j_x[:, 0:3] = dg_dw @ (-skew(w))
        j_x[:, 3:6] = np.outer(w, w) / r**2
        return new, j_x, dg_dw @ x.rotation


    def blank_state(self, rotation, position) -> PlaneState:
        return PlaneState(rotation, position, np.zeros((0, 3)))

    def random_state(self, rng, n_features=None) -> PlaneState:
        k = self.nominal_features if n_features is None else n_features
        normals = rng.normal(size=(k, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        dists = rng.uniform(0.5, 5.0, size=(k, 1))
        return PlaneState(
            random_rotation(rng),
            rng.uniform(-5.0, 5.0, size=3),
            dists * normals,
        )


class RIChartAtlas(Atlas):
    """Group chart for point SLAM: log of the right difference on SE_{K+1}(3).

    Its first-order linearization relative to the standard chart is the
    block map that also defines the first affine point-SLAM atlas.
    """

    def __init__(self, model: PointModel):
        self.model = model
        self._affine = model.affine_map("v1")

    @staticmethod
    def _to_group(x: PointState) -> SEkElement:
        return SEkElement(x.rotation, np.vstack([x.position[None, :], x.features]))

    @staticmethod
    def _from_group(el: SEkElement) -> PointState:
        return PointState(el.rotation, el.columns[0], el.columns[1:])

    def dim(self, center) -> int:
        return self.model.state_dim(center)

    def error(self, center, state) -> np.ndarray:
        return sek_log(self._to_group(state).compose(self._to_group(center).inverse()))

    def retract(self, center, eps: np.ndarray):
        return self._from_group(sek_exp(eps, d=3).compose(self._to_group(center)))

    def linearization(self, center) -> np.ndarray:
        return self._affine(center)


def ri_chart(model: PointModel) -> RIChartAtlas:
    if not isinstance(model, PointModel):
        raise VariantUnsupportedError("the group chart is only defined for point features")
    return RIChartAtlas(model)


def make_point_model(n_features: int) -> PointModel:
    return PointModel(n_features)


def make_cp_model(n_features: int, height_mode: str, known_height: float = 0.0) -> CpModel:
    return CpModel(n_features, height_mode, known_height)


def make_plane_model(n_features: int) -> PlaneModel:
    return PlaneModel(n_features)


def point_nullspace_2d(position: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Planar analogue of the point-SLAM unobservable basis (checker parity only)."""
    j = np.array([[0.0, -1.0], [1.0, 0.0]])
    k = features.shape[0]
    n = np.zeros((3 + 2 * k, 3))
    n[0, 0] = 1.0
    n[1:3, 0] = j @ position
    n[1:3, 1:3] = np.eye(2)
    for i in range(k):
        n[3 + 2 * i : 5 + 2 * i, 0] = j @ features[i]
        n[3 + 2 * i : 5 + 2 * i, 1:3] = np.eye(2)
    return n
