"""Environment generation and measurement simulation.

Worlds are built around a near-circular trajectory whose per-step odometry
magnitudes are configuration parameters; small deterministic modulations of
yaw, pitch and the translation direction keep the excitation generic.
Features are laid out so that every step sees at least one of them inside
the visibility radius.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ekf_core import NoiseSpec
from ..errors import InfeasibleSpecError
from ..liegroups import so_exp
from ..slam.models import AppModel, make_cp_model, make_plane_model, make_point_model
from ..slam.states import Odometry, perturb_odometry

APP_NAMES = ("point", "cp-known", "cp-unknown", "plane")


@dataclass(frozen=True)
class EnvironmentSpec:
    """Generator parameters for one simulated world."""

    app: str = "point"
    feature_count: int = 20
    steps: int = 600
    step_rotation: float = 0.02
    step_translation: float = 0.25
    visibility_radius: float = 5.0
    seed: int = 1
    height: float = -1.5  # shared feature height for cp worlds

    def __post_init__(self):
        if self.app not in APP_NAMES:
            raise InfeasibleSpecError(f"unknown app {self.app!r}")
        if self.feature_count < 1 or self.steps < 2 or self.visibility_radius <= 0:
            raise InfeasibleSpecError("feature_count >= 1, steps >= 2, visibility > 0 required")

    @property
    def circle_radius(self) -> float:
        return self.step_translation / self.step_rotation

    def model(self) -> AppModel:
        if self.app == "point":
            return make_point_model(self.feature_count)
        if self.app == "cp-known":
            return make_cp_model(self.feature_count, "known", self.height)
        if self.app == "cp-unknown":
            return make_cp_model(self.feature_count, "unknown")
        return make_plane_model(self.feature_count)


@dataclass
class World:
    """Ground truth: trajectory, true odometry, features, and visibility sets."""

    spec: EnvironmentSpec
    rotations: list  # steps+1 rotation matrices
    positions: np.ndarray  # (steps+1, 3)
    odometry: list  # steps Odometry values
    features: np.ndarray  # point (K,3) | cp (K,2) | plane (K,3)
    height: float | None
    visible: list  # per step 0..steps, sorted feature id list

    @property
    def steps(self) -> int:
        return len(self.odometry)

    def truth_state(self, model: AppModel, step: int, feature_ids):
        """Filter-shaped ground-truth state at a step for the given feature order."""
        feats = self.features[list(feature_ids)] if feature_ids else self.features[:0]
        if model.name == "cp" and model.estimates_height:
            from ..slam.states import CpState

            return CpState(self.rotations[step], self.positions[step], feats, self.height)
        if model.name == "cp":
            from ..slam.states import CpState

            return CpState(self.rotations[step], self.positions[step], feats, None)
        if model.name == "plane":
            from ..slam.states import PlaneState

            return PlaneState(self.rotations[step], self.positions[step], feats)
        from ..slam.states import PointState

        return PointState(self.rotations[step], self.positions[step], feats)

    def point_view(self) -> "World":
        """Lift a cp world to a plain point-feature world (constraint dropped)."""
        if self.spec.app not in ("cp-known", "cp-unknown"):
            raise InfeasibleSpecError("point_view expects a cp world")
        lifted = np.column_stack([self.features, np.full(len(self.features), self.height)])
        spec = EnvironmentSpec(
            app="point",
            feature_count=self.spec.feature_count,
            steps=self.spec.steps,
            step_rotation=self.spec.step_rotation,
            step_translation=self.spec.step_translation,
            visibility_radius=self.spec.visibility_radius,
            seed=self.spec.seed,
        )
        return World(spec, self.rotations, self.positions, self.odometry, lifted, None, self.visible)


def _trajectory(spec: EnvironmentSpec):
    """Near-circular trajectory from smoothly modulated odometry increments."""
    yaw0, trans0 = spec.step_rotation, spec.step_translation
    rotations = [np.eye(3)]
    positions = [np.array([spec.circle_radius, 0.0, 0.0])]
    odometry = []
    for n in range(spec.steps):
        yaw = yaw0 * (1.0 + 0.2 * np.sin(2.0 * np.pi * n / 97.0))
        pitch = 0.15 * yaw0 * np.sin(2.0 * np.pi * n / 53.0)
        r_u = so_exp(np.array([0.0, 0.0, yaw])) @ so_exp(np.array([0.0, pitch, 0.0]))
        p_u = trans0 * np.array(
            [1.0, 0.04 * np.sin(2.0 * np.pi * n / 61.0), 0.03 * np.sin(2.0 * np.pi * n / 41.0)]
        )
        u = Odometry(r_u, p_u)
        odometry.append(u)
        rotations.append(rotations[-1] @ r_u)
        positions.append(positions[-1] + rotations[-2] @ p_u)
    return rotations, np.array(positions), odometry


def _visible_sets(model: AppModel, world: World) -> list:
    vis = []
    for step in range(world.steps + 1):
        ids = []
        truth = world.truth_state(model, step, list(range(len(world.features))))
        for j in range(len(world.features)):
            if np.linalg.norm(model.observe(truth, j)) <= world.spec.visibility_radius:
                ids.append(j)
        vis.append(ids)
    return vis


def _feature_for_anchor(spec, positions, anchor, rng):
    anchor = int(np.clip(anchor, 0, len(positions) - 2))
    ahead = positions[anchor + 1, 0:2] - positions[anchor, 0:2]
    norm = np.linalg.norm(ahead)
    ahead = ahead / norm if norm > 0 else np.array([1.0, 0.0])
    side = np.array([-ahead[1], ahead[0]])
    lateral = rng.uniform(0.8, 2.0) * rng.choice([-1.0, 1.0])
    xy = positions[anchor, 0:2] + lateral * side
    if spec.app == "point":
        z = positions[anchor, 2] + rng.uniform(-1.2, 1.2)
        return np.array([xy[0], xy[1], z])
    return xy


def _covered(spec, positions, feature) -> np.ndarray:
    """Steps from which the feature is inside the visibility radius."""
    if spec.app == "point":
        target = feature
        delta = positions - target[None, :]
    else:
        target = np.array([feature[0], feature[1], spec.height])
        delta = positions - target[None, :]
    return np.linalg.norm(delta, axis=1) <= spec.visibility_radius


def _place_point_like(spec: EnvironmentSpec, positions: np.ndarray, rng) -> np.ndarray:
    """Coverage-greedy placement alongside the trajectory.

    Walk the trajectory and drop a feature slightly ahead of the first step
    that no earlier feature covers; surplus features go to random anchors.
    """
    k = spec.feature_count
    lookahead = max(int(0.5 * spec.visibility_radius / max(spec.step_translation, 1e-9)), 1)
    covered = np.zeros(len(positions), dtype=bool)
    feats = []
    while len(feats) < k and not covered.all():
        first_gap = int(np.argmin(covered))
        feat = _feature_for_anchor(spec, positions, first_gap + lookahead, rng)
        feats.append(feat)
        covered |= _covered(spec, positions, feat)
    while len(feats) < k:
        anchor = int(rng.integers(0, len(positions) - 1))
        feats.append(_feature_for_anchor(spec, positions, anchor, rng))
    return np.array(feats)


def _place_planes(spec: EnvironmentSpec, positions: np.ndarray, rng) -> np.ndarray:
    """Floor/ceiling plus walls whose closest points stay off the trajectory."""
    k = spec.feature_count
    radius = spec.circle_radius
    planes = [
        np.array([0.0, 0.0, -1.0]) * rng.uniform(1.4, 1.8),  # floor below
        np.array([0.0, 0.0, 1.0]) * rng.uniform(2.2, 2.8),  # ceiling above
    ]
    for i in range(k - 2):
        psi = 2.0 * np.pi * i / max(k - 2, 1) + rng.uniform(-0.1, 0.1)
        tilt = rng.uniform(-0.15, 0.15)
        normal = np.array([np.cos(psi) * np.cos(tilt), np.sin(psi) * np.cos(tilt), np.sin(tilt)])
        d = radius + rng.uniform(1.5, 3.0)
        planes.append(d * normal)
    return np.array(planes[:k])


def generate_environment(spec: EnvironmentSpec, max_retries: int = 20) -> World:
    """Deterministic world for a spec; retries placement until every step sees a feature."""
    rotations, positions, odometry = _trajectory(spec)
    model = spec.model()
    for attempt in range(max_retries):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, attempt]))
        if spec.app == "plane":
            feats = _place_planes(spec, positions, rng)
        else:
            feats = _place_point_like(spec, positions, rng)
        world = World(
            spec,
            rotations,
            positions,
            odometry,
            feats,
            spec.height if spec.app.startswith("cp") else None,
            [],
        )
        world.visible = _visible_sets(model, world)
        if all(len(v) >= 1 for v in world.visible):
            return world
    raise InfeasibleSpecError(f"no feasible feature placement after {max_retries} tries")


@dataclass(frozen=True)
class StepMeasurements:
    odometry: Odometry
    observations: tuple  # ((feature id, z), ...) sorted by id


def simulate_measurements(world: World, noise: NoiseSpec | None, seed: int) -> list:
    """Noisy odometry and per-feature observations; entry 0 has no odometry.

    Deterministic under the seed; the observation set at each step is the
    set of features within the visibility radius of the true state.
    ``noise=None`` produces exact measurements.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    model = world.spec.model()
    out = []
    all_ids = list(range(len(world.features)))
    for step in range(world.steps + 1):
        if step == 0:
            odo = None
        elif noise is None:
            odo = world.odometry[step - 1]
        else:
            w = np.concatenate(
                [
                    noise.sigma_w1 * rng.standard_normal(3),
                    noise.sigma_w2 * rng.standard_normal(3),
                ]
            )
            odo = perturb_odometry(world.odometry[step - 1], w)
        truth = world.truth_state(model, step, all_ids)
        obs = []
        for j in world.visible[step]:
            z = model.observe(truth, j)
            if noise is not None:
                z = z + noise.sigma_v * rng.standard_normal(3)
            obs.append((j, z))
        out.append(StepMeasurements(odo, tuple(obs)))
    return out


def mean_observation_distance(world: World) -> float:
    model = world.spec.model()
    all_ids = list(range(len(world.features)))
    dists = []
    for step in range(world.steps + 1):
        truth = world.truth_state(model, step, all_ids)
        for j in world.visible[step]:
            dists.append(np.linalg.norm(model.observe(truth, j)))
    return float(np.mean(dists))
