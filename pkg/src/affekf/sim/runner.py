"""Filter execution and Monte Carlo aggregation.

One run drives a filter variant over a simulated measurement sequence:
one propagation per step, augmentation on first sight, then sequential
per-feature updates. Errors are recorded in the standard atlas; NEES in
the filter's native atlas (pose marginal is the leading 6x6 block).
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..ekf_core import (
    GaussianBelief,
    NoiseSpec,
    affine_covariance_correction,
    augment_feature,
    propagate_with,
    update,
)
from ..errors import AffEkfError
from ..liegroups import project_to_rotation, so_log
from ..slam.variants import FilterVariant, make_variant
from .environment import EnvironmentSpec, World, generate_environment, simulate_measurements
from .metrics import block_nees, nees

# Rotation estimates are re-orthonormalized every this many steps.
REPROJECT_EVERY = 100


@dataclass(frozen=True)
class RunConfig:
    """Full Monte Carlo configuration."""

    env: EnvironmentSpec
    noise: NoiseSpec
    variants: tuple
    runs: int = 50
    seed: int = 0
    init_mode: str = "first_observation"  # or "prior_map"
    prior_sigma: float = 0.5
    out_dir: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs >= 1 required")
        if self.init_mode not in ("first_observation", "prior_map"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")


@dataclass
class RunResult:
    """Per-step series of one filter run (arrays of length steps)."""

    err_ori: np.ndarray
    err_pos: np.ndarray
    err_feat: np.ndarray
    nees_pose: np.ndarray
    nees_feat: np.ndarray
    bound_ori: np.ndarray
    bound_pos: np.ndarray
    failed: bool = False
    failure: str = ""
    final_belief: GaussianBelief | None = None
    feature_ids: list = field(default_factory=list)
    trace: list = field(default_factory=list)  # (x_pred, x_upd, cov, cov_precorr)
    x0: object = None


def _initial_belief(variant: FilterVariant, world: World, init_mode, prior_sigma, rng):
    model = variant.model
    if init_mode == "prior_map":
        fids = list(range(len(world.features)))
        truth = world.truth_state(model, 0, fids)
        feats = np.asarray(truth.features if model.name != "plane" else truth.planes)
        noisy = feats + prior_sigma * rng.standard_normal(feats.shape)
        x0 = model.replace_position(truth, truth.position)  # copy
        for j in range(len(fids)):
            x0 = model.replace_feature(x0, j, noisy[j])
        m = model.state_dim(x0)
        cov = np.zeros((m, m))
        idx = model.base_dim
        if model.name == "cp" and model.estimates_height:
            x0 = replace(x0, height=world.height + prior_sigma * rng.standard_normal())
            cov[6, 6] = prior_sigma**2
        cov[idx:, idx:] = prior_sigma**2 * np.eye(m - idx)
        return x0, cov, fids
    x0 = model.blank_state(world.rotations[0], world.positions[0])
    m = model.state_dim(x0)
    return x0, np.zeros((m, m)), []


def _std_pose_cov(belief: GaussianBelief, trivial: bool) -> np.ndarray:
    """Pose marginal of the covariance re-expressed in the standard atlas."""
    if trivial:
        return belief.cov[0:6, 0:6]
    a = belief.atlas.linearization(belief.state)
    rows = np.linalg.solve(a.T, np.eye(a.shape[0])[:, 0:6]).T  # first rows of A^-1
    return rows @ belief.cov @ rows.T


def run_filter(
    variant: FilterVariant,
    world: World,
    measurements: list,
    *,
    noise: NoiseSpec,
    init_mode: str = "first_observation",
    prior_sigma: float = 0.5,
    prior_rng: np.random.Generator | None = None,
    feature_error_dims: int | None = None,
    record_trace: bool = False,
) -> RunResult:
    model = variant.model
    sigma = noise.control_cov()
    omega = noise.obs_cov()
    steps = world.steps
    out = RunResult(*(np.full(steps, np.nan) for _ in range(7)))

    rng = prior_rng if prior_rng is not None else np.random.default_rng(0)
    x0, cov0, fids = _initial_belief(variant, world, init_mode, prior_sigma, rng)
    belief = GaussianBelief(x0, variant.initial_covariance(x0, cov0), variant.atlas)
    ctx = variant.start_run(x0)
    out.x0 = x0
    trivial_chart = variant.affine_fn is None or variant.implementation == "covariance"

    def do_augment(bel, fid, z):
        bel = augment_feature(bel, z, omega, init=model.init_feature)
        fids.append(fid)
        j = len(fids) - 1
        variant.note_augment(ctx, j, model.feature_params(bel.state, j))
        return bel

    sigma_diag = (noise.sigma_w1**2, noise.sigma_w2**2)
    try:
        if init_mode == "first_observation":
            for fid, z in measurements[0].observations:
                belief = do_augment(belief, fid, z)

        for step in range(1, steps + 1):
            meas = measurements[step]
            if variant.eval_policy == "truth":
                ctx.truth_prev = world.truth_state(model, step - 1, fids)
                ctx.truth_pred = world.truth_state(model, step, fids)
            if variant.identity_transition:
                x_next = model.process(belief.state, meas.odometry)
                p_next = variant.fast_propagated_cov(belief.cov, x_next, sigma_diag)
                belief = replace(belief, state=x_next, cov=p_next)
            elif variant.standard_transition:
                x_next = model.process(belief.state, meas.odometry)
                p_next = variant.fast_standard_propagated_cov(
                    belief.cov, ctx, belief.state, x_next, sigma_diag
                )
                belief = replace(belief, state=x_next, cov=p_next)
            else:
                belief = propagate_with(
                    belief,
                    meas.odometry,
                    sigma,
                    f=model.process,
                    jac=lambda xp, xq, u: variant.prop_jacobians(ctx, xp, xq),
                )
            variant.after_propagate(ctx, belief.state)

            new_this_step = set()
            for fid, z in meas.observations:
                if fid not in fids:
                    belief = do_augment(belief, fid, z)
                    new_this_step.add(fid)
                    if variant.eval_policy == "truth":
                        ctx.truth_pred = world.truth_state(model, step, fids)
            x_pred_state = belief.state
            cov_precorr = belief.cov
            a_inv = variant.begin_update_pass(x_pred_state)
            retract = variant.update_retraction(a_inv)

            for fid, z in meas.observations:
                if fid in new_this_step:
                    continue  # the sighting was consumed by the initialization
                j = fids.index(fid)
                h_mat = variant.obs_jacobian(ctx, x_pred_state, j, a_inv)
                belief = update(
                    belief, z, omega, h=lambda x, jj=j: model.observe(x, jj), H=h_mat,
                    retract=retract,
                )
            cov_precorr = belief.cov
            if variant.implementation == "covariance":
                belief = replace(
                    belief,
                    cov=affine_covariance_correction(
                        belief.cov,
                        variant.affine_fn(x_pred_state),
                        variant.affine_fn(belief.state),
                    ),
                )
            variant.after_step(ctx)

            if step % REPROJECT_EVERY == 0:
                belief = replace(
                    belief, state=replace(belief.state, rotation=project_to_rotation(belief.state.rotation))
                )

            _record(out, step - 1, belief, world, model, fids, feature_error_dims,
                    trivial_chart)
            if record_trace:
                out.trace.append((x_pred_state, belief.state, belief.cov.copy(), cov_precorr))
    except AffEkfError as exc:
        out.failed = True
        out.failure = f"step-level filter failure: {exc}"
    out.final_belief = belief
    out.feature_ids = list(fids)
    return out


def _record(out, idx, belief, world, model, fids, feature_error_dims, trivial_chart=False):
    step = idx + 1
    truth = world.truth_state(model, step, fids)
    x = belief.state
    out.err_ori[idx] = np.linalg.norm(so_log(truth.rotation @ x.rotation.T))
    out.err_pos[idx] = np.linalg.norm(truth.position - x.position)

    k = model.num_features(x)
    if k:
        dims = feature_error_dims or model.feature_dim
        est = np.asarray(x.features if model.name != "plane" else x.planes)[:, :dims]
        ref = np.asarray(truth.features if model.name != "plane" else truth.planes)[:, :dims]
        out.err_feat[idx] = np.sqrt(np.mean(np.sum((ref - est) ** 2, axis=1)))
    else:
        out.err_feat[idx] = 0.0

    eps = belief.atlas.error(x, truth)
    out.nees_pose[idx] = nees(eps[0:6], belief.cov[0:6, 0:6], 6)
    if k:
        starts = model.base_dim + model.feature_dim * np.arange(k)
        vals = block_nees(eps, belief.cov, starts, model.feature_dim)
        out.nees_feat[idx] = float(np.mean(vals))
    else:
        out.nees_feat[idx] = 0.0

    p_std = _std_pose_cov(belief, trivial_chart)
    out.bound_ori[idx] = 3.0 * np.sqrt(max(np.trace(p_std[0:3, 0:3]), 0.0))
    out.bound_pos[idx] = 3.0 * np.sqrt(max(np.trace(p_std[3:6, 3:6]), 0.0))


@dataclass
class VariantSummary:
    variant: str
    rmse_ori: float
    rmse_pos: float
    rmse_feat: float
    nees_pose: float
    nees_feat: float
    time_s: float


@dataclass
class VariantSeries:
    variant: str
    rmse_ori: np.ndarray
    rmse_pos: np.ndarray
    nees_pose: np.ndarray
    nees_feat: np.ndarray
    err_ori: np.ndarray  # run 0
    err_pos: np.ndarray
    bound_ori: np.ndarray
    bound_pos: np.ndarray


@dataclass
class MonteCarloReport:
    config: RunConfig
    summaries: list
    series: list
    world: World
    incomplete: bool = False
    failed_runs: list = field(default_factory=list)


def _variant_for(config: RunConfig, world: World, name: str):
    """Resolve one variant name against the environment.

    On cp environments the constraint-ignoring group-chart filter runs a
    plain point model over the lifted world.
    """
    if world.spec.app.startswith("cp") and name == "ri":
        lifted = world.point_view()
        return make_variant(lifted.spec.model(), "ri"), lifted, 2
    return make_variant(world.spec.model(), name), world, None


_WORLD_CACHE: dict = {}


def _cached_world(env: EnvironmentSpec) -> World:
    key = env
    if key not in _WORLD_CACHE:
        _WORLD_CACHE.clear()
        _WORLD_CACHE[key] = generate_environment(env)
    return _WORLD_CACHE[key]


def run_single(config: RunConfig, run_index: int) -> dict:
    """All variants over one measurement draw; used by the pool workers."""
    world = _cached_world(config.env)
    measurements = simulate_measurements(world, config.noise, [config.seed, run_index])
    results = {}
    for name in config.variants:
        variant, var_world, errdims = _variant_for(config, world, name)
        prior_rng = np.random.default_rng(np.random.SeedSequence([config.seed, run_index, 1]))
        start = time.perf_counter()
        res = run_filter(
            variant,
            var_world,
            measurements,
            noise=config.noise,
            init_mode=config.init_mode,
            prior_sigma=config.prior_sigma,
            prior_rng=prior_rng,
            feature_error_dims=errdims,
        )
        elapsed = time.perf_counter() - start
        # beliefs and traces hold chart closures; workers only ship metrics
        res.final_belief = None
        res.trace = []
        res.x0 = None
        results[name] = (res, elapsed)
    return results


def aggregate_monte_carlo(config: RunConfig) -> MonteCarloReport:
    """Run the full Monte Carlo and aggregate RMSE/NEES per variant."""
    world = generate_environment(config.env)
    per_run = []
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            per_run = list(pool.map(run_single, [config] * config.runs, range(config.runs)))
    else:
        for r in range(config.runs):
            per_run.append(run_single(config, r))

    steps = config.env.steps
    summaries, series, failed = [], [], []
    for name in config.variants:
        res = [per_run[r][name][0] for r in range(config.runs)]
        times = sum(per_run[r][name][1] for r in range(config.runs))
        ok = [x for x in res if not x.failed]
        failed.extend((name, i) for i, x in enumerate(res) if x.failed)
        if not ok:
            summaries.append(VariantSummary(name, *(np.nan,) * 5, times))
            series.append(
                VariantSeries(name, *(np.full(steps, np.nan) for _ in range(8)))
            )
            continue
        e_ori = np.vstack([x.err_ori for x in ok])
        e_pos = np.vstack([x.err_pos for x in ok])
        e_feat = np.vstack([x.err_feat for x in ok])
        n_pose = np.vstack([x.nees_pose for x in ok])
        n_feat = np.vstack([x.nees_feat for x in ok])
        rmse_ori = np.sqrt(np.mean(e_ori**2, axis=0))
        rmse_pos = np.sqrt(np.mean(e_pos**2, axis=0))
        rmse_feat = np.sqrt(np.mean(e_feat**2, axis=0))
        nees_pose_series = np.mean(n_pose, axis=0)
        nees_feat_series = np.mean(n_feat, axis=0)
        summaries.append(
            VariantSummary(
                name,
                float(np.mean(rmse_ori)),
                float(np.mean(rmse_pos)),
                float(np.mean(rmse_feat)),
                float(np.mean(nees_pose_series)),
                float(np.mean(nees_feat_series)),
                times,
            )
        )
        series.append(
            VariantSeries(
                name,
                rmse_ori,
                rmse_pos,
                nees_pose_series,
                nees_feat_series,
                res[0].err_ori,
                res[0].err_pos,
                res[0].bound_ori,
                res[0].bound_pos,
            )
        )
    return MonteCarloReport(config, summaries, series, world, bool(failed), failed)
