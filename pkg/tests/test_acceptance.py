"""Acceptance suite: one test per shipped criterion, each printing a
pass/fail line. Monte Carlo criteria run at 50 runs on the shipped desk
environments; dimension/lemma/equivalence criteria are exact numeric
checks at their stated tolerances.
"""
import time

import numpy as np
import pytest

from affekf.ekf_core import NoiseSpec
from affekf.observability import (
    SubspaceBasis,
    check_lemma_affine_nullspace,
    check_lemma_rank,
    nullspace_basis,
    observability_matrix,
    subspace_equal,
)
from affekf.sim.calibration import linear_gaussian_nees
from affekf.sim.environment import EnvironmentSpec, generate_environment, simulate_measurements
from affekf.sim.equivalence import equivalence_check
from affekf.sim.runner import RunConfig, aggregate_monte_carlo, run_filter
from affekf.slam.analysis import (
    ekf_sequence,
    random_truth_sequence,
    random_truth_states,
    truth_sequence,
)
from affekf.slam.models import make_cp_model, make_plane_model, make_point_model
from affekf.slam.variants import make_variant
from affekf.atlas import numeric_jacobians
from affekf.slam.states import perturb_odometry

RANK_TOL = 1e-8
ORDER = 3

# Desk-scale Monte Carlo environments (calibrated; see decisions ledger).
POINT_ENV = EnvironmentSpec(app="point", feature_count=26, steps=2200, step_rotation=0.012, seed=1)
POINT_NOISE = NoiseSpec(0.003, 0.01, 0.1)
CP_NOISE = NoiseSpec(0.005, 0.01, 0.1)
CP_KNOWN_ENV = EnvironmentSpec(app="cp-known", feature_count=26, steps=1800, step_rotation=0.01, seed=2)
CP_UNKNOWN_ENV = EnvironmentSpec(app="cp-unknown", feature_count=26, steps=1800, step_rotation=0.01, seed=2)
PLANE_ENV = EnvironmentSpec(app="plane", feature_count=12, steps=1800, step_rotation=0.016, seed=3)
PLANE_NOISE = NoiseSpec(0.005, 0.01, 0.02)
# The plane study initializes features from a coarse prior map: with tiny
# observation noise, truth-evaluated Jacobians mis-model fresh far-plane
# initializations and the consistency anchor would drift (see ledger).
PLANE_INIT = dict(init_mode="prior_map", prior_sigma=0.1)
MC_RUNS = 50
MC_JOBS = 2


def _verdict(name: str, ok: bool, detail: str = "") -> None:
    print(f"{'PASS' if ok else 'FAIL'} - {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def _ri_constant_basis(m: int) -> SubspaceBasis:
    basis = np.zeros((m, 6))
    basis[0:3, 0:3] = np.eye(3)
    for row in range(3, m, 3):
        basis[row : row + 3, 3:6] = np.eye(3)
    return SubspaceBasis(basis)


def _noisy_filter_sequence(model, env, noise, variant_name, k, seed):
    """Estimate-linearized (H, F) sequence from an actual noisy filter run."""
    world = generate_environment(env)
    meas = simulate_measurements(world, noise, [seed, 0])
    variant = make_variant(model, variant_name)
    res = run_filter(
        variant,
        world,
        meas,
        noise=noise,
        init_mode="prior_map",
        prior_sigma=0.3,
        prior_rng=np.random.default_rng(seed),
        record_trace=True,
    )
    assert not res.failed, res.failure
    steps = [(pred, upd) for pred, upd, _, _ in res.trace[:k]]
    affine = variant.affine_fn if variant.name != "std" else None
    return ekf_sequence(model, res.x0, steps, affine)


def test_criterion_point_dims():
    """Point SLAM, K=1, order 3: truth dim 6; estimate-linearized standard
    filter dim 3; the three consistency-preserving atlases dim 6 with the
    constant group-chart basis. Runtime < 1 s."""
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    model = make_point_model(1)
    env = EnvironmentSpec(app="point", feature_count=1, steps=ORDER + 2,
                          visibility_radius=1e6, seed=5)

    truth = random_truth_sequence(model, ORDER, rng)
    dim_true = nullspace_basis(observability_matrix(truth), RANK_TOL).dim

    dims = {}
    bases = {}
    for name in ("std", "affv1", "affv2", "ri"):
        seq = _noisy_filter_sequence(model, env, POINT_NOISE, name, ORDER, seed=7)
        basis = nullspace_basis(observability_matrix(seq), RANK_TOL)
        dims[name] = basis.dim
        bases[name] = basis
    elapsed = time.perf_counter() - start

    _verdict("point truth unobservable dim = 6", dim_true == 6, f"dim={dim_true}")
    _verdict("point standard-filter dim = 3 on noisy run", dims["std"] == 3, f"dim={dims['std']}")
    ref = _ri_constant_basis(9)
    for name in ("affv1", "affv2", "ri"):
        ok = dims[name] == 6 and subspace_equal(bases[name], ref)
        _verdict(f"point {name} dim = 6 with constant group basis", ok, f"dim={dims[name]}")
    _verdict("point dims runtime < 1 s", elapsed < 1.0, f"{elapsed:.2f}s")


APP_DIM_CASES = [
    ("cp-known", make_cp_model(3, "known", -1.5), 3),
    ("cp-unknown", make_cp_model(3, "unknown"), 4),
    ("plane", make_plane_model(3), 6),
]


def test_criterion_app_dims():
    """cp-known 3 / cp-unknown 4 / plane 6 ground-truth dims; the standard
    filter strictly smaller and the affine filter equal, over 20 randomized
    trajectories each. Runtime < 10 s."""
    start = time.perf_counter()
    for app, model, expected in APP_DIM_CASES:
        affine = model.affine_map("aff")
        ok_true = ok_std = ok_aff = True
        for trial in range(20):
            rng = np.random.default_rng(100 + trial)
            states = random_truth_states(model, ORDER, rng)
            d_true = nullspace_basis(
                observability_matrix(truth_sequence(model, states)), RANK_TOL
            ).dim
            ok_true &= d_true == expected

            from affekf.slam.analysis import synthetic_ekf_steps

            x0, steps = synthetic_ekf_steps(model, ORDER, rng)
            d_std = nullspace_basis(
                observability_matrix(ekf_sequence(model, x0, steps)), RANK_TOL
            ).dim
            d_aff = nullspace_basis(
                observability_matrix(ekf_sequence(model, x0, steps, affine)), RANK_TOL
            ).dim
            ok_std &= d_std < d_true
            ok_aff &= d_aff == expected
        _verdict(f"{app} truth dim = {expected} over 20 trajectories", ok_true)
        _verdict(f"{app} standard-filter dim strictly smaller", ok_std)
        _verdict(f"{app} affine-filter dim = {expected}", ok_aff)
    elapsed = time.perf_counter() - start
    _verdict("app dims runtime < 10 s", elapsed < 10.0, f"{elapsed:.2f}s")


LEMMA_CASES = [
    ("point-v1", make_point_model(1), "v1"),
    ("point-v2", make_point_model(1), "v2"),
    ("point-ri", make_point_model(1), "ri"),
    ("cp-known", make_cp_model(3, "known", -1.5), "aff"),
    ("cp-unknown", make_cp_model(3, "unknown"), "aff"),
    ("plane", make_plane_model(1), "aff"),
]


def test_criterion_lemma_suite():
    """Rank invariance and nullspace mapping across every (app, atlas pair)
    over 20 random states; transition-invariance of the constant basis over
    100 samples per atlas."""
    rng = np.random.default_rng(11)
    for label, model, key in LEMMA_CASES:
        affine = model.affine_map("v1" if key == "ri" else key)
        ok_rank = ok_map = True
        for _ in range(20):
            states = random_truth_states(model, ORDER, rng)
            seq_std = truth_sequence(model, states)
            seq_aff = truth_sequence(model, states, affine)
            ok_rank &= check_lemma_rank(seq_std, seq_aff, RANK_TOL)
            n_eta = nullspace_basis(observability_matrix(seq_std), RANK_TOL)
            n_xi = nullspace_basis(observability_matrix(seq_aff), RANK_TOL)
            ok_map &= check_lemma_affine_nullspace(affine(states[0]), n_eta, n_xi)
        _verdict(f"lemma rank invariance [{label}]", ok_rank)
        _verdict(f"lemma nullspace mapping [{label}]", ok_map)

        n_bar = nullspace_basis(
            observability_matrix(random_truth_sequence(model, ORDER, rng, affine_fn=affine)),
            RANK_TOL,
        )
        ok_trans = True
        for _ in range(100):
            x_est = model.random_state(rng)
            x_pred = model.process(x_est, model.random_odometry(rng))
            f_std, _ = model.propagation_jacobians(x_est, x_pred)
            f_aff = affine(x_pred) @ f_std @ np.linalg.inv(affine(x_est))
            ok_trans &= subspace_equal(SubspaceBasis(f_aff @ n_bar.basis), n_bar)
        _verdict(f"transition preserves constant basis [{label}]", ok_trans)


def test_criterion_implementation_equivalence():
    """Affine-atlas filter vs covariance-corrected standard filter over a
    200-step randomized run: states within 1e-9, covariance relation within
    1e-8 relative at every step."""
    for variant in ("affv1", "affv2"):
        out = equivalence_check(steps=200, seed=4, variant=variant)
        _verdict(
            f"equivalence states < 1e-9 [{variant}]",
            not out["failed"] and out["max_state_diff"] < 1e-9,
            f"max={out['max_state_diff']:.2e}",
        )
        _verdict(
            f"equivalence covariance relation < 1e-8 [{variant}]",
            out["max_cov_rel_diff"] < 1e-8,
            f"max={out['max_cov_rel_diff']:.2e}",
        )


JACOBIAN_MODELS = [
    make_point_model(2),
    make_cp_model(2, "known", -1.5),
    make_cp_model(2, "unknown"),
    make_plane_model(2),
]


def test_criterion_jacobian_validation():
    """Analytic F, G, H against central finite differences: 1e-5 relative at
    100 random states for each application."""
    rng = np.random.default_rng(21)
    for model in JACOBIAN_MODELS:
        atlas = model.standard_atlas()
        worst = 0.0
        for _ in range(100):
            x_prev = model.random_state(rng)
            u = model.random_odometry(rng)
            x_pred = model.process(x_prev, u)
            f_a, g_a = model.propagation_jacobians(x_prev, x_pred)
            h_a = model.stacked_obs_jacobian(x_pred)
            tri = numeric_jacobians(
                atlas,
                model.process,
                lambda s: np.concatenate(
                    [model.observe(s, j) for j in range(model.num_features(s))]
                ),
                x_prev,
                x_pred,
                u,
                control_dim=6,
                perturb_control=perturb_odometry,
            )
            for a, b in ((f_a, tri.F), (g_a, tri.G), (h_a, tri.H)):
                worst = max(worst, np.abs(a - b).max() / max(np.abs(a).max(), 1.0))
        label = f"{model.name}-{getattr(model, 'height_mode', '')}".rstrip("-")
        _verdict(f"jacobians analytic vs FD < 1e-5 [{label}]", worst < 1e-5, f"worst={worst:.2e}")


def _quarter_means(series: np.ndarray) -> list:
    q = len(series) // 4
    return [float(np.mean(series[i * q : (i + 1) * q])) for i in range(4)]


@pytest.fixture(scope="module")
def point_mc():
    cfg = RunConfig(
        env=POINT_ENV,
        noise=POINT_NOISE,
        variants=("std", "fej", "ri", "affv1", "affv2", "ideal"),
        runs=MC_RUNS,
        seed=2024,
        jobs=MC_JOBS,
    )
    start = time.perf_counter()
    report = aggregate_monte_carlo(cfg)
    report.elapsed = time.perf_counter() - start
    return report


def test_criterion_point_monte_carlo(point_mc):
    """50-run point-SLAM study at (0.003, 0.01, 0.1): the standard filter's
    pose NEES exceeds 1.2 and rises; every consistency-preserving variant
    stays in [0.7, 1.4]; the first affine variant matches the group-chart
    filter's accuracy within 5% and beats the standard filter."""
    _verdict("point MC complete", not point_mc.incomplete, str(point_mc.failed_runs))
    s = {x.variant: x for x in point_mc.summaries}
    ser = {x.variant: x for x in point_mc.series}

    quarters = _quarter_means(ser["std"].nees_pose)
    _verdict("point std pose NEES > 1.2", s["std"].nees_pose > 1.2, f"{s['std'].nees_pose:.3f}")
    _verdict(
        "point std NEES rising trend",
        quarters[-1] > quarters[0] > 1.0,
        f"quarters={['%.3f' % v for v in quarters]}",
    )
    for name in ("fej", "ri", "affv1", "affv2", "ideal"):
        _verdict(
            f"point {name} pose NEES in [0.7, 1.4]",
            0.7 <= s[name].nees_pose <= 1.4,
            f"{s[name].nees_pose:.3f}",
        )
    for metric in ("rmse_ori", "rmse_pos", "rmse_feat"):
        aff, ri, std = (getattr(s[n], metric) for n in ("affv1", "ri", "std"))
        _verdict(
            f"point affv1 {metric} within 5% of ri",
            abs(aff - ri) <= 0.05 * ri,
            f"affv1={aff:.4f} ri={ri:.4f}",
        )
        _verdict(f"point affv1 {metric} <= std", aff <= std, f"affv1={aff:.4f} std={std:.4f}")
    _verdict("point MC runtime < 10 min", point_mc.elapsed < 600, f"{point_mc.elapsed:.0f}s")


@pytest.fixture(scope="module", params=["cp-known", "cp-unknown"])
def cp_mc(request):
    env = CP_KNOWN_ENV if request.param == "cp-known" else CP_UNKNOWN_ENV
    cfg = RunConfig(
        env=env,
        noise=CP_NOISE,
        variants=("std", "ri", "aff", "ideal"),
        runs=MC_RUNS,
        seed=77,
        jobs=MC_JOBS,
    )
    start = time.perf_counter()
    report = aggregate_monte_carlo(cfg)
    report.elapsed = time.perf_counter() - start
    return request.param, report


def test_criterion_cp_monte_carlo(cp_mc):
    """50-run constrained-point studies at (0.005, 0.01, 0.1): standard pose
    NEES above 1.3; affine and truth-evaluated filters in [0.7, 1.4]; the
    constraint-ignoring group-chart filter is less accurate than the affine
    one on robot position."""
    scenario, report = cp_mc
    _verdict(f"{scenario} MC complete", not report.incomplete, str(report.failed_runs))
    s = {x.variant: x for x in report.summaries}
    _verdict(
        f"{scenario} std pose NEES > 1.3", s["std"].nees_pose > 1.3, f"{s['std'].nees_pose:.3f}"
    )
    for name in ("aff", "ideal"):
        _verdict(
            f"{scenario} {name} pose NEES in [0.7, 1.4]",
            0.7 <= s[name].nees_pose <= 1.4,
            f"{s[name].nees_pose:.3f}",
        )
    _verdict(
        f"{scenario} constraint-ignoring ri worse than aff (rob. pos.)",
        s["ri"].rmse_pos > s["aff"].rmse_pos,
        f"ri={s['ri'].rmse_pos:.4f} aff={s['aff'].rmse_pos:.4f}",
    )
    _verdict(f"{scenario} MC runtime < 10 min", report.elapsed < 600, f"{report.elapsed:.0f}s")


def test_criterion_plane_monte_carlo():
    """50-run plane-SLAM study at (0.005, 0.01, 0.02): standard feature NEES
    above 1.4; the affine filter consistent on pose and features and at
    least as accurate as the standard filter on all three components."""
    cfg = RunConfig(
        env=PLANE_ENV,
        noise=PLANE_NOISE,
        variants=("std", "aff", "ideal"),
        runs=MC_RUNS,
        seed=55,
        jobs=MC_JOBS,
        **PLANE_INIT,
    )
    start = time.perf_counter()
    report = aggregate_monte_carlo(cfg)
    elapsed = time.perf_counter() - start
    _verdict("plane MC complete", not report.incomplete, str(report.failed_runs))
    s = {x.variant: x for x in report.summaries}
    _verdict("plane std feature NEES > 1.4", s["std"].nees_feat > 1.4, f"{s['std'].nees_feat:.3f}")
    _verdict(
        "plane aff pose NEES in [0.7, 1.4]",
        0.7 <= s["aff"].nees_pose <= 1.4,
        f"{s['aff'].nees_pose:.3f}",
    )
    _verdict(
        "plane aff feature NEES in [0.7, 1.4]",
        0.7 <= s["aff"].nees_feat <= 1.4,
        f"{s['aff'].nees_feat:.3f}",
    )
    _verdict(
        "plane ideal pose NEES in [0.7, 1.4]",
        0.7 <= s["ideal"].nees_pose <= 1.4,
        f"{s['ideal'].nees_pose:.3f}",
    )
    for metric in ("rmse_ori", "rmse_pos", "rmse_feat"):
        _verdict(
            f"plane aff {metric} <= std",
            getattr(s["aff"], metric) <= getattr(s["std"], metric),
            f"aff={getattr(s['aff'], metric):.4f} std={getattr(s['std'], metric):.4f}",
        )
    _verdict("plane MC runtime < 5 min", elapsed < 300, f"{elapsed:.0f}s")


def test_criterion_nees_calibration():
    """A matched linear-Gaussian filter through the same metrics pipeline
    averages NEES within [0.95, 1.05] over 1e5 samples."""
    value = linear_gaussian_nees(samples=100_000, seed=3)
    _verdict("linear-Gaussian mean NEES in [0.95, 1.05]", 0.95 <= value <= 1.05, f"{value:.4f}")
