"""Dual-run check that the affine-atlas filter and its covariance-corrected
standard formulation produce the same trajectory.

The scenario keeps exactly one feature in view so each step performs a
single update; the recorded relation is then exactly the per-step
covariance equivalence P_affine = A(X_pred) P_standard A(X_pred)^T.
"""
from __future__ import annotations

import numpy as np

from ..ekf_core import NoiseSpec
from ..slam.variants import make_variant
from .environment import EnvironmentSpec, generate_environment, simulate_measurements
from .runner import run_filter


def equivalence_check(
    steps: int = 200,
    seed: int = 0,
    variant: str = "affv1",
    noise: NoiseSpec | None = None,
) -> dict:
    """Returns max state difference and max relative covariance-relation error."""
    noise = noise or NoiseSpec(0.003, 0.01, 0.1)
    env = EnvironmentSpec(
        app="point", feature_count=1, steps=steps, visibility_radius=1e6, seed=seed
    )
    world = generate_environment(env)
    measurements = simulate_measurements(world, noise, [seed, 7])

    runs = {}
    for impl in ("atlas", "covariance"):
        var = make_variant(env.model(), variant, impl)
        prior_rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
        runs[impl] = run_filter(
            var,
            world,
            measurements,
            noise=noise,
            init_mode="prior_map",
            prior_sigma=0.3,
            prior_rng=prior_rng,
            record_trace=True,
        )

    model = env.model()
    affine_fn = model.affine_map({"affv1": "v1", "affv2": "v2"}[variant])
    atlas = model.standard_atlas()
    max_state = 0.0
    max_cov = 0.0
    for (xp_a, xu_a, cov_a, _), (xp_c, xu_c, _, cov_pre) in zip(
        runs["atlas"].trace, runs["covariance"].trace
    ):
        max_state = max(max_state, float(np.linalg.norm(atlas.error(xu_c, xu_a))))
        a = affine_fn(xp_c)
        rel = np.linalg.norm(cov_a - a @ cov_pre @ a.T) / max(np.linalg.norm(cov_a), 1e-300)
        max_cov = max(max_cov, float(rel))
    return {
        "steps": steps,
        "variant": variant,
        "max_state_diff": max_state,
        "max_cov_rel_diff": max_cov,
        "failed": runs["atlas"].failed or runs["covariance"].failed,
    }
