import numpy as np
import pytest

from affekf.atlas import AffineAtlas
from affekf.errors import VariantUnsupportedError
from affekf.slam.models import RIChartAtlas, StandardAtlas, make_cp_model, make_plane_model, make_point_model
from affekf.slam.variants import VARIANT_NAMES, make_variant

RNG = np.random.default_rng(31)


def test_make_variant_atlas_binding():
    point = make_point_model(2)
    assert isinstance(make_variant(point, "std").atlas, StandardAtlas)
    assert isinstance(make_variant(point, "ideal").atlas, StandardAtlas)
    assert isinstance(make_variant(point, "fej").atlas, StandardAtlas)
    assert isinstance(make_variant(point, "ri").atlas, RIChartAtlas)
    assert isinstance(make_variant(point, "affv1").atlas, AffineAtlas)
    assert isinstance(make_variant(point, "affv2").atlas, AffineAtlas)


def test_make_variant_gating():
    point = make_point_model(1)
    cp = make_cp_model(1, "known")
    plane = make_plane_model(1)
    with pytest.raises(VariantUnsupportedError):
        make_variant(point, "aff")
    with pytest.raises(VariantUnsupportedError):
        make_variant(cp, "ri")
    with pytest.raises(VariantUnsupportedError):
        make_variant(cp, "affv2")
    with pytest.raises(VariantUnsupportedError):
        make_variant(plane, "ri")
    with pytest.raises(VariantUnsupportedError):
        make_variant(point, "warp")
    with pytest.raises(VariantUnsupportedError):
        make_variant(point, "ri", "covariance")
    assert make_variant(plane, "aff").affine_fn is not None
    assert set(VARIANT_NAMES) == {"std", "ideal", "fej", "ri", "affv1", "affv2", "aff"}


def test_fej_observation_jacobian_freezes_features():
    model = make_point_model(1)
    variant = make_variant(model, "fej")
    x0 = model.random_state(RNG)
    ctx = variant.start_run(x0)

    # move the feature estimate; the frozen Jacobian must not follow it
    moved = model.replace_feature(x0, 0, x0.features[0] + np.array([0.5, -0.2, 0.1]))
    h_frozen = variant.obs_jacobian(ctx, moved, 0)
    h_current = model.obs_jacobian(moved, 0)
    h_first = model.obs_jacobian(model.replace_feature(moved, 0, ctx.fej_features[0]), 0)
    assert np.allclose(h_frozen, h_first)
    assert not np.allclose(h_frozen, h_current)


def test_fej_propagation_uses_stored_prediction_positions():
    model = make_point_model(1)
    variant = make_variant(model, "fej")
    x0 = model.random_state(RNG)
    ctx = variant.start_run(x0)

    u = model.random_odometry(RNG)
    x_pred = model.process(x0, u)
    variant.after_propagate(ctx, x_pred)
    variant.after_step(ctx)

    # pretend an update moved the state; F must keep using the prediction
    atlas = model.standard_atlas()
    x_upd = atlas.retract(x_pred, 0.05 * RNG.standard_normal(9))
    u2 = model.random_odometry(RNG)
    x_pred2 = model.process(x_upd, u2)
    f, _ = variant.prop_jacobians(ctx, x_upd, x_pred2)
    from affekf.liegroups import skew

    assert np.allclose(f[3:6, 0:3], -skew(x_pred2.position - x_pred.position))
    f_std, _ = model.propagation_jacobians(x_upd, x_pred2)
    assert not np.allclose(f, f_std)


def test_ideal_jacobians_evaluated_at_truth():
    model = make_point_model(1)
    variant = make_variant(model, "ideal")
    x0 = model.random_state(RNG)
    ctx = variant.start_run(x0)
    ctx.truth_prev = model.random_state(RNG)
    ctx.truth_pred = model.process(ctx.truth_prev, model.random_odometry(RNG))
    f, g = variant.prop_jacobians(ctx, x0, model.process(x0, model.random_odometry(RNG)))
    f_t, g_t = model.propagation_jacobians(ctx.truth_prev, ctx.truth_pred)
    assert np.allclose(f, f_t) and np.allclose(g, g_t)
    h = variant.obs_jacobian(ctx, x0, 0)
    assert np.allclose(h, model.obs_jacobian(ctx.truth_pred, 0))


def test_affine_variant_jacobians_are_transformed():
    model = make_point_model(1)
    variant = make_variant(model, "affv1")
    x0 = model.random_state(RNG)
    ctx = variant.start_run(x0)
    u = model.random_odometry(RNG)
    x_pred = model.process(x0, u)
    f, g = variant.prop_jacobians(ctx, x0, x_pred)
    a = model.affine_map("v1")
    f_std, g_std = model.propagation_jacobians(x0, x_pred)
    assert np.allclose(f, a(x_pred) @ f_std @ np.linalg.inv(a(x0)), atol=1e-10)
    assert np.allclose(g, a(x_pred) @ g_std, atol=1e-12)
    a_inv = variant.begin_update_pass(x_pred)
    h = variant.obs_jacobian(ctx, x_pred, 0, a_inv)
    assert np.allclose(h, model.obs_jacobian(x_pred, 0) @ np.linalg.inv(a(x_pred)), atol=1e-10)
    # the pinned retraction de-transforms through the same chart matrix
    retract = variant.update_retraction(a_inv)
    delta = 0.01 * RNG.standard_normal(9)
    moved = retract(x_pred, delta)
    std = model.standard_atlas()
    assert np.allclose(std.error(x_pred, moved), a_inv @ delta, atol=1e-9)


def test_group_chart_transition_is_identity():
    """In the group chart the pose/feature transition matrix collapses to I."""
    model = make_point_model(2)
    variant = make_variant(model, "ri")
    x0 = model.random_state(RNG)
    ctx = variant.start_run(x0)
    x_pred = model.process(x0, model.random_odometry(RNG))
    f, _ = variant.prop_jacobians(ctx, x0, x_pred)
    assert np.allclose(f, np.eye(12), atol=1e-9)


def test_covariance_implementation_uses_standard_atlas():
    model = make_point_model(1)
    variant = make_variant(model, "affv1", "covariance")
    assert isinstance(variant.atlas, StandardAtlas)
    x0 = model.random_state(RNG)
    ctx = variant.start_run(x0)
    x_pred = model.process(x0, model.random_odometry(RNG))
    f, _ = variant.prop_jacobians(ctx, x0, x_pred)
    f_std, _ = model.propagation_jacobians(x0, x_pred)
    assert np.allclose(f, f_std)
