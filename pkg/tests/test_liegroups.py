import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affekf.errors import AngleNearPiError
from affekf.liegroups import (
    SEkElement,
    is_rotation,
    project_to_rotation,
    random_rotation,
    sek_exp,
    sek_identity,
    sek_log,
    skew,
    so_exp,
    so_log,
    unskew,
)

RNG = np.random.default_rng(1234)


def test_skew_definition():
    m = skew(np.array([1.0, 2.0, 3.0]))
    assert np.array_equal(m, np.array([[0, -3, 2], [3, 0, -1], [-2, 1, 0]], dtype=float))
    assert np.array_equal(skew(np.zeros(3)), np.zeros((3, 3)))


def test_skew_matches_cross_product():
    for _ in range(100):
        v, w = RNG.normal(size=3), RNG.normal(size=3)
        assert np.allclose(skew(v) @ w, np.cross(v, w))
        assert np.allclose(skew(v) @ v, 0.0)


def test_so_exp_zero_and_quarter_turn():
    assert np.allclose(so_exp(np.zeros(3)), np.eye(3))
    quarter = so_exp(np.array([np.pi / 2, 0, 0]))
    assert np.allclose(quarter, np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]]), atol=1e-12)
    assert np.allclose(so_log(quarter), [np.pi / 2, 0, 0], atol=1e-12)
    assert np.allclose(so_log(np.eye(3)), np.zeros(3))


def test_so_exp_log_roundtrip_3d():
    for _ in range(1000):
        v = RNG.normal(size=3)
        n = np.linalg.norm(v)
        v = v / n * RNG.uniform(0, np.pi - 1e-3)
        r = so_exp(v)
        assert is_rotation(r, 1e-9)
        assert np.allclose(so_log(r), v, atol=1e-9)


def test_so_log_angle_equals_trace_formula():
    for _ in range(100):
        r = random_rotation(RNG)
        angle = np.arccos(np.clip((np.trace(r) - 1) / 2, -1, 1))
        assert abs(np.linalg.norm(so_log(r)) - angle) < 1e-9


def test_so_log_rejects_near_pi():
    r = so_exp(np.array([np.pi - 1e-8, 0, 0]))
    with pytest.raises(AngleNearPiError):
        so_log(r)


def test_small_angle_branch_consistency():
    for scale in (1e-12, 1e-9, 1e-8, 1e-6, 1e-4):
        v = scale * np.array([0.3, -0.4, 0.5])
        assert np.allclose(so_log(so_exp(v)), v, atol=1e-15 + scale * 1e-9)


def test_planar_rotation():
    assert np.allclose(so_exp(np.array([0.0])), np.eye(2))
    r = so_exp(np.array([0.7]))
    assert np.allclose(r, [[np.cos(0.7), -np.sin(0.7)], [np.sin(0.7), np.cos(0.7)]])
    assert np.allclose(so_log(r), [0.7])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3))
def test_so_exp_always_valid_rotation(coords):
    assert is_rotation(so_exp(np.array(coords)), 1e-9)


def test_sek_exp_zero_and_rotation_only():
    el = sek_exp(np.zeros(3 + 2 * 3), d=3)
    assert np.allclose(el.rotation, np.eye(3))
    assert np.allclose(el.columns, 0.0)

    xi = np.zeros(9)
    xi[:3] = [0.2, -0.1, 0.3]
    el = sek_exp(xi, d=3)
    assert np.allclose(el.rotation, so_exp(xi[:3]))
    assert np.allclose(el.columns, 0.0)


def test_sek_roundtrip():
    for _ in range(1000):
        k = int(RNG.integers(1, 4))
        xi = RNG.normal(size=3 + 3 * k)
        rot = np.linalg.norm(xi[:3])
        if rot >= np.pi - 0.1:
            xi[:3] *= (np.pi - 0.1) / rot * RNG.uniform(0, 1)
        el = sek_exp(xi, d=3)
        assert np.allclose(sek_log(el), xi, atol=1e-9)


def test_sek_group_inverse():
    for _ in range(100):
        xi = RNG.normal(size=9)
        xi[:3] *= 0.5
        el = sek_exp(xi, d=3)
        prod = el.compose(el.inverse())
        ident = sek_identity(el.columns.shape[0], 3)
        assert np.allclose(prod.rotation, ident.rotation, atol=1e-9)
        assert np.allclose(prod.columns, ident.columns, atol=1e-9)


def test_sek_exp_neg_is_inverse():
    for _ in range(100):
        xi = RNG.normal(size=12) * 0.4
        a = sek_exp(xi, d=3)
        b = sek_exp(-xi, d=3)
        prod = a.compose(b)
        assert np.allclose(prod.rotation, np.eye(3), atol=1e-9)
        assert np.allclose(prod.columns, 0.0, atol=1e-9)


def test_sek_planar():
    xi = np.array([0.4, 1.0, 2.0, -1.0, 0.5])
    el = sek_exp(xi, d=2)
    assert el.rotation.shape == (2, 2)
    assert np.allclose(sek_log(el), xi, atol=1e-12)


def test_project_to_rotation():
    for _ in range(50):
        r = random_rotation(RNG)
        noisy = r + 1e-6 * RNG.normal(size=(3, 3))
        fixed = project_to_rotation(noisy)
        assert is_rotation(fixed, 1e-12)
        assert np.linalg.norm(fixed - r) < 1e-5


def test_unskew_inverts_skew():
    v = RNG.normal(size=3)
    assert np.allclose(unskew(skew(v)), v)
