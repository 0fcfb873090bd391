"""Builders turning model Jacobians into observability sequences.

Ground-truth sequences evaluate every Jacobian on one trajectory of true
states; EKF-style sequences evaluate H at predictions and F across the
update/prediction gap, which is where the observability discrepancy of
estimate-linearized filters comes from.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..observability import ObservabilitySequence
from .models import AppModel


def _transforms(affine_fn, states):
    return [affine_fn(x) for x in states] if affine_fn is not None else None


def truth_sequence(
    model: AppModel,
    states: list,
    affine_fn: Callable | None = None,
) -> ObservabilitySequence:
    """(H_i, F_i) along a ground-truth trajectory, optionally re-expressed affinely."""
    h_blocks = [model.stacked_obs_jacobian(x) for x in states]
    f_blocks = [model.propagation_jacobians(states[i], states[i + 1])[0] for i in range(len(states) - 1)]
    if affine_fn is not None:
        a = _transforms(affine_fn, states)
        h_blocks = [h @ np.linalg.inv(a[i]) for i, h in enumerate(h_blocks)]
        f_blocks = [a[i + 1] @ f @ np.linalg.inv(a[i]) for i, f in enumerate(f_blocks)]
    return ObservabilitySequence(h_blocks, f_blocks)


def random_truth_states(
    model: AppModel, k: int, rng: np.random.Generator, n_features: int | None = None
) -> list:
    states = [model.random_state(rng, n_features)]
    for _ in range(k):
        states.append(model.process(states[-1], model.random_odometry(rng)))
    return states


def random_truth_sequence(
    model: AppModel,
    k: int,
    rng: np.random.Generator,
    n_features: int | None = None,
    affine_fn: Callable | None = None,
) -> ObservabilitySequence:
    return truth_sequence(model, random_truth_states(model, k, rng, n_features), affine_fn)


def ekf_sequence(
    model: AppModel,
    x0,
    steps: list,
    affine_fn: Callable | None = None,
) -> ObservabilitySequence:
    """(H_i, F_i) evaluated the way a running filter would.

    ``steps`` holds (prediction, update) state pairs for steps 1..k; row 0
    uses the starting estimate ``x0``, row i the i-th prediction, and F_i
    spans from the i-th update to the (i+1)-th prediction.
    """
    updates = [x0] + [upd for _, upd in steps]
    preds = [pred for pred, _ in steps]
    h_states = [x0] + preds
    h_blocks = [model.stacked_obs_jacobian(x) for x in h_states]
    f_blocks = [
        model.propagation_jacobians(updates[i], preds[i])[0] for i in range(len(preds))
    ]
    if affine_fn is not None:
        a_h = [affine_fn(x) for x in h_states]
        h_blocks = [h @ np.linalg.inv(a_h[i]) for i, h in enumerate(h_blocks)]
        f_blocks = [
            affine_fn(preds[i]) @ f @ np.linalg.inv(affine_fn(updates[i]))
            for i, f in enumerate(f_blocks)
        ]
    return ObservabilitySequence(h_blocks, f_blocks)


def synthetic_ekf_steps(
    model: AppModel,
    k: int,
    rng: np.random.Generator,
    n_features: int | None = None,
    update_scale: float = 0.05,
):
    """Estimate-like (prediction, update) pairs with generic update moves."""
    atlas = model.standard_atlas()
    x0 = model.random_state(rng, n_features)
    x, steps = x0, []
    for _ in range(k):
        pred = model.process(x, model.random_odometry(rng))
        upd = atlas.retract(pred, update_scale * rng.standard_normal(model.state_dim(pred)))
        steps.append((pred, upd))
        x = upd
    return x0, steps
