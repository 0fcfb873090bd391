"""Filter variant configurations: atlas choice, Jacobian evaluation policy,
and execution style.

Variants share the analytic standard-atlas Jacobians of the model and
differ in (a) where those Jacobians are evaluated (current estimates,
ground truth, or first estimates) and (b) the chart the belief lives in
(standard, affine, or the group chart). Affine-family variants can run
either directly on their atlas or as corrected standard filters.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..atlas import Atlas, AffineAtlas
from ..errors import VariantUnsupportedError
from ..liegroups import skew, skew_batch
from .models import AppModel, CpModel, PlaneModel, PointModel, RIChartAtlas

VARIANT_NAMES = ("std", "ideal", "fej", "ri", "affv1", "affv2", "aff")


@dataclass
class RunContext:
    """Per-run mutable evaluation context.

    ``truth_prev``/``truth_pred`` are filter-shaped ground-truth states and
    are populated by the driver only for truth-evaluated variants.
    """

    fej_prev_position: np.ndarray | None = None
    fej_next_position: np.ndarray | None = None
    fej_features: dict = field(default_factory=dict)
    truth_prev: object = None
    truth_pred: object = None


class FilterVariant:
    """Binding of a model to one filter configuration."""

    def __init__(self, model: AppModel, name: str, implementation: str = "atlas"):
        if name not in VARIANT_NAMES:
            raise VariantUnsupportedError(f"unknown variant {name!r}")
        if implementation not in ("atlas", "covariance"):
            raise VariantUnsupportedError(f"unknown implementation {implementation!r}")

        self.model = model
        self.name = name
        self.implementation = implementation
        self.eval_policy = {"ideal": "truth", "fej": "fej"}.get(name, "estimate")
        self.affine_fn = None
        self.affine_inv_fn = None

        if name == "ri":
            if not isinstance(model, PointModel):
                raise VariantUnsupportedError("the group-chart variant needs point features")
            self.affine_fn = model.affine_map("v1")
            self.affine_inv_fn = model.affine_map_inverse("v1")
            self.atlas: Atlas = RIChartAtlas(model)
        elif name in ("affv1", "affv2"):
            if not isinstance(model, PointModel):
                raise VariantUnsupportedError(f"{name} is specific to point features")
            key = "v1" if name == "affv1" else "v2"
            self.affine_fn = model.affine_map(key)
            self.affine_inv_fn = model.affine_map_inverse(key)
            self.atlas = AffineAtlas(model.standard_atlas(), self.affine_fn)
        elif name == "aff":
            if not isinstance(model, (CpModel, PlaneModel)):
                raise VariantUnsupportedError("generic 'aff' applies to cp or plane models")
            self.affine_fn = model.affine_map("aff")
            self.affine_inv_fn = model.affine_map_inverse("aff")
            self.atlas = AffineAtlas(model.standard_atlas(), self.affine_fn)
        else:
            self.atlas = model.standard_atlas()

        if implementation == "covariance":
            if self.affine_fn is None or name == "ri":
                raise VariantUnsupportedError(
                    "covariance-correction execution needs an affine-atlas variant"
                )
            # Belief stays in the standard atlas; the per-update correction
            # reproduces the affine-atlas trajectory.
            self.atlas = model.standard_atlas()

    # -- run lifecycle -------------------------------------------------------
    def start_run(self, x0) -> RunContext:
        ctx = RunContext()
        if self.eval_policy == "fej":
            ctx.fej_prev_position = np.asarray(x0.position, dtype=float)
            for j in range(self.model.num_features(x0)):
                ctx.fej_features[j] = np.asarray(self.model.feature_params(x0, j))
        return ctx

    def after_propagate(self, ctx: RunContext, x_pred) -> None:
        if self.eval_policy == "fej":
            # The prediction is the first available estimate of this pose.
            ctx.fej_next_position = np.asarray(x_pred.position, dtype=float)

    def after_step(self, ctx: RunContext) -> None:
        if self.eval_policy == "fej":
            ctx.fej_prev_position = ctx.fej_next_position

    def note_augment(self, ctx: RunContext, j: int, params) -> None:
        if self.eval_policy == "fej":
            ctx.fej_features[j] = np.asarray(params, dtype=float)

    # -- Jacobians in the belief's atlas --------------------------------------
    def prop_eval_states(self, ctx: RunContext, x_prev, x_pred):
        if self.eval_policy == "truth":
            return ctx.truth_prev, ctx.truth_pred
        if self.eval_policy == "fej":
            return self.model.replace_position(x_prev, ctx.fej_prev_position), x_pred
        return x_prev, x_pred

    def prop_jacobians(self, ctx: RunContext, x_prev, x_pred):
        xe_prev, xe_pred = self.prop_eval_states(ctx, x_prev, x_pred)
        f, g = self.model.propagation_jacobians(xe_prev, xe_pred)
        if self.affine_fn is not None and self.implementation == "atlas":
            a_pred = self.affine_fn(x_pred)
            # F differs from I only in its position rows; expand F A^-1
            # rather than paying a full product for it.
            fa = self.affine_inv_fn(x_prev)
            fa[3:6, :] += f[3:6, 0:3] @ fa[0:3, :]
            f = a_pred @ fa
            g = a_pred[:, 0:6] @ g[0:6, :]
        return f, g

    @property
    def identity_transition(self) -> bool:
        """The transformed transition matrix collapses to I for the first
        point-SLAM affine pattern (also the group chart's linearization)."""
        return self.name in ("ri", "affv1") and self.implementation == "atlas"

    @property
    def standard_transition(self) -> bool:
        """Untransformed standard-atlas propagation (std family and the
        covariance-corrected execution)."""
        return self.affine_fn is None or self.implementation == "covariance"

    def fast_standard_propagated_cov(
        self, p: np.ndarray, ctx: RunContext, x_prev, x_pred, sigma_diag: tuple
    ) -> np.ndarray:
        """F P F^T + G Sigma G^T exploiting the standard-atlas structure.

        F is identity except the position rows' leading block B, and the
        control-noise image G Sigma G^T is the constant diagonal
        blkdiag(d1 I3, d2 I3, 0) because the rotation blocks are orthogonal.
        """
        xe_prev, xe_pred = self.prop_eval_states(ctx, x_prev, x_pred)
        b = -skew(xe_pred.position - xe_prev.position)
        d1, d2 = sigma_diag
        out = p.copy()
        top = p[0:3, :]  # rows of the original matrix; out is the copy being updated
        out[3:6, :] += b @ top
        out[:, 3:6] += out[:, 0:3] @ b.T
        out[0, 0] += d1
        out[1, 1] += d1
        out[2, 2] += d1
        out[3, 3] += d2
        out[4, 4] += d2
        out[5, 5] += d2
        return 0.5 * (out + out.T)

    def fast_propagated_cov(self, p: np.ndarray, x_pred, sigma_diag: tuple) -> np.ndarray:
        """P + A W A^T for identity-transition variants.

        W = blkdiag(d1 I3, d2 I3, 0) is the standard-atlas control noise
        image; with A = I + U e_theta^T (unit block-triangular, first block
        column U of skews) the conjugation is the closed form below.
        """
        d1, d2 = sigma_diag
        m = p.shape[0]
        u = np.empty((m - 3, 3))
        u[0:3] = skew(x_pred.position)
        u[3:] = skew_batch(x_pred.features).reshape(-1, 3)
        out = p.copy()
        out[0:3, 0:3] += d1 * np.eye(3)
        out[3:6, 3:6] += d2 * np.eye(3)
        out[3:, 0:3] += d1 * u
        out[0:3, 3:] += d1 * u.T
        out[3:, 3:] += d1 * (u @ u.T)
        return 0.5 * (out + out.T)

    def obs_eval_state(self, ctx: RunContext, x_pred, j: int):
        if self.eval_policy == "truth":
            return ctx.truth_pred
        if self.eval_policy == "fej" and j in ctx.fej_features:
            return self.model.replace_feature(x_pred, j, ctx.fej_features[j])
        return x_pred

    def begin_update_pass(self, x_pred):
        """Chart data for one step's update pass, pinned at the prediction.

        Evaluation point and chart transform share this center; sub-updates
        retract from the current state but de-transform through the same
        pinned matrix, which keeps the pass equal to a corrected standard
        pass and preserves the constant-nullspace property.
        """
        if self.affine_fn is None or self.implementation == "covariance":
            return None
        return self.affine_inv_fn(x_pred)

    def obs_jacobian(self, ctx: RunContext, x_pred, j: int, a_inv=None) -> np.ndarray:
        """H for feature j, evaluated per policy and expressed in the pinned chart."""
        h = self.model.obs_jacobian(self.obs_eval_state(ctx, x_pred, j), j)
        if a_inv is not None:
            h = h @ a_inv
        return h

    def update_retraction(self, a_inv):
        """State retraction for sub-updates; None means the belief atlas."""
        if a_inv is None or self.name == "ri":
            return None
        std = self.model.standard_atlas()

        def retract(state, delta, _std=std, _a=a_inv):
            return _std.retract(state, _a @ delta)

        return retract

    def initial_covariance(self, x0, cov_std: np.ndarray) -> np.ndarray:
        """Map a standard-atlas initial covariance into the belief's atlas."""
        a = self.atlas.linearization(x0)
        if np.array_equal(a, np.eye(a.shape[0])):
            return cov_std
        return a @ cov_std @ a.T


def make_variant(model: AppModel, name: str, implementation: str = "atlas") -> FilterVariant:
    return FilterVariant(model, name, implementation)
