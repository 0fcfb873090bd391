"""Observability matrices, nullspace bases, and numeric consistency checkers.

The checkers turn the subspace statements behind consistency-preserving
filters into sampled numeric tests: constancy of the unobservable subspace
across states, nullspace-inclusion conditions on (H, F) pairs, rank
invariance across atlases, and verification that a candidate affine map
sends the state-dependent nullspace to one constant space.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, SingularAffineError

# Singular values below RANK_TOL * sigma_max count as zero.
RANK_TOL = 1e-8
# Two subspaces are equal when dims match and the largest principal angle
# is below this (radians).
ANGLE_TOL = 1e-6


@dataclass(frozen=True)
class SubspaceBasis:
    """Column-spanning matrix with the relative singular-value tolerance used to cut rank."""

    basis: np.ndarray
    tol: float = RANK_TOL

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def orthonormal(self) -> np.ndarray:
        if self.dim == 0:
            return self.basis
        q, _ = np.linalg.qr(self.basis)
        return q[:, : self.dim]


@dataclass(frozen=True)
class ObservabilitySequence:
    """Ordered (H_i, F_i) pairs; F_i maps step i errors to step i+1 errors."""

    H: Sequence[np.ndarray]
    F: Sequence[np.ndarray]

    def __post_init__(self):
        if len(self.F) != len(self.H) - 1:
            raise DimensionMismatchError("need exactly one F between consecutive H blocks")
        m = self.H[0].shape[1]
        for h in self.H:
            if h.shape[1] != m:
                raise DimensionMismatchError("H blocks with inconsistent state dimension")
        for f in self.F:
            if f.shape != (m, m):
                raise DimensionMismatchError("F blocks must be m x m")


def observability_matrix(seq: ObservabilitySequence) -> np.ndarray:
    """Stack [H_0; H_1 F_0; ...; H_k F_{k-1}...F_0]."""
    rows = [seq.H[0]]
    transition = np.eye(seq.H[0].shape[1])
    for h, f in zip(seq.H[1:], seq.F):
        transition = f @ transition
        rows.append(h @ transition)
    return np.vstack(rows)


def nullspace_basis(m: np.ndarray, tol: float = RANK_TOL) -> SubspaceBasis:
    """Orthonormal right-nullspace basis via SVD with relative rank cut."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return SubspaceBasis(np.eye(m.shape[1]), tol)
    _, s, vt = np.linalg.svd(m)
    cut = tol * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cut))
    return SubspaceBasis(vt[rank:].T.copy(), tol)


def subspace_equal(a: SubspaceBasis, b: SubspaceBasis, tol_angle: float = ANGLE_TOL) -> bool:
    """True iff dims match and the largest principal angle is below tol_angle."""
    if a.ambient_dim != b.ambient_dim:
        raise DimensionMismatchError("bases in different ambient spaces")
    if a.dim != b.dim:
        return False
    if a.dim == 0:
        return True
    qa, qb = a.orthonormal(), b.orthonormal()
    sv = np.linalg.svd(qa.T @ qb, compute_uv=False)
    # cos of the largest principal angle is the smallest singular value
    return float(np.arccos(np.clip(sv.min(), -1.0, 1.0))) < tol_angle


def subspace_contains(outer: SubspaceBasis, inner: SubspaceBasis, tol: float = RANK_TOL) -> bool:
    """True iff span(inner) is inside span(outer) up to projection residual tol."""
    if inner.dim == 0:
        return True
    qo, qi = outer.orthonormal(), inner.orthonormal()
    residual = qi - qo @ (qo.T @ qi)
    return np.linalg.norm(residual) < max(tol, tol * np.linalg.norm(qi))


@dataclass(frozen=True)
class ConstraintReport:
    """Unobservable dimensions of the underlying system and of an EKF model."""

    dim_true: tuple[int, ...]
    dim_ekf: tuple[int, ...]
    satisfied: bool


def check_observability_constraint(
    truth_seq: ObservabilitySequence,
    ekf_seq: ObservabilitySequence,
    k: int,
    tol: float = RANK_TOL,
) -> ConstraintReport:
    """Compare nullspace dimensions of the two stacked matrices for all orders <= k."""
    dims_true, dims_ekf = [], []
    for order in range(k + 1):
        t = ObservabilitySequence(truth_seq.H[: order + 1], truth_seq.F[:order])
        e = ObservabilitySequence(ekf_seq.H[: order + 1], ekf_seq.F[:order])
        dims_true.append(nullspace_basis(observability_matrix(t), tol).dim)
        dims_ekf.append(nullspace_basis(observability_matrix(e), tol).dim)
    return ConstraintReport(tuple(dims_true), tuple(dims_ekf), dims_true == dims_ekf)


def check_condition_i(
    h_at: Callable[[object], np.ndarray],
    samples: Sequence,
    tol: float = RANK_TOL,
    tol_angle: float = ANGLE_TOL,
):
    """Is null(H(X)) one constant subspace across all sampled states?

    Returns (ok, witness); the witness is a failing sample pair or None.
    """
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    reference = nullspace_basis(h_at(samples[0]), tol)
    for x in samples[1:]:
        candidate = nullspace_basis(h_at(x), tol)
        if not subspace_equal(reference, candidate, tol_angle):
            return False, (samples[0], x)
    return True, None


def check_condition_ii(
    h_at: Callable[[object], np.ndarray],
    f_between: Callable[[object, object], np.ndarray],
    sample_pairs: Sequence[tuple],
    tol: float = RANK_TOL,
):
    """Is null(H(X1) F(X1, X0)) contained in null(H(X0)) on every sampled pair?"""
    if not sample_pairs:
        raise ValueError("need at least one sample pair")
    for x0, x1 in sample_pairs:
        lhs = nullspace_basis(h_at(x1) @ f_between(x1, x0), tol)
        rhs = nullspace_basis(h_at(x0), tol)
        if not subspace_contains(rhs, lhs, max(tol, 1e-8)):
            return False, (x0, x1)
    return True, None


def check_constant_nullspace(
    seq_factory: Callable[[np.random.Generator], ObservabilitySequence],
    samples: int,
    rng: np.random.Generator,
    tol: float = RANK_TOL,
    tol_angle: float = ANGLE_TOL,
):
    """Sample ground-truth trajectories and test constancy of the unobservable subspace.

    Each draw builds the stacked observability matrix from ground-truth
    Jacobians in the atlas under test. Returns (ok, common basis) when the
    sampled nullspaces agree, else (False, witness pair of bases).
    """
    reference = None
    for _ in range(samples):
        seq = seq_factory(rng)
        basis = nullspace_basis(observability_matrix(seq), tol)
        if reference is None:
            reference = basis
        elif not subspace_equal(reference, basis, tol_angle):
            return False, (reference, basis)
    return True, reference


@dataclass(frozen=True)
class BlockRowOp:
    """Elementary block-row operation: swap, scale, or add (target += mult @ source)."""

    kind: str  # "swap" | "scale" | "add"
    target: int
    source: int = -1
    mult: np.ndarray | None = None


def compose_row_ops(ops: Iterable[BlockRowOp], block_dims: Sequence[int]) -> np.ndarray:
    """Product of elementary block matrices in application order.

    The returned matrix A applies the operations when left-multiplying a
    block matrix with row blocks of the given sizes.
    """
    offsets = np.concatenate([[0], np.cumsum(block_dims)])
    n = int(offsets[-1])

    def blk(i):
        return slice(offsets[i], offsets[i + 1])

    out = np.eye(n)
    for op in ops:
        e = np.eye(n)
        if op.kind == "swap":
            ti, si = blk(op.target), blk(op.source)
            if block_dims[op.target] != block_dims[op.source]:
                raise DimensionMismatchError("swap of unequal block sizes")
            e[ti, ti] = 0.0
            e[si, si] = 0.0
            e[ti, si] = np.eye(block_dims[op.target])
            e[si, ti] = np.eye(block_dims[op.source])
        elif op.kind == "scale":
            mult = np.asarray(op.mult, dtype=float)
            if mult.shape != (block_dims[op.target], block_dims[op.target]):
                raise DimensionMismatchError("scale block of wrong size")
            if np.linalg.cond(mult) > 1e12:
                raise SingularAffineError("scale block is singular")
            e[blk(op.target), blk(op.target)] = mult
        elif op.kind == "add":
            mult = np.asarray(op.mult, dtype=float)
            if mult.shape != (block_dims[op.target], block_dims[op.source]):
                raise DimensionMismatchError(
                    f"add block must be {block_dims[op.target]}x{block_dims[op.source]}"
                )
            e[blk(op.target), blk(op.source)] = mult
        else:
            raise ValueError(f"unknown row operation kind {op.kind!r}")
        out = e @ out
    return out


def verify_affine_candidate(
    affine: Callable[[object], np.ndarray],
    n_at: Callable[[object], np.ndarray],
    samples: Sequence,
    tol_angle: float = ANGLE_TOL,
) -> bool:
    """True iff span(A_X N(X)) is one constant subspace across the sampled states."""
    reference = None
    for x in samples:
        a = affine(x)
        if np.linalg.cond(a) > 1e8:
            raise SingularAffineError("candidate affine map is singular at a sample")
        basis = SubspaceBasis(a @ n_at(x))
        if reference is None:
            reference = basis
        elif not subspace_equal(reference, basis, tol_angle):
            return False
    return True


def check_lemma_rank(
    seq_a: ObservabilitySequence, seq_b: ObservabilitySequence, tol: float = RANK_TOL
) -> bool:
    """Rank and nullspace dimension agree between the two atlas representations."""
    oa, ob = observability_matrix(seq_a), observability_matrix(seq_b)
    if oa.shape[1] != ob.shape[1]:
        raise DimensionMismatchError("sequences over different state dimensions")
    ra = oa.shape[1] - nullspace_basis(oa, tol).dim
    rb = ob.shape[1] - nullspace_basis(ob, tol).dim
    return ra == rb


def check_lemma_affine_nullspace(
    a_x0: np.ndarray,
    n_eta: SubspaceBasis,
    n_xi: SubspaceBasis,
    tol_angle: float = ANGLE_TOL,
) -> bool:
    """Does A_{X0} map the base-atlas nullspace onto the affine-atlas one?"""
    mapped = SubspaceBasis(a_x0 @ n_eta.basis, n_eta.tol)
    return subspace_equal(mapped, n_xi, tol_angle)
