"""Consistency-preserving EKFs on manifold charts.

Subpackages: ``liegroups`` (rotation and SE_k primitives), ``atlas``
(charts and chart Jacobians), ``ekf_core`` (generic filter steps),
``observability`` (subspace checkers), ``slam`` (application models and
filter variants), ``sim`` (environments, Monte Carlo harness, CLI).
"""
from . import atlas, ekf_core, errors, liegroups, observability, sim, slam

__version__ = "0.1.0"

__all__ = ["atlas", "ekf_core", "errors", "liegroups", "observability", "sim", "slam", "__version__"]
