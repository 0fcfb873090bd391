from .states import CpState, Odometry, PlaneState, PointState, perturb_odometry
from .models import (
    AppModel,
    CpModel,
    PlaneModel,
    PointModel,
    make_cp_model,
    make_plane_model,
    make_point_model,
)
from .variants import FilterVariant, make_variant, VARIANT_NAMES

__all__ = [
    "AppModel",
    "CpModel",
    "CpState",
    "FilterVariant",
    "Odometry",
    "PlaneModel",
    "PlaneState",
    "PointModel",
    "PointState",
    "VARIANT_NAMES",
    "make_cp_model",
    "make_plane_model",
    "make_point_model",
    "make_variant",
    "perturb_odometry",
]
